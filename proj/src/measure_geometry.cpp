#include "mmg/measure_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace mmg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double set_diam(const PointedSpace& s, const std::vector<std::size_t>& idx) {
    double d = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b)
            d = std::max(d, s.dist(idx[a], idx[b]));
    return d;
}

CoverEstimate binned_cover(const PointedSpace& space,
                           const std::vector<std::size_t>& target, double s,
                           double delta) {
    CoverEstimate est;
    est.s = s;
    est.delta = delta;
    est.mode = CoverMode::greedy_upper;
    if (target.empty()) return est;

    if (delta == kInf) {
        CoverPiece p{target, set_diam(space, target)};
        est.value = std::pow(p.diam, s);
        est.cover.push_back(std::move(p));
        return est;
    }

    if (space.has_coords()) {
        // axis-aligned cells of side delta anchored at the corner of the data
        std::size_t dim = space.ambient_dim();
        std::vector<double> lo(dim, kInf);
        for (std::size_t i : target)
            for (std::size_t k = 0; k < dim; ++k)
                lo[k] = std::min(lo[k], space.coords()[i][k]);
        std::map<std::vector<long long>, CoverPiece> cells;
        for (std::size_t i : target) {
            std::vector<long long> key(dim);
            for (std::size_t k = 0; k < dim; ++k) {
                double t = (space.coords()[i][k] - lo[k]) / delta;
                key[k] = static_cast<long long>(std::floor(t + kTightTol));
            }
            cells[key].members.push_back(i);
        }
        for (auto& kv : cells) {
            kv.second.diam = delta;
            est.value += std::pow(delta, s);
            est.cover.push_back(std::move(kv.second));
        }
        return est;
    }

    // metric-only fallback: greedy half-mesh net, each cell charged delta
    std::vector<char> used(space.size(), 0);
    for (std::size_t i : target) {
        if (used[i]) continue;
        CoverPiece p;
        for (std::size_t j : target)
            if (!used[j] && space.dist(i, j) <= delta / 2.0) {
                used[j] = 1;
                p.members.push_back(j);
            }
        p.diam = delta;
        est.value += std::pow(delta, s);
        est.cover.push_back(std::move(p));
    }
    return est;
}

CoverEstimate exact_partition(const PointedSpace& space,
                              const std::vector<std::size_t>& target, double s,
                              double delta) {
    if (target.size() > 15) throw DomainError("exact cover limited to 15 points");
    CoverEstimate est;
    est.s = s;
    est.delta = delta;
    est.mode = CoverMode::exact_small;
    std::size_t n = target.size();
    if (n == 0) return est;

    std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<double> diam(full + 1, 0.0);
    for (std::size_t mask = 1; mask <= full; ++mask) {
        std::size_t hi = 63 - static_cast<std::size_t>(__builtin_clzll(mask));
        std::size_t rest = mask ^ (std::size_t{1} << hi);
        double d = diam[rest];
        for (std::size_t b = 0; b < n; ++b)
            if (rest & (std::size_t{1} << b))
                d = std::max(d, space.dist(target[hi], target[b]));
        diam[mask] = d;
    }
    std::vector<double> best(full + 1, kInf);
    std::vector<std::size_t> pick(full + 1, 0);
    best[0] = 0.0;
    for (std::size_t mask = 1; mask <= full; ++mask) {
        std::size_t low = mask & (~mask + 1);
        for (std::size_t sub = mask; sub; sub = (sub - 1) & mask) {
            if (!(sub & low)) continue;
            if (diam[sub] > delta) continue;
            double v = best[mask ^ sub] + std::pow(diam[sub], s);
            if (v < best[mask]) {
                best[mask] = v;
                pick[mask] = sub;
            }
        }
    }
    if (best[full] == kInf) throw DomainError("no admissible partition at this mesh");
    est.value = best[full];
    for (std::size_t mask = full; mask;) {
        std::size_t sub = pick[mask];
        CoverPiece p;
        for (std::size_t b = 0; b < n; ++b)
            if (sub & (std::size_t{1} << b)) p.members.push_back(target[b]);
        p.diam = diam[sub];
        est.cover.push_back(std::move(p));
        mask ^= sub;
    }
    return est;
}

}  // namespace

CoverEstimate content(const PointedSpace& space, const std::vector<std::size_t>& target,
                      double s, double delta, CoverMode mode) {
    if (s < 0.0) throw DomainError("dimension exponent must be nonnegative");
    if (delta <= 0.0) throw DomainError("mesh must be positive (use infinity for content)");
    for (std::size_t i : target)
        if (i >= space.size()) throw DomainError("target index out of range");
    return mode == CoverMode::exact_small ? exact_partition(space, target, s, delta)
                                          : binned_cover(space, target, s, delta);
}

DensityProfile density_profile(const MeasuredSpace& s, std::size_t point,
                               const std::vector<double>& scales, double dim) {
    if (point >= s.size()) throw DomainError("density point out of range");
    DensityProfile p;
    p.point = point;
    p.window_min = kInf;
    p.window_max = -kInf;
    for (double r : scales) {
        if (r <= 0.0) throw DomainError("density scale must be positive");
        double mass = s.ball_mass(point, r);
        double r2 = mass / std::pow(2.0 * r, dim);
        p.scales.push_back(r);
        p.ratio_2r.push_back(r2);
        p.ratio_r.push_back(mass / std::pow(r, dim));
        p.window_min = std::min(p.window_min, r2);
        p.window_max = std::max(p.window_max, r2);
    }
    return p;
}

DoublingScan doubling_scan(const MeasuredSpace& s, const std::vector<double>& scales) {
    DoublingScan out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.weight[i] <= 0.0 && i != s.base()) continue;
        for (double r : scales) {
            if (r <= 0.0) throw DomainError("doubling scale must be positive");
            DoublingRecord rec;
            rec.point = i;
            rec.r = r;
            double inner = s.ball_mass(i, r);
            double outer = s.ball_mass(i, 2.0 * r);
            if (inner <= 0.0) {
                rec.positive = false;
                out.all_positive = false;
            } else {
                rec.ratio = outer / inner;
                out.max_ratio = std::max(out.max_ratio, rec.ratio);
            }
            out.records.push_back(rec);
        }
    }
    return out;
}

ModelFit bilip_model_fit(const PointedSpace& local, std::size_t n_dim, double K,
                         double delta, std::size_t grid_res,
                         const SearchBudget& budget) {
    if (K < 1.0) throw DomainError("bi-Lipschitz constant must be at least 1");
    if (n_dim == 0) throw DomainError("model dimension must be positive");
    double half = K * (1.0 + 2.0 * delta);
    if (grid_res == 0) {
        // resolve at the data's own spacing; finer buys nothing
        std::vector<double> nn;
        std::size_t step = std::max<std::size_t>(1, local.size() / 32);
        for (std::size_t i = 0; i < local.size(); i += step) {
            double d = kInf;
            for (std::size_t j = 0; j < local.size(); ++j)
                if (j != i && local.dist(i, j) > 0) d = std::min(d, local.dist(i, j));
            if (d < kInf) nn.push_back(d);
        }
        double spacing = 0.25;
        if (!nn.empty()) {
            std::sort(nn.begin(), nn.end());
            spacing = nn[nn.size() / 2];
        }
        grid_res = static_cast<std::size_t>(std::ceil(2.0 * half / spacing)) + 1;
        grid_res = std::min<std::size_t>(grid_res, 33);
    }
    if (grid_res < 3) grid_res = 3;
    if (grid_res % 2 == 0) ++grid_res;  // keep the origin on the grid

    ModelFit fit;
    fit.grid_spacing = 2.0 * half / double(grid_res - 1);

    // nodes beyond the data's bi-Lipschitz reach have no admissible image
    double reach = 0.0;
    for (std::size_t i = 0; i < local.size(); ++i)
        reach = std::max(reach, local.dist(local.base(), i));
    double node_cap = K * (reach + delta) + kTightTol;

    auto norm_inf = [](const std::vector<double>& q) {
        double m = 0.0;
        for (double c : q) m = std::max(m, std::fabs(c));
        return m;
    };
    std::vector<std::vector<double>> nodes;
    std::size_t total = 1;
    for (std::size_t k = 0; k < n_dim; ++k) total *= grid_res;
    nodes.reserve(total);
    for (std::size_t t = 0; t < total; ++t) {
        std::size_t rem = t;
        std::vector<double> q(n_dim);
        for (std::size_t k = 0; k < n_dim; ++k) {
            q[k] = -half + fit.grid_spacing * double(rem % grid_res);
            rem /= grid_res;
        }
        if (norm_inf(q) <= node_cap) nodes.push_back(std::move(q));
    }
    std::vector<std::size_t> order(nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double na = norm_inf(nodes[a]), nb = norm_inf(nodes[b]);
        return na < nb || (na == nb && a < b);
    });

    auto band_violation = [&](const std::vector<double>& q, const std::vector<double>& q2,
                              double d) {
        double sep = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k)
            sep = std::max(sep, std::fabs(q[k] - q2[k]));
        return std::max(sep / K - d, d - K * sep);
    };

    std::vector<std::size_t> chart(nodes.size(), 0);
    chart[order[0]] = local.base();  // origin pins the basepoint
    bool coord_seed = local.has_coords() && local.ambient_dim() == n_dim;
    if (coord_seed) {
        // align through the ambient coordinates; exact on flat patches
        const auto& base_c = local.coords()[local.base()];
        for (std::size_t t = 1; t < order.size(); ++t) {
            std::size_t node = order[t];
            double bd = kInf;
            std::size_t best = 0;
            for (std::size_t cand = 0; cand < local.size(); ++cand) {
                double d = 0.0;
                for (std::size_t k = 0; k < n_dim; ++k)
                    d = std::max(d, std::fabs(local.coords()[cand][k] - base_c[k] -
                                              nodes[node][k]));
                if (d < bd - kTightTol) {
                    bd = d;
                    best = cand;
                }
            }
            chart[node] = best;
        }
    } else {
        for (std::size_t t = 1; t < order.size(); ++t) {
            std::size_t node = order[t];
            double best_score = kInf;
            std::size_t best = 0;
            for (std::size_t cand = 0; cand < local.size(); ++cand) {
                double score = 0.0;
                for (std::size_t u = 0; u < t; ++u) {
                    std::size_t prev = order[u];
                    score = std::max(score, band_violation(nodes[node], nodes[prev],
                                                           local.dist(cand, chart[prev])));
                    if (score >= best_score) break;
                }
                if (score < best_score - kTightTol) {
                    best_score = score;
                    best = cand;
                }
            }
            chart[node] = best;
        }
    }
    auto full_violation = [&]() {
        double v = 0.0;
        for (std::size_t a = 0; a < nodes.size(); ++a)
            for (std::size_t b = a + 1; b < nodes.size(); ++b)
                v = std::max(v, band_violation(nodes[a], nodes[b],
                                               local.dist(chart[a], chart[b])));
        return v;
    };
    double cur = full_violation();
    // refine only when the seed is worse than the resolution slack
    for (int round = 0; round < budget.improve_rounds && cur > fit.grid_spacing; ++round) {
        bool any = false;
        // violation of all pairs avoiding node a, so a trial only rescans
        // row a; the avoiding-max comes from the top pair violations
        std::vector<double> rest(nodes.size(), 0.0);
        {
            struct Pair {
                double v;
                std::size_t a, b;
            };
            std::vector<Pair> top;
            for (std::size_t a = 0; a < nodes.size(); ++a)
                for (std::size_t b = a + 1; b < nodes.size(); ++b) {
                    double v = band_violation(nodes[a], nodes[b],
                                              local.dist(chart[a], chart[b]));
                    top.push_back({v, a, b});
                }
            std::partial_sort(top.begin(),
                              top.begin() + std::min<std::size_t>(top.size(), 8),
                              top.end(),
                              [](const Pair& x, const Pair& y) { return x.v > y.v; });
            top.resize(std::min<std::size_t>(top.size(), 8));
            for (std::size_t c = 0; c < nodes.size(); ++c)
                for (const auto& p : top)
                    if (p.a != c && p.b != c) {
                        rest[c] = p.v;
                        break;
                    }
        }
        for (std::size_t a = 0; a < nodes.size(); ++a) {
            if (norm_inf(nodes[a]) == 0.0) continue;
            std::size_t keep = chart[a];
            double best_row = 0.0;
            for (std::size_t b = 0; b < nodes.size(); ++b)
                if (b != a)
                    best_row = std::max(best_row,
                                        band_violation(nodes[a], nodes[b],
                                                       local.dist(keep, chart[b])));
            double best_val = std::max(rest[a], best_row);
            for (std::size_t cand = 0; cand < local.size(); ++cand) {
                if (cand == keep) continue;
                double row = 0.0;
                for (std::size_t b = 0; b < nodes.size() && row < best_val; ++b)
                    if (b != a)
                        row = std::max(row, band_violation(nodes[a], nodes[b],
                                                           local.dist(cand, chart[b])));
                double val = std::max(rest[a], row);
                if (val < best_val - kTightTol) {
                    best_val = val;
                    keep = cand;
                    any = true;
                }
            }
            chart[a] = keep;
        }
        cur = full_violation();
        if (!any) break;
    }
    fit.nodes = nodes;
    fit.chart = chart;
    fit.delta_fit = std::max(0.0, cur);

    // certified interval against the unit-window sub-grid of the model;
    // the window matches the rescaled patch so the comparison is between
    // bounded spaces of the same extent
    std::vector<std::size_t> window_nodes;
    for (std::size_t a = 0; a < nodes.size(); ++a)
        if (norm_inf(nodes[a]) <= 1.0 + kTightTol) window_nodes.push_back(a);
    std::size_t base_pos = 0;
    std::vector<double> m(window_nodes.size() * window_nodes.size(), 0.0);
    for (std::size_t a = 0; a < window_nodes.size(); ++a) {
        if (norm_inf(nodes[window_nodes[a]]) == 0.0) base_pos = a;
        for (std::size_t b = 0; b < window_nodes.size(); ++b) {
            double sep = 0.0;
            for (std::size_t k = 0; k < n_dim; ++k)
                sep = std::max(sep, std::fabs(nodes[window_nodes[a]][k] -
                                              nodes[window_nodes[b]][k]));
            m[a * window_nodes.size() + b] = sep;
        }
    }
    PointedSpace grid_space =
        PointedSpace::from_matrix(window_nodes.size(), base_pos, std::move(m));
    if (grid_space.size() * local.size() <= 20000) {
        fit.dpgh = estimate_dpgh(grid_space, local, budget);
    } else {
        fit.dpgh.lower = radial_hausdorff_lower(grid_space, local);
        fit.dpgh.upper = 0.5;
        fit.dpgh.method = EstimateMethod::local_search;
    }

    // the chart restricted to the window seeds an additional upper bound
    EpsIsometry iso;
    iso.map.assign(window_nodes.size(), EpsIsometry::unmapped);
    double level = 1e-15;
    for (std::size_t a = 0; a < window_nodes.size(); ++a) {
        iso.map[a] = chart[window_nodes[a]];
        for (std::size_t b = 0; b < a; ++b)
            level = std::max(level, std::fabs(local.dist(iso.map[a], iso.map[b]) -
                                              grid_space.dist(a, b)));
    }
    for (std::size_t j = 0; j < local.size(); ++j) {
        double best = kInf;
        for (std::size_t a = 0; a < window_nodes.size(); ++a)
            best = std::min(best, local.dist(iso.map[a], j));
        level = std::max(level, best);
    }
    iso.eps = level;
    iso.provenance = Provenance::searched;
    MeasuredSpace gm{grid_space, std::vector<double>(grid_space.size(), 0.0)};
    MeasuredSpace lm{local, std::vector<double>(local.size(), 0.0)};
    Coupling c = coupling_from_eps_isometry(gm, lm, iso);
    double h = c.hausdorff_value();
    if (h < fit.dpgh.upper) {
        fit.dpgh.upper = h;
        fit.dpgh.witness_upper = c;
    }
    fit.dpgh.upper = std::max(fit.dpgh.upper, fit.dpgh.lower);
    return fit;
}

GtaReport verify_gta(const MeasuredSpace& X, const std::vector<std::size_t>& C,
                     const std::vector<std::size_t>& G, double eta, double K,
                     double delta, double R0, const std::vector<double>& scales,
                     std::size_t n_dim, std::size_t grid_res,
                     const SearchBudget& budget) {
    std::vector<char> inC(X.size(), 0), inG(X.size(), 0);
    for (std::size_t i : C) {
        if (i >= X.size()) throw DomainError("C index out of range");
        inC[i] = 1;
    }
    for (std::size_t i : G) {
        if (i >= X.size()) throw DomainError("G index out of range");
        if (!inC[i]) throw DomainError("G must be contained in C");
        inG[i] = 1;
    }

    GtaReport rep;
    rep.eta = eta;
    rep.K = K;
    rep.delta = delta;
    rep.R0 = R0;
    rep.g_empty = G.empty();
    bool ok = true;

    for (std::size_t x : C)
        for (double r : scales) {
            if (r > R0) continue;
            GtaDensityRecord rec;
            rec.point = x;
            rec.r = r;
            rec.mass = X.ball_mass(x, r);
            rec.bound = eta * std::pow(r, double(n_dim));
            rec.pass = rec.mass + kTol >= rec.bound;
            ok = ok && rec.pass;
            rep.density.push_back(rec);
        }

    double threshold = std::min(delta, 1.0 / (K * (1.0 + 2.0 * delta)));
    std::size_t res = grid_res;
    if (res == 0) {
        // window spacing must resolve the pass threshold
        double half = K * (1.0 + 2.0 * delta);
        res = static_cast<std::size_t>(std::ceil(8.0 * half / threshold)) + 1;
        res = std::min<std::size_t>(res | 1, 65);
    }
    for (std::size_t x : G)
        for (double r : scales) {
            if (r > R0) continue;
            GtaApproxRecord rec;
            rec.point = x;
            rec.r = r;
            rec.threshold = threshold;
            rec.defect_bound = eta * std::pow(delta * r, double(n_dim));
            std::vector<std::size_t> cball;
            double defect = 0.0;
            for (std::size_t i = 0; i < X.size(); ++i) {
                if (X.space.dist(x, i) > r) continue;
                if (inC[i])
                    cball.push_back(i);
                else
                    defect += X.weight[i];
            }
            rec.csize = cball.size();
            rec.defect = defect;
            if (!(defect < rec.defect_bound)) {
                rec.pass = false;
                rec.note = "mass defect exceeds the admissible bound";
                ok = false;
                rep.approx.push_back(rec);
                continue;
            }
            PointedSpace rescaled;
            if (X.space.has_coords()) {
                std::vector<std::vector<double>> pc;
                std::size_t base_pos2 = 0;
                pc.reserve(cball.size());
                for (std::size_t a = 0; a < cball.size(); ++a) {
                    if (cball[a] == x) base_pos2 = a;
                    auto p = X.space.coords()[cball[a]];
                    for (std::size_t k = 0; k < p.size(); ++k)
                        p[k] = (p[k] - X.space.coords()[x][k]) / r;
                    pc.push_back(std::move(p));
                }
                rescaled = PointedSpace::from_points(std::move(pc), X.space.norm(), base_pos2);
            } else {
                PointedSpace sub = extract_subspace(X.space, cball, x);
                std::size_t n = sub.size();
                std::vector<double> m(n * n);
                for (std::size_t a = 0; a < n; ++a)
                    for (std::size_t b = 0; b < n; ++b) m[a * n + b] = sub.dist(a, b) / r;
                rescaled = PointedSpace::from_matrix(n, sub.base(), std::move(m));
            }
            ModelFit fit = bilip_model_fit(rescaled, n_dim, K, delta, res, budget);
            rec.dpgh_upper = fit.dpgh.upper;
            rec.delta_fit = fit.delta_fit;
            rec.pass = fit.dpgh.upper < threshold;
            if (!rec.pass) rec.note = "certified upper bound misses the threshold";
            ok = ok && rec.pass;
            rep.approx.push_back(rec);
        }
    rep.pass = ok;
    return rep;
}

}  // namespace mmg
