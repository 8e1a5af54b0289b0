#include "mmg/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace mmg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> window_indices(const PointedSpace& s, double radius) {
    std::vector<std::size_t> w;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.dist(s.base(), i) <= radius) w.push_back(i);
    std::sort(w.begin(), w.end(), [&](std::size_t a, std::size_t b) {
        double da = s.dist(s.base(), a), db = s.dist(s.base(), b);
        return da < db || (da == db && a < b);
    });
    return w;
}

}  // namespace

IsometryCheck check_eps_isometry(const PointedSpace& left, const PointedSpace& right,
                                 const EpsIsometry& cand, double tol) {
    if (cand.eps <= 0.0) throw DomainError("eps must be positive");
    if (cand.map.size() != left.size()) throw DomainError("candidate map length mismatch");
    IsometryCheck out;
    const double eps = cand.eps;
    auto window = window_indices(left, 1.0 / eps);
    for (std::size_t i : window)
        if (cand.map[i] == EpsIsometry::unmapped)
            throw DomainError("incomplete candidate: index " + std::to_string(i) +
                              " lies in the window but is unmapped");
    for (std::size_t i = 0; i < left.size(); ++i)
        if (cand.map[i] != EpsIsometry::unmapped && cand.map[i] >= right.size())
            throw DomainError("candidate maps to an invalid right index");

    if (cand.map[left.base()] != right.base())
        out.violations.push_back("basepoint is not preserved");

    for (std::size_t a = 0; a < window.size(); ++a)
        for (std::size_t b = a; b < window.size(); ++b) {
            std::size_t i = window[a], j = window[b];
            double d = std::fabs(right.dist(cand.map[i], cand.map[j]) - left.dist(i, j));
            out.worst_distortion = std::max(out.worst_distortion, d);
            if (d > eps + tol)
                out.violations.push_back("distortion " + std::to_string(d) + " at (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")");
        }

    double shrunk = 1.0 / eps - eps;
    for (std::size_t j = 0; j < right.size(); ++j) {
        if (right.dist(right.base(), j) > shrunk) continue;
        double best = kInf;
        for (std::size_t i : window) best = std::min(best, right.dist(cand.map[i], j));
        out.worst_coverage = std::max(out.worst_coverage, best);
        if (best > eps + tol)
            out.violations.push_back("right index " + std::to_string(j) +
                                     " uncovered (gap " + std::to_string(best) + ")");
    }
    out.pass = out.violations.empty();
    return out;
}

EpsIsometry eps_isometry_from_hausdorff(const SubsetPair& pair, double eps) {
    auto h = local_hausdorff(pair);
    if (!(h.value < eps))
        throw DomainError("no construction: H_z = " + std::to_string(h.value) +
                          " is not below eps = " + std::to_string(eps));
    PointedSpace left = extract_subspace(pair.host, pair.left);
    EpsIsometry iso;
    iso.eps = 2.0 * eps;
    iso.provenance = Provenance::from_hausdorff;
    iso.map.assign(left.size(), EpsIsometry::unmapped);

    // nearest right point, lowest index on ties; basepoint pinned.
    std::size_t right_base_pos = 0;
    for (std::size_t k = 0; k < pair.right.size(); ++k)
        if (pair.right[k] == pair.host.base()) right_base_pos = k;
    for (std::size_t a = 0; a < pair.left.size(); ++a) {
        std::size_t i = pair.left[a];
        if (pair.host.dist(pair.host.base(), i) > 1.0 / eps) continue;
        if (i == pair.host.base()) {
            iso.map[a] = right_base_pos;
            continue;
        }
        std::size_t best = 0;
        double bd = kInf;
        for (std::size_t k = 0; k < pair.right.size(); ++k) {
            double d = pair.host.dist(i, pair.right[k]);
            if (d < bd - kTightTol) {
                bd = d;
                best = k;
            }
        }
        iso.map[a] = best;
    }
    return iso;
}

std::vector<std::size_t> Coupling::left_set() const {
    std::vector<std::size_t> s;
    s.reserve(left_pos.size());
    for (std::size_t p : left_pos) s.push_back(p);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

std::vector<std::size_t> Coupling::right_set() const {
    std::vector<std::size_t> s;
    s.reserve(right_pos.size());
    for (std::size_t p : right_pos) s.push_back(p);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

std::vector<std::string> Coupling::validate(const PointedSpace& left,
                                            const PointedSpace& right) const {
    std::vector<std::string> bad;
    std::size_t n = glued.size();
    if (left_pos.size() != left.size() || right_pos.size() != right.size())
        bad.push_back("position map length mismatch");
    for (std::size_t a = 0; a < left.size() && bad.empty(); ++a)
        for (std::size_t b = 0; b < left.size(); ++b)
            if (std::fabs(glued.dist(left_pos[a], left_pos[b]) - left.dist(a, b)) > kTol) {
                bad.push_back("left restriction broken");
                break;
            }
    for (std::size_t a = 0; a < right.size() && bad.empty(); ++a)
        for (std::size_t b = 0; b < right.size(); ++b)
            if (std::fabs(glued.dist(right_pos[a], right_pos[b]) - right.dist(a, b)) > kTol) {
                bad.push_back("right restriction broken");
                break;
            }
    // full triangle sweep for small hosts, strided sample above
    std::size_t stride = n <= 150 ? 1 : n / 100 + 1;
    for (std::size_t i = 0; i < n; i += 1)
        for (std::size_t j = i + 1; j < n; j += stride)
            for (std::size_t k = j + 1; k < n; k += stride) {
                double a = glued.dist(i, j), b = glued.dist(j, k), c = glued.dist(i, k);
                if (a > b + c + kTol || b > a + c + kTol || c > a + b + kTol) {
                    bad.push_back("triangle violation (" + std::to_string(i) + "," +
                                  std::to_string(j) + "," + std::to_string(k) + ")");
                    if (bad.size() > 8) return bad;
                }
            }
    return bad;
}

double Coupling::hausdorff_value() const {
    return local_hausdorff({glued, left_set(), right_set()}).value;
}

double Coupling::flat_value(double tol) const {
    return flat(glued, left_weight, right_weight, tol);
}

Coupling coupling_from_eps_isometry(const MeasuredSpace& left, const MeasuredSpace& right,
                                    const EpsIsometry& iso) {
    auto check = check_eps_isometry(left.space, right.space, iso);
    if (!check.pass)
        throw DomainError("coupling requires a verified eps-isometry: " +
                          check.violations.front());
    const double eps = iso.eps;
    std::size_t nl = left.size(), nr = right.size();
    std::vector<std::size_t> dom;
    for (std::size_t i = 0; i < nl; ++i)
        if (iso.map[i] != EpsIsometry::unmapped &&
            left.space.dist(left.base(), i) <= 1.0 / eps)
            dom.push_back(i);

    // cross distances from the isometry, then the basepoint gluing shortcut
    auto raw = [&](std::size_t i, std::size_t j) {
        double best = kInf;
        for (std::size_t w : dom)
            best = std::min(best, left.space.dist(i, w) +
                                      right.space.dist(iso.map[w], j) + eps);
        return best;
    };

    Coupling c;
    std::size_t n = nl + nr - 1;
    std::vector<double> m(n * n, 0.0);
    c.left_pos.assign(nl, 0);
    c.right_pos.assign(nr, 0);
    std::size_t pos = 1;
    for (std::size_t i = 0; i < nl; ++i)
        c.left_pos[i] = (i == left.base()) ? 0 : pos++;
    for (std::size_t j = 0; j < nr; ++j)
        c.right_pos[j] = (j == right.base()) ? 0 : pos++;

    for (std::size_t i = 0; i < nl; ++i)
        for (std::size_t i2 = 0; i2 < nl; ++i2)
            m[c.left_pos[i] * n + c.left_pos[i2]] = left.space.dist(i, i2);
    for (std::size_t j = 0; j < nr; ++j)
        for (std::size_t j2 = 0; j2 < nr; ++j2)
            m[c.right_pos[j] * n + c.right_pos[j2]] = right.space.dist(j, j2);
    for (std::size_t i = 0; i < nl; ++i) {
        if (i == left.base()) continue;
        for (std::size_t j = 0; j < nr; ++j) {
            if (j == right.base()) continue;
            double through_base = left.space.dist(i, left.base()) +
                                  right.space.dist(right.base(), j);
            double v = std::min(raw(i, j), through_base);
            m[c.left_pos[i] * n + c.right_pos[j]] = v;
            m[c.right_pos[j] * n + c.left_pos[i]] = v;
        }
    }
    // basepoint row: distance from the identified point
    for (std::size_t i = 0; i < nl; ++i) {
        double v = left.space.dist(i, left.base());
        m[0 * n + c.left_pos[i]] = v;
        m[c.left_pos[i] * n + 0] = v;
    }
    for (std::size_t j = 0; j < nr; ++j) {
        double v = std::min(right.space.dist(j, right.base()), raw(left.base(), j));
        m[0 * n + c.right_pos[j]] = v;
        m[c.right_pos[j] * n + 0] = v;
    }
    m[0] = 0.0;
    c.glued = PointedSpace::from_matrix(n, 0, std::move(m));

    c.left_weight.assign(n, 0.0);
    c.right_weight.assign(n, 0.0);
    for (std::size_t i = 0; i < nl; ++i) c.left_weight[c.left_pos[i]] += left.weight[i];
    for (std::size_t j = 0; j < nr; ++j) c.right_weight[c.right_pos[j]] += right.weight[j];

    auto bad = c.validate(left.space, right.space);
    if (!bad.empty())
        throw SolverError("glued metric invalid (" + bad.front() +
                          "); the eps-isometry was inconsistent");
    return c;
}

// ---------------------------------------------------------------------------
// exact small-instance search for the minimal verified eps-isometry level

namespace {

struct ExactSearch {
    const PointedSpace& left;
    const PointedSpace& right;
    std::uint64_t node_cap;
    std::uint64_t nodes = 0;
    bool exceeded = false;

    std::vector<double> candidates() const {
        std::set<double> c;
        std::size_t nl = left.size(), nr = right.size();
        for (std::size_t i = 0; i < nl; ++i)
            for (std::size_t i2 = i; i2 < nl; ++i2)
                for (std::size_t j = 0; j < nr; ++j)
                    for (std::size_t j2 = j; j2 < nr; ++j2) {
                        double v = std::fabs(right.dist(j, j2) - left.dist(i, i2));
                        if (v > 0) c.insert(v);
                    }
        for (std::size_t i = 0; i < nl; ++i) {
            double d = left.dist(left.base(), i);
            if (d > 0) c.insert(1.0 / d);
        }
        for (std::size_t j = 0; j < nr; ++j) {
            double rho = right.dist(right.base(), j);
            // level where the shrunken window 1/e - e reaches rho
            c.insert(0.5 * (std::sqrt(rho * rho + 4.0) - rho));
            for (std::size_t j2 = 0; j2 < nr; ++j2) {
                double v = right.dist(j, j2);
                if (v > 0) c.insert(v);
            }
        }
        double maxd = 0.0, minpos = kInf;
        for (std::size_t i = 0; i < nl; ++i) {
            double d = left.dist(left.base(), i);
            maxd = std::max(maxd, d);
            if (d > 0) minpos = std::min(minpos, d);
        }
        double big = std::max(2.0, (minpos == kInf ? 0.0 : 1.0 / minpos) + 1.0);
        big = std::max(big, 2.0 * maxd + 2.0);
        c.insert(big);  // guaranteed-feasible fallback level
        return {c.begin(), c.end()};
    }

    // Feasibility flips only at candidate values, so testing candidates and
    // interval midpoints resolves the exact infimum level. `inf` is the left
    // endpoint of the first feasible region; `level` is a verified point.
    struct MinimalLevel {
        double inf = std::numeric_limits<double>::infinity();
        double level = std::numeric_limits<double>::infinity();
        bool found = false;
    };

    MinimalLevel minimal(std::vector<std::size_t>* map) {
        auto cands = candidates();
        double prev = 0.0;
        for (double c : cands) {
            double mid = 0.5 * (prev + c);
            if (mid > 0.0 && feasible(mid, map)) return {prev, mid, true};
            if (exceeded) return {};
            if (feasible(c, map)) return {c, c, true};
            if (exceeded) return {};
            prev = c;
        }
        return {};
    }

    bool feasible(double eps, std::vector<std::size_t>* found) {
        auto window = window_indices(left, 1.0 / eps);
        std::vector<std::size_t> required;
        double shrunk = 1.0 / eps - eps;
        for (std::size_t j = 0; j < right.size(); ++j)
            if (right.dist(right.base(), j) <= shrunk) required.push_back(j);
        std::vector<std::size_t> assign(window.size(), EpsIsometry::unmapped);
        return place(0, eps, window, required, assign, found);
    }

    bool place(std::size_t q, double eps, const std::vector<std::size_t>& window,
               const std::vector<std::size_t>& required,
               std::vector<std::size_t>& assign, std::vector<std::size_t>* found) {
        if (exceeded) return false;
        if (++nodes > node_cap) {
            exceeded = true;
            return false;
        }
        if (q == window.size()) {
            for (std::size_t j : required) {
                double best = kInf;
                for (std::size_t a = 0; a < window.size(); ++a)
                    best = std::min(best, right.dist(assign[a], j));
                if (best > eps + kTightTol) return false;
            }
            if (found) {
                found->assign(left.size(), EpsIsometry::unmapped);
                for (std::size_t a = 0; a < window.size(); ++a)
                    (*found)[window[a]] = assign[a];
            }
            return true;
        }
        std::size_t i = window[q];
        bool is_base = (i == left.base());
        for (std::size_t j = 0; j < right.size(); ++j) {
            if (is_base && j != right.base()) continue;
            bool ok = true;
            for (std::size_t a = 0; a < q; ++a) {
                double d = std::fabs(right.dist(j, assign[a]) - left.dist(i, window[a]));
                if (d > eps + kTightTol) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            assign[q] = j;
            if (place(q + 1, eps, window, required, assign, found)) return true;
        }
        assign[q] = EpsIsometry::unmapped;
        return false;
    }
};

// Verified-feasible level of a fully defined map: full distortion plus
// full coverage dominate every windowed requirement.
double coarse_level(const PointedSpace& left, const PointedSpace& right,
                    const std::vector<std::size_t>& map) {
    double dist_full = 0.0;
    for (std::size_t i = 0; i < left.size(); ++i)
        for (std::size_t j = i; j < left.size(); ++j)
            dist_full = std::max(
                dist_full, std::fabs(right.dist(map[i], map[j]) - left.dist(i, j)));
    double cover = 0.0;
    for (std::size_t j = 0; j < right.size(); ++j) {
        double best = kInf;
        for (std::size_t i = 0; i < left.size(); ++i)
            best = std::min(best, right.dist(map[i], j));
        cover = std::max(cover, best);
    }
    return std::max({dist_full, cover, 1e-15});
}

std::vector<std::size_t> radial_greedy_map(const PointedSpace& left,
                                           const PointedSpace& right) {
    std::vector<std::size_t> map(left.size());
    map[left.base()] = right.base();
    for (std::size_t i = 0; i < left.size(); ++i) {
        if (i == left.base()) continue;
        double ri = left.dist(left.base(), i);
        std::size_t best = right.base();
        double bd = kInf;
        for (std::size_t j = 0; j < right.size(); ++j) {
            double d = std::fabs(right.dist(right.base(), j) - ri);
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        map[i] = best;
    }
    return map;
}

void improve_map(const PointedSpace& left, const PointedSpace& right,
                 std::vector<std::size_t>& map, int rounds) {
    double cur = coarse_level(left, right, map);
    for (int r = 0; r < rounds; ++r) {
        bool any = false;
        for (std::size_t i = 0; i < left.size(); ++i) {
            if (i == left.base()) continue;
            std::size_t keep = map[i];
            for (std::size_t j = 0; j < right.size(); ++j) {
                if (j == keep) continue;
                map[i] = j;
                double lvl = coarse_level(left, right, map);
                if (lvl < cur - 1e-12) {
                    cur = lvl;
                    keep = j;
                    any = true;
                } else {
                    map[i] = keep;
                }
            }
            map[i] = keep;
        }
        if (!any) break;
    }
}

MeasuredSpace with_zero_weight(const PointedSpace& s) {
    return MeasuredSpace{s, std::vector<double>(s.size(), 0.0)};
}

// Direct overlay through the shared coordinate frame: both spaces embed
// into the ambient normed space with their basepoints anchored at the
// origin, which is a valid common host by construction.
Coupling ambient_coupling(const MeasuredSpace& left, const MeasuredSpace& right) {
    std::size_t nl = left.size(), nr = right.size();
    std::size_t dim = std::max(left.space.ambient_dim(), right.space.ambient_dim());
    const auto& lb = left.space.coords()[left.base()];
    const auto& rb = right.space.coords()[right.base()];
    Coupling c;
    std::size_t n = nl + nr - 1;
    std::vector<std::vector<double>> coords(n, std::vector<double>(dim, 0.0));
    c.left_pos.assign(nl, 0);
    c.right_pos.assign(nr, 0);
    std::size_t pos = 1;
    for (std::size_t i = 0; i < nl; ++i) {
        if (i == left.base()) continue;
        c.left_pos[i] = pos;
        for (std::size_t k = 0; k < lb.size(); ++k)
            coords[pos][k] = left.space.coords()[i][k] - lb[k];
        ++pos;
    }
    for (std::size_t j = 0; j < nr; ++j) {
        if (j == right.base()) continue;
        c.right_pos[j] = pos;
        for (std::size_t k = 0; k < rb.size(); ++k)
            coords[pos][k] = right.space.coords()[j][k] - rb[k];
        ++pos;
    }
    c.glued = PointedSpace::from_points(std::move(coords), left.space.norm(), 0);
    c.left_weight.assign(n, 0.0);
    c.right_weight.assign(n, 0.0);
    for (std::size_t i = 0; i < nl; ++i) c.left_weight[c.left_pos[i]] += left.weight[i];
    for (std::size_t j = 0; j < nr; ++j) c.right_weight[c.right_pos[j]] += right.weight[j];
    return c;
}

Coupling mirror(const Coupling& c) {
    Coupling out = c;
    std::swap(out.left_pos, out.right_pos);
    std::swap(out.left_weight, out.right_weight);
    return out;
}

struct CandidateCouplings {
    std::vector<Coupling> all;
    double best_eps = kInf;
    bool exceeded = false;
};

CandidateCouplings build_couplings(const MeasuredSpace& left, const MeasuredSpace& right,
                                   const SearchBudget& budget) {
    CandidateCouplings out;
    std::size_t nl = left.size(), nr = right.size();
    bool small = std::max(nl, nr) <= budget.exact_small_max;
    auto add_from_map = [&](const MeasuredSpace& a, const MeasuredSpace& b,
                            std::vector<std::size_t> map, double level, bool mirrored) {
        EpsIsometry iso;
        iso.eps = level;
        iso.map = std::move(map);
        iso.provenance = Provenance::searched;
        Coupling c = coupling_from_eps_isometry(a, b, iso);
        out.all.push_back(mirrored ? mirror(c) : c);
    };

    if (small) {
        auto complete_map = [](const PointedSpace& a, const PointedSpace& b,
                               std::vector<std::size_t>& map) {
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (map[i] != EpsIsometry::unmapped) continue;
                double ri = a.dist(a.base(), i), bd = kInf;
                std::size_t best = b.base();
                for (std::size_t j = 0; j < b.size(); ++j) {
                    double d = std::fabs(b.dist(b.base(), j) - ri);
                    if (d < bd) {
                        bd = d;
                        best = j;
                    }
                }
                map[i] = best;
            }
        };
        ExactSearch fwd{left.space, right.space, budget.node_cap};
        std::vector<std::size_t> map;
        auto rf = fwd.minimal(&map);
        out.exceeded = fwd.exceeded;
        if (rf.found) {
            out.best_eps = rf.inf;
            complete_map(left.space, right.space, map);
            add_from_map(left, right, map, coarse_level(left.space, right.space, map),
                         false);
        }
        ExactSearch rev{right.space, left.space, budget.node_cap};
        std::vector<std::size_t> rmap;
        auto rr = rev.minimal(&rmap);
        out.exceeded = out.exceeded || rev.exceeded;
        if (rr.found) {
            out.best_eps = std::min(out.best_eps, rr.inf);
            complete_map(right.space, left.space, rmap);
            add_from_map(right, left, rmap, coarse_level(right.space, left.space, rmap),
                         true);
        }
    }
    {
        auto map = radial_greedy_map(left.space, right.space);
        if (nl * nr <= 2500)
            improve_map(left.space, right.space, map, budget.improve_rounds);
        add_from_map(left, right, map, coarse_level(left.space, right.space, map), false);
        auto rmap = radial_greedy_map(right.space, left.space);
        if (nl * nr <= 2500)
            improve_map(right.space, left.space, rmap, budget.improve_rounds);
        add_from_map(right, left, rmap, coarse_level(right.space, left.space, rmap), true);
    }
    // basepoint-anchored coordinate matching on the shared leading axes
    if (left.space.has_coords() && right.space.has_coords()) {
        std::size_t dim =
            std::min(left.space.ambient_dim(), right.space.ambient_dim());
        auto coord_map = [&](const MeasuredSpace& a, const MeasuredSpace& b) {
            const auto& abase = a.space.coords()[a.base()];
            const auto& bbase = b.space.coords()[b.base()];
            std::vector<std::size_t> map(a.size(), b.base());
            for (std::size_t i = 0; i < a.size(); ++i) {
                double bd = kInf;
                for (std::size_t j = 0; j < b.size(); ++j) {
                    double d = 0.0;
                    for (std::size_t k = 0; k < dim; ++k)
                        d = std::max(d, std::fabs((a.space.coords()[i][k] - abase[k]) -
                                                  (b.space.coords()[j][k] - bbase[k])));
                    if (d < bd) {
                        bd = d;
                        map[i] = j;
                    }
                }
            }
            map[a.base()] = b.base();
            return map;
        };
        auto map = coord_map(left, right);
        add_from_map(left, right, map, coarse_level(left.space, right.space, map), false);
        auto rmap = coord_map(right, left);
        add_from_map(right, left, rmap, coarse_level(right.space, left.space, rmap), true);
        if (left.space.norm() == right.space.norm())
            out.all.push_back(ambient_coupling(left, right));
    }
    return out;
}

}  // namespace

double radial_hausdorff_lower(const PointedSpace& left, const PointedSpace& right) {
    std::set<double> vals{0.0};
    for (std::size_t i = 0; i < left.size(); ++i) vals.insert(left.dist(left.base(), i));
    for (std::size_t j = 0; j < right.size(); ++j) vals.insert(right.dist(right.base(), j));
    std::vector<double> rs(vals.begin(), vals.end());
    std::size_t n = rs.size();
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] = std::fabs(rs[i] - rs[j]);
    PointedSpace line = PointedSpace::from_matrix(n, 0, std::move(m));
    auto pos_of = [&](double v) {
        return static_cast<std::size_t>(
            std::lower_bound(rs.begin(), rs.end(), v - kTightTol) - rs.begin());
    };
    std::set<std::size_t> ls{0}, rsset{0};
    for (std::size_t i = 0; i < left.size(); ++i) ls.insert(pos_of(left.dist(left.base(), i)));
    for (std::size_t j = 0; j < right.size(); ++j)
        rsset.insert(pos_of(right.dist(right.base(), j)));
    SubsetPair sp{line, {ls.begin(), ls.end()}, {rsset.begin(), rsset.end()}};
    return local_hausdorff(sp).value;
}

MeasuredSpace subspace_measured(const MeasuredSpace& host, const std::vector<std::size_t>& idx,
                                std::optional<std::size_t> base_of) {
    MeasuredSpace out;
    out.space = extract_subspace(host.space, idx, base_of);
    out.weight.reserve(idx.size());
    for (std::size_t i : idx) out.weight.push_back(host.weight[i]);
    return out;
}

DistanceEstimate estimate_dpgh(const PointedSpace& left, const PointedSpace& right,
                               const SearchBudget& budget) {
    auto cc = build_couplings(with_zero_weight(left), with_zero_weight(right), budget);
    DistanceEstimate est;
    bool small = std::max(left.size(), right.size()) <= budget.exact_small_max;
    est.method = small ? (cc.exceeded ? EstimateMethod::branch_bound
                                      : EstimateMethod::exact_small)
                       : EstimateMethod::local_search;
    est.lower = radial_hausdorff_lower(left, right);
    if (small && !cc.exceeded && cc.best_eps < kInf) {
        est.best_eps = cc.best_eps;
        est.lower = std::max(est.lower,
                             std::max(0.0, std::min(0.5, cc.best_eps / 2.0) - 1e-9));
    }
    est.upper = 0.5;
    for (const auto& c : cc.all) {
        double h = c.hausdorff_value();
        if (!est.witness_upper || h < est.upper) {
            est.upper = std::min(h, 0.5);
            est.witness_upper = c;
        }
    }
    est.upper = std::max(est.upper, est.lower);  // guard against rounding inversion
    return est;
}

DistanceEstimate estimate_dpmgh(const MeasuredSpace& left, const MeasuredSpace& right,
                                const SearchBudget& budget) {
    auto cc = build_couplings(left, right, budget);
    DistanceEstimate est;
    est.method = std::max(left.size(), right.size()) <= budget.exact_small_max
                     ? (cc.exceeded ? EstimateMethod::branch_bound
                                    : EstimateMethod::exact_small)
                     : EstimateMethod::local_search;
    est.lower = std::max(radial_hausdorff_lower(left.space, right.space),
                         radial_lower_bound(left, right));
    est.upper = 1.0;  // H + F is bounded by 1/2 + 1/2
    for (const auto& c : cc.all) {
        double v = c.hausdorff_value() + c.flat_value();
        if (!est.witness_upper || v < est.upper) {
            est.upper = std::min(v, 1.0);
            est.witness_upper = c;
        }
    }
    est.upper = std::max(est.upper, est.lower);
    return est;
}

DistanceEstimate estimate_dstar(const MeasuredSpace& left, const MeasuredSpace& right,
                                const SearchBudget& budget) {
    auto cc = build_couplings(left, right, budget);
    DistanceEstimate est;
    est.method = EstimateMethod::local_search;
    est.lower = radial_lower_bound(left, right);
    est.upper = 0.5;
    for (const auto& c : cc.all) {
        double v = c.flat_value();
        if (!est.witness_upper || v < est.upper) {
            est.upper = std::min(v, 0.5);
            est.witness_upper = c;
        }
    }
    est.upper = std::max(est.upper, est.lower);
    return est;
}

LargeSubsetPair extract_large_subsets(const Coupling& c, double r, double eps,
                                      double delta) {
    if (r - eps <= 0.0)
        throw DomainError("subset extraction needs r > eps (window would collapse)");
    const PointedSpace& Z = c.glued;
    const std::size_t z = 0;
    auto support_in_ball = [&](const std::vector<double>& w) {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < Z.size(); ++i)
            if (w[i] > 0.0 && Z.dist(z, i) <= r) s.push_back(i);
        return s;
    };
    std::vector<std::size_t> kp_mu = support_in_ball(c.left_weight);
    std::vector<std::size_t> kp_nu = support_in_ball(c.right_weight);

    auto dist_to = [&](std::size_t i, const std::vector<std::size_t>& S) {
        double d = kInf;
        for (std::size_t s2 : S) d = std::min(d, Z.dist(i, s2));
        return d;
    };
    auto carve = [&](const std::vector<std::size_t>& kp,
                     const std::vector<std::size_t>& other,
                     std::vector<std::size_t>& tilde) {
        std::vector<std::size_t> kept;
        for (std::size_t i : kp) {
            bool inner = Z.dist(z, i) < r - eps;  // open window, as constructed
            bool near_other = dist_to(i, other) <= eps;
            if (inner && !near_other)
                tilde.push_back(i);
            else
                kept.push_back(i);
        }
        return kept;
    };
    LargeSubsetPair out;
    std::vector<std::size_t> tilde_mu, tilde_nu;
    out.k_mu = carve(kp_mu, kp_nu, tilde_mu);
    out.k_nu = carve(kp_nu, kp_mu, tilde_nu);

    auto mass_of = [&](const std::vector<std::size_t>& s, const std::vector<double>& w) {
        double m = 0.0;
        for (std::size_t i : s) m += w[i];
        return m;
    };
    out.mass_defect_mu = mass_of(tilde_mu, c.left_weight);
    out.mass_defect_nu = mass_of(tilde_nu, c.right_weight);

    FlatProblem fp{Z, c.left_weight, c.right_weight, 1.0 / eps, r};
    FlatSolution fs = flat_lr(fp, /*want_witness=*/false);
    out.defect_bound = (1.0 + delta) * fs.value;

    // the explicit bump that realizes the mu-side carve as a test function
    if (!tilde_mu.empty()) {
        double integral_mu = 0.0, integral_nu = 0.0, tilde_mass = 0.0;
        for (std::size_t i = 0; i < Z.size(); ++i) {
            double g = std::max(0.0, 1.0 - dist_to(i, tilde_mu) / eps);
            integral_mu += g * c.left_weight[i];
            integral_nu += g * c.right_weight[i];
        }
        for (std::size_t i : tilde_mu) tilde_mass += c.left_weight[i];
        if (tilde_mass > integral_mu + kTol)
            throw SolverError("bump function fails to dominate the carved mass");
        if (integral_mu - integral_nu > fs.value + kTol)
            throw SolverError("bump function exceeds the flat optimum");
    }

    out.hausdorff_bound = std::max(1.0 / (r - eps), eps);
    if (!out.k_mu.empty() && !out.k_nu.empty()) {
        out.hausdorff_between = local_hausdorff({Z, out.k_mu, out.k_nu}).value;
        std::vector<double> mu_k(Z.size(), 0.0), nu_k(Z.size(), 0.0);
        for (std::size_t i : out.k_mu) mu_k[i] = c.left_weight[i];
        for (std::size_t i : out.k_nu) nu_k[i] = c.right_weight[i];
        out.pmgh_between.lower = 0.0;
        out.pmgh_between.upper = out.hausdorff_between + flat(Z, mu_k, nu_k);
        out.pmgh_between.method = EstimateMethod::local_search;
    } else {
        out.hausdorff_between = 0.5;
        out.pmgh_between.lower = 0.0;
        out.pmgh_between.upper = 1.0;
    }
    return out;
}

SandwichReport dstar_sandwich(const MeasuredSpace& left, const MeasuredSpace& right,
                              double eps, const SearchBudget& budget) {
    SandwichReport rep;
    rep.eps = eps;
    auto est = estimate_dstar(left, right, budget);
    if (!est.witness_upper) return rep;
    Coupling c = *est.witness_upper;
    rep.coupling_flat = c.flat_value();
    if (!(rep.coupling_flat < eps)) return rep;  // inconclusive: no witness below eps
    rep.conclusive = true;

    double r = 1.0 / eps;
    // delta chosen so the defect bound stays under eps even when the
    // coupling value is close to it
    double delta = std::min(1e-3, 0.5 * (eps - rep.coupling_flat) /
                                     std::max(rep.coupling_flat, 1e-12));
    rep.subsets = extract_large_subsets(c, r, eps, delta);
    // the equivalence keeps the basepoint inside both subsets
    auto ensure_base = [](std::vector<std::size_t>& v) {
        if (std::find(v.begin(), v.end(), std::size_t{0}) == v.end())
            v.insert(v.begin(), 0);
    };
    ensure_base(rep.subsets.k_mu);
    ensure_base(rep.subsets.k_nu);

    const PointedSpace& Z = c.glued;
    auto ball_mass_outside = [&](const std::vector<double>& w,
                                 const std::vector<std::size_t>& K) {
        std::vector<char> in(Z.size(), 0);
        for (std::size_t i : K) in[i] = 1;
        double m = 0.0;
        for (std::size_t i = 0; i < Z.size(); ++i)
            if (!in[i] && Z.dist(0, i) <= r) m += w[i];
        return m;
    };
    rep.defect_mu = ball_mass_outside(c.left_weight, rep.subsets.k_mu);
    rep.defect_nu = ball_mass_outside(c.right_weight, rep.subsets.k_nu);

    std::vector<double> mu_k(Z.size(), 0.0), nu_k(Z.size(), 0.0);
    for (std::size_t i : rep.subsets.k_mu) mu_k[i] = c.left_weight[i];
    for (std::size_t i : rep.subsets.k_nu) nu_k[i] = c.right_weight[i];
    rep.hausdorff_between = local_hausdorff({Z, rep.subsets.k_mu, rep.subsets.k_nu}).value;
    rep.restricted_flat_lr =
        flat_lr({Z, mu_k, nu_k, 1.0 / eps, 1.0 / eps}, false).value;
    rep.restricted_flat = flat(Z, mu_k, nu_k);
    rep.pmgh_level = std::max(rep.hausdorff_between, rep.restricted_flat);
    rep.pmgh_sum_upper = rep.hausdorff_between + rep.restricted_flat;
    rep.forward_pass = rep.defect_mu < eps + kTol && rep.defect_nu < eps + kTol &&
                       rep.restricted_flat_lr < 3.0 * eps + kTol &&
                       rep.pmgh_level < 3.0 * eps + kTol;

    // converse: restriction legs in each factor's own host plus the middle
    std::vector<double> left_k(left.size(), 0.0), right_k(right.size(), 0.0);
    for (std::size_t i = 0; i < left.size(); ++i) {
        std::size_t p = c.left_pos[i];
        if (std::find(rep.subsets.k_mu.begin(), rep.subsets.k_mu.end(), p) !=
            rep.subsets.k_mu.end())
            left_k[i] = left.weight[i];
    }
    for (std::size_t j = 0; j < right.size(); ++j) {
        std::size_t p = c.right_pos[j];
        if (std::find(rep.subsets.k_nu.begin(), rep.subsets.k_nu.end(), p) !=
            rep.subsets.k_nu.end())
            right_k[j] = right.weight[j];
    }
    double leg1 = flat(left.space, left.weight, left_k);
    double leg3 = flat(right.space, right_k, right.weight);
    rep.dstar_triangle_upper = leg1 + rep.restricted_flat + leg3;
    rep.converse_pass = rep.restricted_flat < eps + kTol &&
                        rep.dstar_triangle_upper < 3.0 * eps + kTol;
    return rep;
}

DoublingBound doubling_subset_bound(const MeasuredSpace& s,
                                    const std::vector<std::size_t>& subset, double R,
                                    double delta, double k) {
    if (R <= 0.0 || delta <= 0.0 || k < 1.0)
        throw DomainError("doubling bound needs R > 0, delta > 0, k >= 1");
    DoublingBound out;
    double M = std::pow(2.0, k);

    // scan dyadic scales down to the atom separation
    double minpos = kInf;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            if (s.weight[i] <= 0 || s.weight[j] <= 0) continue;
            double d = s.space.dist(i, j);
            if (d > 0) minpos = std::min(minpos, d);
        }
    for (std::size_t w = 0; w < s.size(); ++w) {
        if (s.weight[w] <= 0 && w != s.base()) continue;
        for (double rr = R; rr >= minpos / 4 && rr > 1e-12; rr /= 2) {
            double m1 = s.ball_mass(w, rr), m2 = s.ball_mass(w, 2 * rr);
            if (m1 <= 0.0)
                throw DomainError("non-doubling: zero mass ball at point " +
                                  std::to_string(w) + " radius " + std::to_string(rr));
            out.max_ratio = std::max(out.max_ratio, m2 / m1);
            if (m2 > M * m1 + kTol)
                throw DomainError("non-doubling: ratio " + std::to_string(m2 / m1) +
                                  " at point " + std::to_string(w) + " radius " +
                                  std::to_string(rr));
        }
    }
    if (s.ball_mass(s.base(), R) + kTol < delta)
        throw DomainError("ball mass at radius R is below delta");

    MeasuredSpace restricted = restrict_measure(s, [&] {
        auto v = subset;
        if (std::find(v.begin(), v.end(), s.base()) == v.end()) v.push_back(s.base());
        return v;
    }());
    double eps = 0.0;
    {
        std::vector<char> in(s.size(), 0);
        for (std::size_t i : subset) in[i] = 1;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (!in[i] && s.space.dist(s.base(), i) <= 2 * R) eps += s.weight[i];
    }
    out.eps_measured = eps;
    if (eps == 0.0) {
        out.bound = 0.0;
        out.ref_bound_ok = true;
    } else {
        double core = 4.0 * R * std::pow(eps / delta, 1.0 / k);
        out.bound = core + eps;
        out.ref_bound_ok = R > 1.0 / core;
    }

    // identity-embedding upper for the pair (s, s restricted to the subset)
    std::set<std::size_t> xs, ss;
    xs.insert(s.base());
    ss.insert(s.base());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.weight[i] > 0) xs.insert(i);
        if (restricted.weight[i] > 0) ss.insert(i);
    }
    double h = local_hausdorff({s.space, {xs.begin(), xs.end()}, {ss.begin(), ss.end()}})
                   .value;
    double f = flat(s.space, s.weight, restricted.weight);
    out.identity_upper = h + f;
    return out;
}

}  // namespace mmg
