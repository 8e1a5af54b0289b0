#include "mmg/flat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace mmg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BallData {
    std::vector<std::size_t> active;       // host indices inside B(base, r)
    std::vector<double> box_hi, box_lo;    // per active index
    std::vector<double> c;                 // mu - nu per active index
};

BallData ball_data(const FlatProblem& p) {
    BallData b;
    std::size_t n = p.host.size();
    std::vector<char> in(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (p.host.dist(p.host.base(), i) <= p.r) {
            in[i] = 1;
            b.active.push_back(i);
        }
    for (std::size_t i : b.active) {
        double e = kInf;
        for (std::size_t k = 0; k < n; ++k)
            if (!in[k]) e = std::min(e, p.host.dist(i, k));
        double cap = e == kInf ? 1.0 : std::min(1.0, p.L * e);
        b.box_hi.push_back(cap);
        b.box_lo.push_back(-cap);
        b.c.push_back(p.mu[i] - p.nu[i]);
    }
    return b;
}

// Balanced transportation problem solved by successive shortest paths
// with node potentials (all costs are nonnegative, so plain Dijkstra).
struct Transport {
    std::size_t R = 0, C = 0;
    std::vector<double> cost;    // R x C
    std::vector<double> supply, demand;
    std::vector<double> flow;    // R x C
    double total_cost = 0.0;

    void solve() {
        flow.assign(R * C, 0.0);
        std::vector<double> pot(R + C, 0.0);
        std::vector<double> a = supply, b = demand;
        double remaining = 0.0;
        for (double v : a) remaining += v;
        const double scale = std::max(1.0, remaining);

        std::vector<double> dist(R + C);
        std::vector<int> parent(R + C);  // for cols: row used; for rows: col used (-1 = source)
        std::vector<char> done(R + C);

        while (remaining > 1e-14 * scale) {
            std::fill(dist.begin(), dist.end(), kInf);
            std::fill(parent.begin(), parent.end(), -2);
            std::fill(done.begin(), done.end(), 0);
            for (std::size_t r = 0; r < R; ++r)
                if (a[r] > 1e-14 * scale) {
                    dist[r] = 0.0;
                    parent[r] = -1;
                }
            std::size_t target = static_cast<std::size_t>(-1);
            while (true) {
                // dense Dijkstra step
                std::size_t u = static_cast<std::size_t>(-1);
                double best = kInf;
                for (std::size_t v = 0; v < R + C; ++v)
                    if (!done[v] && dist[v] < best) {
                        best = dist[v];
                        u = v;
                    }
                if (u == static_cast<std::size_t>(-1)) break;
                done[u] = 1;
                if (u >= R && b[u - R] > 1e-14 * scale) {
                    target = u - R;
                    break;
                }
                if (u < R) {
                    for (std::size_t c2 = 0; c2 < C; ++c2) {
                        double rc = cost[u * C + c2] + pot[u] - pot[R + c2];
                        if (rc < 0) rc = 0;  // clip float noise
                        if (dist[u] + rc < dist[R + c2] - 1e-18) {
                            dist[R + c2] = dist[u] + rc;
                            parent[R + c2] = static_cast<int>(u);
                        }
                    }
                } else {
                    std::size_t c2 = u - R;
                    for (std::size_t r2 = 0; r2 < R; ++r2)
                        if (flow[r2 * C + c2] > 1e-15 * scale) {
                            double rc = -cost[r2 * C + c2] + pot[R + c2] - pot[r2];
                            if (rc < 0) rc = 0;
                            if (dist[u] + rc < dist[r2] - 1e-18) {
                                dist[r2] = dist[u] + rc;
                                parent[r2] = static_cast<int>(R + c2);
                            }
                        }
                }
            }
            if (target == static_cast<std::size_t>(-1))
                throw SolverError("transportation: no augmenting path (remaining " +
                                  std::to_string(remaining) + ")");
            double limit = dist[R + target];
            for (std::size_t v = 0; v < R + C; ++v)
                pot[v] += std::min(dist[v], limit);

            // bottleneck along the parent chain
            double push = b[target];
            {
                std::size_t v = R + target;
                while (true) {
                    int pv = parent[v];
                    if (v >= R) {
                        std::size_t r2 = static_cast<std::size_t>(pv);
                        int pr = parent[r2];
                        if (pr == -1) {
                            push = std::min(push, a[r2]);
                            break;
                        }
                        v = r2;
                    } else {
                        std::size_t c2 = static_cast<std::size_t>(pv) - R;
                        push = std::min(push, flow[v * C + c2]);
                        v = R + c2;
                    }
                }
            }
            // apply
            {
                std::size_t v = R + target;
                while (true) {
                    std::size_t r2 = static_cast<std::size_t>(parent[v]);
                    flow[r2 * C + (v - R)] += push;
                    int pr = parent[r2];
                    if (pr == -1) {
                        a[r2] -= push;
                        break;
                    }
                    std::size_t c2 = static_cast<std::size_t>(pr) - R;
                    flow[r2 * C + c2] -= push;
                    v = R + c2;
                }
                b[target] -= push;
                remaining -= push;
            }
        }
        total_cost = 0.0;
        for (std::size_t i = 0; i < R * C; ++i) total_cost += flow[i] * cost[i];
    }
};

// Feasible solution of a difference-constraint system by Bellman-Ford.
// Edge (from, to, w) encodes g[to] - g[from] <= w; node `root` is pinned
// to zero via its index.
struct DiffEdge {
    std::size_t from, to;
    double w;
};

std::vector<double> solve_difference_system(std::size_t n, std::size_t root,
                                            const std::vector<DiffEdge>& edges) {
    std::vector<double> d(n, kInf);
    d[root] = 0.0;
    for (std::size_t round = 0; round <= n; ++round) {
        bool changed = false;
        for (const auto& e : edges) {
            if (d[e.from] == kInf) continue;
            double cand = d[e.from] + e.w;
            if (cand < d[e.to] - 1e-15) {
                d[e.to] = cand;
                changed = true;
            }
        }
        if (!changed) return d;
    }
    throw SolverError("difference system did not stabilize (witness recovery)");
}

}  // namespace

std::vector<std::string> FlatProblem::validate() const {
    std::vector<std::string> bad;
    if (L <= 0.0) bad.push_back("L must be positive");
    if (r <= 0.0) bad.push_back("r must be positive");
    if (mu.size() != host.size() || nu.size() != host.size())
        bad.push_back("measure length mismatch");
    for (double w : mu)
        if (w < 0) bad.push_back("negative mu atom");
    for (double w : nu)
        if (w < 0) bad.push_back("negative nu atom");
    return bad;
}

FlatSolution flat_lr(const FlatProblem& p, bool want_witness) {
    auto bad = p.validate();
    if (!bad.empty()) throw DomainError("flat problem invalid: " + bad.front());

    BallData b = ball_data(p);
    FlatSolution sol;
    sol.active = b.active;
    std::size_t m = b.active.size();

    std::vector<std::size_t> src, snk;  // positions into b.active
    double supply_sum = 0.0, demand_sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (b.c[k] > 0.0) {
            src.push_back(k);
            supply_sum += b.c[k];
        } else if (b.c[k] < 0.0) {
            snk.push_back(k);
            demand_sum += -b.c[k];
        }
    }

    Transport t;
    t.R = src.size() + 1;
    t.C = snk.size() + 1;
    t.cost.assign(t.R * t.C, 0.0);
    for (std::size_t a = 0; a < src.size(); ++a) {
        for (std::size_t c2 = 0; c2 < snk.size(); ++c2)
            t.cost[a * t.C + c2] =
                p.L * p.host.dist(b.active[src[a]], b.active[snk[c2]]);
        t.cost[a * t.C + snk.size()] = b.box_hi[src[a]];  // surplus destroyed at a
    }
    for (std::size_t c2 = 0; c2 < snk.size(); ++c2)
        t.cost[src.size() * t.C + c2] = -b.box_lo[snk[c2]];  // deficit created at c2
    t.supply.assign(t.R, 0.0);
    t.demand.assign(t.C, 0.0);
    for (std::size_t a = 0; a < src.size(); ++a) t.supply[a] = b.c[src[a]];
    t.supply[src.size()] = demand_sum;
    for (std::size_t c2 = 0; c2 < snk.size(); ++c2) t.demand[c2] = -b.c[snk[c2]];
    t.demand[snk.size()] = supply_sum;
    t.solve();
    sol.value = t.total_cost;

    if (!want_witness) return sol;

    // Witness by complementary slackness: flow-carrying arcs become tight
    // difference constraints, everything else keeps its inequality.
    std::vector<std::size_t> keypos;  // positions with c != 0
    keypos.reserve(src.size() + snk.size());
    for (std::size_t k : src) keypos.push_back(k);
    for (std::size_t k : snk) keypos.push_back(k);
    std::size_t nk = keypos.size();
    std::size_t root = nk;
    std::vector<DiffEdge> edges;
    auto host_of = [&](std::size_t q) { return b.active[keypos[q]]; };
    for (std::size_t a2 = 0; a2 < nk; ++a2)
        for (std::size_t b2 = 0; b2 < nk; ++b2)
            if (a2 != b2)
                edges.push_back({b2, a2, p.L * p.host.dist(host_of(a2), host_of(b2))});
    for (std::size_t a2 = 0; a2 < nk; ++a2) {
        edges.push_back({root, a2, b.box_hi[keypos[a2]]});
        edges.push_back({a2, root, -b.box_lo[keypos[a2]]});
    }
    const double slack = 1e-12;
    for (std::size_t a = 0; a < src.size(); ++a) {
        for (std::size_t c2 = 0; c2 < snk.size(); ++c2)
            if (t.flow[a * t.C + c2] > 1e-13) {
                double w = t.cost[a * t.C + c2];
                edges.push_back({a, src.size() + c2, -w + slack * (1.0 + w)});
            }
        if (t.flow[a * t.C + snk.size()] > 1e-13)
            edges.push_back({a, root, -b.box_hi[src[a]] + slack});
    }
    for (std::size_t c2 = 0; c2 < snk.size(); ++c2)
        if (t.flow[src.size() * t.C + c2] > 1e-13)
            edges.push_back({root, src.size() + c2, b.box_lo[snk[c2]] + slack});

    std::vector<double> g_key = solve_difference_system(nk + 1, root, edges);
    double shift = g_key[root];  // should be ~0; re-pin if float noise moved it
    for (std::size_t q = 0; q < nk; ++q) g_key[q] -= shift;

    sol.witness.assign(p.host.size(), 0.0);
    std::vector<char> is_key(m, 0);
    for (std::size_t q = 0; q < nk; ++q) {
        sol.witness[host_of(q)] = g_key[q];
        is_key[keypos[q]] = 1;
    }
    // Upper extension to neutral atoms in the ball, clamped by the
    // box/support envelopes (median keeps the Lipschitz constant).
    for (std::size_t k = 0; k < m; ++k) {
        if (is_key[k]) continue;
        double env = nk == 0 ? 0.0 : kInf;
        for (std::size_t q = 0; q < nk; ++q)
            env = std::min(env, g_key[q] + p.L * p.host.dist(b.active[k], host_of(q)));
        double lo = b.box_lo[k], hi = b.box_hi[k];
        sol.witness[b.active[k]] = std::max(lo, std::min(env, hi));
    }

    double primal = 0.0;
    for (std::size_t i = 0; i < p.host.size(); ++i)
        primal += sol.witness[i] * (p.mu[i] - p.nu[i]);
    double gap = std::fabs(primal - sol.value);
    if (gap > 1e-8 * std::max(1.0, std::fabs(sol.value)))
        throw SolverError("flat solver duality gap " + std::to_string(gap));
    sol.value = primal;  // report the certified primal value
    return sol;
}

std::vector<std::string> verify_flat_solution(const FlatProblem& p, const FlatSolution& s) {
    std::vector<std::string> bad;
    const double tol = s.feas_tol;
    std::size_t n = p.host.size();
    if (s.witness.size() != n) {
        bad.push_back("witness length mismatch");
        return bad;
    }
    std::vector<char> in(n, 0);
    for (std::size_t i : s.active) in[i] = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::fabs(s.witness[i]) > 1.0 + tol)
            bad.push_back("box violation at " + std::to_string(i));
        if (!in[i] && std::fabs(s.witness[i]) > tol)
            bad.push_back("support violation at " + std::to_string(i));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(s.witness[i] - s.witness[j]) > p.L * p.host.dist(i, j) + tol)
                bad.push_back("Lipschitz violation (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
    double primal = 0.0;
    for (std::size_t i = 0; i < n; ++i) primal += s.witness[i] * (p.mu[i] - p.nu[i]);
    if (std::fabs(primal - s.value) > tol * std::max(1.0, std::fabs(s.value)))
        bad.push_back("objective mismatch");
    return bad;
}

namespace {

double flat_infimum(const PointedSpace& host, const std::vector<double>& mu,
                    const std::vector<double>& nu, double fixed_L, bool scale_L,
                    double tol) {
    auto pred = [&](double eps) {
        FlatProblem p{host, mu, nu, scale_L ? 1.0 / eps : fixed_L, 1.0 / eps};
        return flat_lr(p, /*want_witness=*/false).value < eps;
    };
    const double hi0 = 0.5 - 1e-9;
    if (!pred(hi0)) return 0.5;
    double lo = 0.0, hi = hi0;
    for (int it = 0; it < 60 && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= 0.0) break;
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace

double flat_L(const PointedSpace& host, const std::vector<double>& mu,
              const std::vector<double>& nu, double L, double tol) {
    if (L <= 0.0) throw DomainError("L must be positive");
    return flat_infimum(host, mu, nu, L, /*scale_L=*/false, tol);
}

double flat(const PointedSpace& host, const std::vector<double>& mu,
            const std::vector<double>& nu, double tol) {
    return flat_infimum(host, mu, nu, 0.0, /*scale_L=*/true, tol);
}

RadialPair radial_projection(const MeasuredSpace& left, const MeasuredSpace& right) {
    std::map<double, std::pair<double, double>> radii;  // radius -> (mu, nu)
    radii[0.0];
    auto add = [&](const MeasuredSpace& s, bool is_left) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s.weight[i] == 0.0) continue;
            double r = s.space.dist(s.base(), i);
            auto it = radii.lower_bound(r - kTightTol);
            if (it == radii.end() || it->first > r + kTightTol)
                it = radii.emplace(r, std::make_pair(0.0, 0.0)).first;
            (is_left ? it->second.first : it->second.second) += s.weight[i];
        }
    };
    add(left, true);
    add(right, false);

    RadialPair out;
    std::size_t n = radii.size();
    std::vector<double> rs;
    rs.reserve(n);
    for (const auto& kv : radii) {
        rs.push_back(kv.first);
        out.mu.push_back(kv.second.first);
        out.nu.push_back(kv.second.second);
    }
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] = std::fabs(rs[i] - rs[j]);
    out.host = PointedSpace::from_matrix(n, 0, std::move(m));
    return out;
}

double radial_lower_bound(const MeasuredSpace& left, const MeasuredSpace& right,
                          double tol) {
    RadialPair rp = radial_projection(left, right);
    // largest eps whose whole lower range satisfies F(1/e,1/e) >= e
    auto fails = [&](double eps) {
        FlatProblem p{rp.host, rp.mu, rp.nu, 1.0 / eps, 1.0 / eps};
        return flat_lr(p, false).value < eps;
    };
    double lo = 0.0, hi = 0.5 - 1e-9;
    if (fails(hi) == false) return 0.5;  // even at 1/2 the projected value is large
    // find the first level where the predicate starts to hold
    for (int it = 0; it < 60 && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= 0.0) break;
        if (fails(mid))
            hi = mid;
        else
            lo = mid;
    }
    return std::max(0.0, lo - tol);
}

}  // namespace mmg
