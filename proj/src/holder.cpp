#include "mmg/holder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint32_t kUnset = 0xffffffffu;
}  // namespace

// ---------------------------------------------------------------------------
// constants

std::vector<std::string> Constants::validate() const {
    std::vector<std::string> bad;
    if (!(K >= 1.0)) bad.push_back("K must be at least 1");
    if (!(gamma > 0.0 && gamma < 1.0)) bad.push_back("gamma must lie in (0,1)");
    if (!(eta > 0.0)) bad.push_back("eta must be positive");
    double need = double(n) * std::log2(5.0 * K * K);
    if (need > double(N) * (1.0 - gamma) + 1e-9)
        bad.push_back("refinement exponent too small for gamma");
    if (std::fabs(need - double(N) * (1.0 - alpha)) > 1e-9)
        bad.push_back("alpha does not solve the defining identity");
    if (!(alpha + 1e-12 >= gamma && alpha < 1.0))
        bad.push_back("alpha must lie in [gamma, 1)");
    if (std::fabs(sigma * l - std::pow(l, alpha)) > 1e-12 * std::max(1.0, sigma * l))
        bad.push_back("sigma * l must equal l^alpha");
    // budget inequality above the blanket offset, in logs to avoid overflow
    double log2sigma = std::log2(sigma);
    for (int i = M_paper; i <= M_paper + 48; ++i) {
        double lhs = double(i) * log2sigma;
        double rhs = double(N) * double(i) - 1.0 - log2sigma;
        if (lhs >= rhs)
            bad.push_back("budget inequality fails at level " + std::to_string(i));
    }
    return bad;
}

Constants solve_constants(double K, double gamma, std::size_t n, double eta) {
    if (K < 1.0) throw DomainError("K must be at least 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
    if (n == 0) throw DomainError("dimension must be positive");
    if (eta <= 0.0) throw DomainError("eta must be positive");
    Constants c;
    c.K = K;
    c.gamma = gamma;
    c.eta = eta;
    c.n = n;
    c.sigma = std::pow(5.0 * K * K, double(n));
    double need = double(n) * std::log2(5.0 * K * K);  // N (1 - gamma) >= need
    int N = std::max(1, static_cast<int>(std::ceil(need / (1.0 - gamma) - 1e-12)));
    while (double(N) * (1.0 - gamma) + 1e-12 < need) ++N;
    c.N = N;
    c.alpha = 1.0 - need / double(N);
    c.l = std::pow(2.0, -double(N));
    c.M_paper = static_cast<int>(std::floor(2.0 / c.alpha)) + 1;
    return with_offset(c, c.M_paper);
}

Constants with_offset(Constants c, int M) {
    if (M < 1) throw DomainError("offset must be at least 1");
    c.M = M;
    c.m_grid = c.N * M;
    c.lambda = std::pow(50.0 * std::pow(c.sigma, double(M)) * std::pow(c.l, -c.alpha),
                        double(c.n)) /
               c.eta;
    auto bad = c.validate();
    if (!bad.empty()) throw DomainError("constants invalid: " + bad.front());
    return c;
}

bool level_budget_ok(const Constants& c, double L, int level) {
    if (L <= 0.0) return true;
    double lhs = std::log2(L) + double(level - c.M) * std::log2(c.sigma);
    double rhs = double(c.N) * double(level) - 1.0 - std::log2(c.sigma);
    return lhs < rhs;
}

// ---------------------------------------------------------------------------
// cube complex

CubeComplex::CubeComplex(std::size_t n, int N, int deepest_level)
    : n_(n), N_(N), deepest_(deepest_level) {
    if (n == 0 || n > 3) throw DomainError("cube complex supports dimensions 1..3");
    if (N < 1 || deepest_level < 1) throw DomainError("invalid complex parameters");
    long long bits = static_cast<long long>(N) * deepest_level;
    long long cap = n == 1 ? 60 : (n == 2 ? 24 : 20);
    if (bits > cap) throw DomainError("lattice too deep to address");
    side_ = 1LL << bits;
    unit_ = std::pow(2.0, -double(bits));
}

long long CubeComplex::step(int level) const {
    if (level < 0 || level > deepest_) throw DomainError("level out of range");
    return 1LL << (static_cast<long long>(N_) * (deepest_ - level));
}

std::size_t CubeComplex::lattice_count(int level) const {
    std::size_t per = (std::size_t{1} << (static_cast<std::size_t>(N_) * level)) + 1;
    std::size_t out = 1;
    for (std::size_t k = 0; k < n_; ++k) out *= per;
    return out;
}

std::vector<CubeComplex::Pt> CubeComplex::cube_bases(int level) const {
    long long st = step(level);
    long long count = side_ / st;
    std::vector<Pt> out;
    Pt cur(n_, 0);
    while (true) {
        out.push_back(cur);
        std::size_t k = 0;
        while (k < n_) {
            cur[k] += st;
            if (cur[k] / st < count) break;
            cur[k] = 0;
            ++k;
        }
        if (k == n_) break;
    }
    return out;
}

std::vector<CubeComplex::Pt> CubeComplex::corners(const Pt& base, int level) const {
    long long st = step(level);
    std::vector<Pt> out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n_); ++mask) {
        Pt p = base;
        for (std::size_t k = 0; k < n_; ++k)
            if (mask & (std::size_t{1} << k)) p[k] += st;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<CubeComplex::Pt> CubeComplex::children(const Pt& base, int level) const {
    long long st = step(level + 1);
    long long per = 1LL << N_;
    std::vector<Pt> out;
    Pt idx(n_, 0);
    while (true) {
        Pt p = base;
        for (std::size_t k = 0; k < n_; ++k) p[k] += idx[k] * st;
        out.push_back(std::move(p));
        std::size_t k = 0;
        while (k < n_ && ++idx[k] == per) idx[k++] = 0;
        if (k == n_) break;
    }
    return out;
}

std::vector<CubeComplex::Face> CubeComplex::faces(const Pt& base, int level,
                                                  std::size_t m) const {
    long long st = step(level);
    std::vector<Face> out;
    for (unsigned axes = 0; axes < (1u << n_); ++axes) {
        if (static_cast<std::size_t>(__builtin_popcount(axes)) != m) continue;
        std::vector<std::size_t> fixed;
        for (std::size_t k = 0; k < n_; ++k)
            if (!(axes & (1u << k))) fixed.push_back(k);
        for (std::size_t mask = 0; mask < (std::size_t{1} << fixed.size()); ++mask) {
            Face f;
            f.base = base;
            f.axes = axes;
            f.level = level;
            for (std::size_t t = 0; t < fixed.size(); ++t)
                if (mask & (std::size_t{1} << t)) f.base[fixed[t]] += st;
            out.push_back(std::move(f));
        }
    }
    return out;
}

std::vector<CubeComplex::Face> CubeComplex::boundary_faces(const Face& f) const {
    long long st = step(f.level);
    std::vector<Face> out;
    for (std::size_t k = 0; k < n_; ++k) {
        if (!(f.axes & (1u << k))) continue;
        Face lo = f, hi = f;
        lo.axes = f.axes & ~(1u << k);
        hi.axes = lo.axes;
        hi.base[k] += st;
        out.push_back(std::move(lo));
        out.push_back(std::move(hi));
    }
    return out;
}

std::vector<CubeComplex::Pt> CubeComplex::face_lattice(const Face& f, int sub_level) const {
    long long st = step(sub_level);
    long long extent = step(f.level);
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < n_; ++k)
        if (f.axes & (1u << k)) free.push_back(k);
    std::vector<Pt> out;
    if (free.empty()) {
        out.push_back(f.base);
        return out;
    }
    std::vector<long long> idx(free.size(), 0);
    long long per = extent / st + 1;
    while (true) {
        Pt p = f.base;
        for (std::size_t t = 0; t < free.size(); ++t) p[free[t]] += idx[t] * st;
        out.push_back(std::move(p));
        std::size_t k = 0;
        while (k < free.size() && ++idx[k] == per) idx[k++] = 0;
        if (k == free.size()) break;
    }
    return out;
}

std::vector<CubeComplex::Pt> CubeComplex::cube_lattice(const Pt& base, int level,
                                                       int sub_level) const {
    Face f;
    f.base = base;
    f.axes = static_cast<unsigned>((1u << n_) - 1);
    f.level = level;
    return face_lattice(f, sub_level);
}

long long CubeComplex::key(const Pt& p) const {
    int bits = n_ == 1 ? 61 : (n_ == 2 ? 25 : 21);
    long long k = 0;
    for (std::size_t i = 0; i < n_; ++i) k = (k << bits) | p[i];
    return k;
}

long long CubeComplex::face_key(const Face& f) const {
    return ((key(f.base) << 3) | f.axes) * 31 + f.level;
}

std::vector<double> CubeComplex::physical(const Pt& p) const {
    std::vector<double> out(n_);
    for (std::size_t k = 0; k < n_; ++k) out[k] = double(p[k]) * unit_;
    return out;
}

// ---------------------------------------------------------------------------
// McShane extension

std::vector<double> mcshane_extend(const PointedSpace& space,
                                   const std::vector<std::size_t>& domain,
                                   const std::vector<double>& f, double alpha, double H) {
    if (domain.empty()) throw DomainError("extension needs a nonempty domain");
    if (f.size() != domain.size()) throw DomainError("value count mismatch");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("exponent must lie in (0,1]");
    if (H < 0.0) throw DomainError("constant must be nonnegative");
    double lo = kInf, hi = -kInf;
    for (std::size_t a = 0; a < domain.size(); ++a) {
        lo = std::min(lo, f[a]);
        hi = std::max(hi, f[a]);
        for (std::size_t b = a + 1; b < domain.size(); ++b) {
            double gap = std::fabs(f[a] - f[b]);
            double allowed = H * std::pow(space.dist(domain[a], domain[b]), alpha);
            if (gap > allowed + 1e-9)
                throw DomainError("input is not Holder at the stated constant: pair (" +
                                  std::to_string(domain[a]) + "," +
                                  std::to_string(domain[b]) + ")");
        }
    }
    std::vector<double> out(space.size());
    for (std::size_t y = 0; y < space.size(); ++y) {
        double v = kInf;
        for (std::size_t a = 0; a < domain.size(); ++a)
            v = std::min(v, f[a] + H * std::pow(space.dist(domain[a], y), alpha));
        out[y] = std::max(lo, std::min(v, hi));
    }
    return out;
}

// ---------------------------------------------------------------------------
// pipeline internals

namespace {

double sup_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::fabs(a[k] - b[k]));
    return m;
}

struct AtomIndex {
    GridIndex grid;
    std::vector<std::size_t> ids;
    std::vector<std::vector<double>> coords;

    void build(const MeasuredSpace& X, const std::vector<std::size_t>& which, double cell) {
        ids = which;
        coords.clear();
        coords.reserve(which.size());
        for (std::size_t i : which) coords.push_back(X.space.coords()[i]);
        grid = GridIndex(coords, cell);
    }
    std::size_t nearest_atom(const std::vector<double>& q) const {
        std::size_t p = grid.nearest(q);
        return p == GridIndex::npos ? GridIndex::npos : ids[p];
    }
    std::size_t within_atom(const std::vector<double>& q, double r) const {
        auto cand = grid.within(q, r);
        std::size_t best = GridIndex::npos;
        double bd = kInf;
        for (std::size_t p : cand) {
            double d = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k)
                d = std::max(d, std::fabs(coords[p][k] - q[k]));
            if (d < bd - kTightTol ||
                (best != GridIndex::npos && std::fabs(d - bd) <= kTightTol &&
                 ids[p] < best)) {
                bd = d;
                best = ids[p];
            }
        }
        return (best != GridIndex::npos && bd <= r + kTightTol) ? best : GridIndex::npos;
    }
    double gap(const std::vector<double>& q) const {
        std::size_t p = grid.nearest(q);
        if (p == GridIndex::npos) return kInf;
        double d = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k)
            d = std::max(d, std::fabs(coords[p][k] - q[k]));
        return d;
    }
};

struct Builder {
    const MeasuredSpace& X;
    Constants cons;
    HolderOptions opt;
    CubeComplex cx;
    AtomIndex c_atoms, g_atoms;
    std::vector<char> in_g;
    bool has_g = false;
    double L = 0.0;

    std::unordered_map<long long, std::uint32_t> value;
    std::vector<CubeComplex::Pt> domain_pts;
    HolderCertificate cert;

    Builder(const MeasuredSpace& x, Constants c, HolderOptions o)
        : X(x), cons(c), opt(std::move(o)), cx(c.n, c.N, c.M + std::max(1, o.depth)) {}

    const std::vector<double>& atom_coords(std::size_t a) const {
        return X.space.coords()[a];
    }
    double atom_dist(std::size_t a, std::size_t b) const { return X.space.dist(a, b); }

    std::uint32_t val(const CubeComplex::Pt& p) const {
        auto it = value.find(cx.key(p));
        return it == value.end() ? kUnset : it->second;
    }
    void set_val(const CubeComplex::Pt& p, std::uint32_t a) {
        auto [it, fresh] = value.emplace(cx.key(p), a);
        if (fresh) domain_pts.push_back(p);
    }

    void seed() {
        auto lattice = cx.cube_lattice(CubeComplex::Pt(cons.n, 0), 0, cons.M);
        for (const auto& p : lattice) {
            std::size_t a = c_atoms.nearest_atom(cx.physical(p));
            if (a == GridIndex::npos) throw DomainError("seed placement found no atom");
            set_val(p, static_cast<std::uint32_t>(a));
        }
        L = 0.0;
        double bilip_worst = 1.0;
        for (std::size_t a = 0; a < lattice.size(); ++a)
            for (std::size_t b = a + 1; b < lattice.size(); ++b) {
                double dp = sup_dist(cx.physical(lattice[a]), cx.physical(lattice[b]));
                double dv = atom_dist(val(lattice[a]), val(lattice[b]));
                L = std::max(L, dv / dp);
                if (dv > 0.0) bilip_worst = std::max({bilip_worst, dv / dp, dp / dv});
            }
        cert.bilip_worst = bilip_worst;
        cert.bilip_bound = cons.K + std::pow(2.0, -double(cons.m_grid));
        cert.bilip_pass = bilip_worst <= cert.bilip_bound + kTol;
        if (L <= 0.0) L = 1e-12;  // constant seed
    }

    SplitResult split(const std::vector<CubeComplex::Pt>& bases, int level, double beta) {
        SplitResult out;
        double radius = beta * std::pow(cons.l, level);
        for (std::size_t q = 0; q < bases.size(); ++q) {
            auto cs = cx.corners(bases[q], level);
            std::size_t witness = GridIndex::npos;
            if (has_g) {
                for (const auto& c : cs) {
                    std::uint32_t a = val(c);
                    if (a == kUnset) throw DomainError("corner without a value in split");
                    std::size_t g = g_atoms.within_atom(atom_coords(a), radius);
                    if (g != GridIndex::npos) {
                        witness = g;
                        break;
                    }
                }
            }
            if (witness != GridIndex::npos) {
                out.good.push_back(q);
                out.witness.push_back(witness);
                for (const auto& c : cs)
                    out.worst_witness_radius = std::max(out.worst_witness_radius,
                                                        atom_dist(val(c), witness));
            } else {
                out.bad.push_back(q);
                double gap = kInf;
                if (has_g)
                    for (const auto& c : cs)
                        gap = std::min(gap, g_atoms.gap(atom_coords(val(c))));
                out.worst_bad_gap = out.bad.size() == 1 ? gap
                                                        : std::min(out.worst_bad_gap, gap);
            }
        }
        return out;
    }

    // Chart through the ambient coordinates: xi(q) = nearest C atom to
    // x + r q. Boundary atoms invert exactly, so the selection step incurs
    // no slack on lattice-aligned data; the slack is audited regardless.
    void extend_face(const CubeComplex::Face& f, double beta, std::size_t witness,
                     LevelSummary& summary) {
        if (__builtin_popcount(f.axes) == 0) return;
        int level = f.level;
        double li = std::pow(cons.l, level);
        if (!(beta < 1.0 / (2.0 * li)))
            throw DomainError("extension budget exhausted at level " +
                              std::to_string(level));
        double r = 2.0 * beta * li;
        double delta = cons.l / 20.0;
        double halfwidth = cons.K * (1.0 + 2.0 * delta);
        const auto& x = atom_coords(witness);
        std::size_t nd = cons.n;

        std::vector<CubeComplex::Pt> bpts;
        {
            std::unordered_map<long long, char> seen;
            for (const auto& bf : cx.boundary_faces(f))
                for (auto& p : cx.face_lattice(bf, level + 1))
                    if (seen.emplace(cx.key(p), 1).second) bpts.push_back(std::move(p));
        }
        std::vector<std::vector<double>> psi(bpts.size(), std::vector<double>(nd));
        summary.saw_bound = 2.0 * delta * r;
        for (std::size_t a = 0; a < bpts.size(); ++a) {
            std::uint32_t atom = val(bpts[a]);
            if (atom == kUnset) throw DomainError("face boundary misses values");
            const auto& ac = atom_coords(atom);
            double saw = 0.0;
            for (std::size_t k = 0; k < nd; ++k) {
                double q = (ac[k] - x[k]) / r;
                double clamped = std::max(-halfwidth, std::min(q, halfwidth));
                psi[a][k] = clamped;
                saw = std::max(saw, std::fabs(q - clamped) * r);
            }
            summary.saw_worst = std::max(summary.saw_worst, saw);
            if (saw > 2.0 * delta * r + kTol)
                throw CertificateError("chart selection slack exceeded on a face at level " +
                                       std::to_string(level));
        }
        // measured per-coordinate constants, bounded by the ladder budget
        std::vector<double> Hj(nd, 0.0);
        std::vector<std::vector<double>> bphys(bpts.size());
        for (std::size_t a = 0; a < bpts.size(); ++a) bphys[a] = cx.physical(bpts[a]);
        for (std::size_t a = 0; a < bpts.size(); ++a)
            for (std::size_t b = a + 1; b < bpts.size(); ++b) {
                double dp = sup_dist(bphys[a], bphys[b]);
                if (dp <= 0.0) continue;
                for (std::size_t k = 0; k < nd; ++k)
                    Hj[k] = std::max(Hj[k], std::fabs(psi[a][k] - psi[b][k]) / dp);
            }
        double h_bound = 3.0 * cons.K * beta / (2.0 * r);
        for (std::size_t k = 0; k < nd; ++k)
            if (Hj[k] > h_bound * (1.0 + 1e-9) + kTightTol)
                throw CertificateError("boundary chart data exceeds its Lipschitz budget");

        auto lattice = cx.face_lattice(f, level + 1);
        std::vector<double> lo(nd, kInf), hi(nd, -kInf);
        for (std::size_t k = 0; k < nd; ++k)
            for (const auto& row : psi) {
                lo[k] = std::min(lo[k], row[k]);
                hi[k] = std::max(hi[k], row[k]);
            }
        std::vector<double> target(x.size());
        for (const auto& p : lattice) {
            if (val(p) != kUnset) continue;
            auto py = cx.physical(p);
            for (std::size_t k = 0; k < x.size(); ++k) target[k] = x[k];
            for (std::size_t k = 0; k < nd; ++k) {
                double v = kInf;
                for (std::size_t a = 0; a < bpts.size(); ++a)
                    v = std::min(v, psi[a][k] + Hj[k] * sup_dist(bphys[a], py));
                target[k] = x[k] + r * std::max(lo[k], std::min(v, hi[k]));
            }
            std::size_t atom = c_atoms.nearest_atom(target);
            if (atom == GridIndex::npos) throw CertificateError("chart image found no atom");
            set_val(p, static_cast<std::uint32_t>(atom));
        }
        double bound = 2.0 * cons.K * cons.K * beta;
        std::vector<std::vector<double>> lphys(lattice.size());
        for (std::size_t a = 0; a < lattice.size(); ++a) lphys[a] = cx.physical(lattice[a]);
        for (std::size_t a = 0; a < lattice.size(); ++a)
            for (std::size_t b = a + 1; b < lattice.size(); ++b) {
                double dp = sup_dist(lphys[a], lphys[b]);
                double dv = atom_dist(val(lattice[a]), val(lattice[b]));
                if (dv > bound * dp + kTol)
                    throw CertificateError("face extension exceeds its Lipschitz bound");
            }
    }

    void extend_level(int level, const std::vector<CubeComplex::Pt>& bases,
                      const std::vector<std::size_t>& witnesses, LevelSummary& summary) {
        double beta = L * std::pow(cons.sigma, double(level - cons.M));
        for (std::size_t m = 0; m + 1 <= cons.n; ++m) {
            double rung_beta = beta * std::pow(5.0 * cons.K * cons.K, double(m));
            std::unordered_map<long long, char> seen;
            for (std::size_t q = 0; q < bases.size(); ++q)
                for (auto& f : cx.faces(bases[q], level, m + 1)) {
                    if (!seen.emplace(cx.face_key(f), 1).second) continue;
                    extend_face(f, rung_beta, witnesses[q], summary);
                }
        }
    }

    std::vector<std::size_t> select_window(const std::vector<CubeComplex::Pt>& bases,
                                           const std::vector<std::size_t>& good,
                                           int level) {
        if (opt.window_cubes == 0 || good.size() <= opt.window_cubes) return good;
        std::vector<double> target = opt.zoom_target;
        if (target.empty()) target.assign(cons.n, 0.0);
        std::vector<std::size_t> order = good;
        double half = 0.5 * double(cx.step(level)) * cx.unit();
        auto score = [&](std::size_t q) {
            auto c = cx.physical(bases[q]);
            double s = 0.0;
            for (std::size_t k = 0; k < cons.n; ++k)
                s = std::max(s, std::fabs(c[k] + half - target[k]));
            return s;
        };
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            double sa = score(a), sb = score(b);
            return sa < sb || (sa == sb && cx.key(bases[a]) < cx.key(bases[b]));
        });
        order.resize(opt.window_cubes);
        return order;
    }
};

}  // namespace

nlohmann::json HolderCertificate::to_json() const {
    nlohmann::json j;
    j["constants"] = {{"K", constants.K},           {"gamma", constants.gamma},
                      {"eta", constants.eta},       {"n", constants.n},
                      {"N", constants.N},           {"alpha", constants.alpha},
                      {"l", constants.l},           {"sigma", constants.sigma},
                      {"M", constants.M},           {"M_paper", constants.M_paper},
                      {"m_grid", constants.m_grid}, {"lambda", constants.lambda}};
    j["L"] = L;
    j["depth"] = depth;
    j["windowed"] = windowed;
    j["domain_points"] = domain_points;
    j["patched_points"] = patched_points;
    nlohmann::json lv = nlohmann::json::array();
    for (const auto& s : levels)
        lv.push_back({{"level", s.level},
                      {"beta", s.beta},
                      {"cubes", s.cubes},
                      {"good", s.good},
                      {"bad", s.bad},
                      {"offwindow", s.offwindow},
                      {"witness_worst", s.witness_worst},
                      {"witness_bound", s.witness_bound},
                      {"saw_worst", s.saw_worst},
                      {"saw_bound", s.saw_bound},
                      {"lip_worst", s.lip_worst},
                      {"lip_bound", s.lip_bound},
                      {"lip_pairs", s.lip_pairs},
                      {"ancestor_worst", s.ancestor_worst},
                      {"ancestor_bound", s.ancestor_bound},
                      {"pass", s.pass}});
    j["levels"] = lv;
    j["bad_balls"] = balls.size();
    j["holder"] = {{"constant", holder_constant},
                   {"exponent", holder_exponent},
                   {"worst_ratio", holder_worst},
                   {"pairs", holder_pairs},
                   {"pass", holder_pass}};
    j["bilip"] = {{"bound", bilip_bound}, {"worst", bilip_worst}, {"pass", bilip_pass}};
    j["neighbor"] = {{"bound", neighbor_bound},
                     {"worst", neighbor_worst},
                     {"pass", neighbor_pass}};
    j["content"] = {{"picked", picked},
                    {"subcover_disjoint", subcover_disjoint},
                    {"coverage_pass", coverage_pass},
                    {"ball_density_pass", ball_density_pass},
                    {"balls_avoid_g", balls_avoid_g},
                    {"balls_in_range", balls_in_range},
                    {"lhs", content_lhs},
                    {"rhs", content_rhs},
                    {"pass", content_pass}};
    j["pass"] = pass;
    return j;
}

HolderCertificate holder_build(const MeasuredSpace& X, const std::vector<std::size_t>& C_idx,
                               const std::vector<std::size_t>& G_idx, double K, double gamma,
                               double eta, const HolderOptions& opt) {
    if (!X.space.has_coords() || X.space.norm() != Norm::Linf)
        throw DomainError("the construction needs a sup-norm coordinate host");
    if (C_idx.empty()) throw DomainError("target set C must be nonempty");
    std::size_t n = X.space.ambient_dim();
    Constants cons = with_offset(solve_constants(K, gamma, n, eta), opt.M);

    Builder b(X, cons, opt);
    b.cert.constants = cons;
    b.cert.depth = opt.depth;
    b.cert.windowed = opt.window_cubes > 0;

    double cell;
    {
        double lo = kInf, hi = -kInf;
        for (std::size_t i : C_idx) {
            lo = std::min(lo, X.space.coords()[i][0]);
            hi = std::max(hi, X.space.coords()[i][0]);
        }
        cell = std::max((hi - lo) / 256.0, 1e-9);
    }
    b.c_atoms.build(X, C_idx, cell);
    b.in_g.assign(X.size(), 0);
    for (std::size_t i : G_idx) {
        bool in_c = false;
        for (std::size_t c : C_idx)
            if (c == i) {
                in_c = true;
                break;
            }
        if (!in_c) throw DomainError("G must be contained in C");
        b.in_g[i] = 1;
    }
    b.has_g = !G_idx.empty();
    if (b.has_g) b.g_atoms.build(X, G_idx, cell);

    b.seed();
    const double L = b.L;
    b.cert.L = L;

    std::vector<CubeComplex::Pt> bases = b.cx.cube_bases(cons.M);
    for (int level = cons.M; level <= cons.M + opt.depth; ++level) {
        double beta = L * std::pow(cons.sigma, double(level - cons.M));
        LevelSummary s;
        s.level = level;
        s.beta = beta;
        s.cubes = bases.size();
        s.witness_bound = 2.0 * beta * std::pow(cons.l, level);

        SplitResult sp = b.split(bases, level, beta);
        s.good = sp.good.size();
        s.bad = sp.bad.size();
        s.witness_worst = sp.worst_witness_radius;

        {
            double radius = L * std::pow(cons.sigma, -double(cons.M)) *
                            std::pow(cons.l, cons.alpha * double(level));
            std::unordered_map<long long, char> seen;
            for (std::size_t q : sp.bad)
                for (const auto& c : b.cx.corners(bases[q], level)) {
                    if (!seen.emplace(b.cx.key(c), 1).second) continue;
                    BadBall ball;
                    ball.level = level;
                    ball.corner = c;
                    ball.cube = bases[q];
                    ball.atom = b.val(c);
                    ball.radius = radius;
                    ball.g_gap =
                        b.has_g ? b.g_atoms.gap(b.atom_coords(ball.atom)) : kInf;
                    b.cert.balls.push_back(std::move(ball));
                }
        }

        bool is_last = level == cons.M + opt.depth || opt.depth == 0;
        std::vector<std::size_t> window;
        if (!is_last && !sp.good.empty()) {
            window = b.select_window(bases, sp.good, level);
            s.offwindow = sp.good.size() - window.size();
            if (!level_budget_ok(cons, L, level))
                throw DomainError("Lipschitz budget exhausted at level " +
                                  std::to_string(level));
            std::vector<CubeComplex::Pt> wb;
            std::vector<std::size_t> ww;
            for (std::size_t q : window) {
                wb.push_back(bases[q]);
                std::size_t pos =
                    std::find(sp.good.begin(), sp.good.end(), q) - sp.good.begin();
                ww.push_back(sp.witness[pos]);
            }
            b.extend_level(level, wb, ww, s);

            // local Lipschitz audit of the freshly valued sub-lattice
            double next_beta = beta * cons.sigma;
            double window_r = std::pow(cons.l, level);
            s.lip_bound = next_beta;
            if (cons.n == 1) {
                // cross-cube pairs included via a sorted sweep
                std::vector<CubeComplex::Pt> pts;
                for (const auto& base : wb)
                    for (auto& p : b.cx.cube_lattice(base, level, level + 1))
                        pts.push_back(std::move(p));
                std::sort(pts.begin(), pts.end());
                pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
                long long win = static_cast<long long>(window_r / b.cx.unit() + 0.5);
                for (std::size_t a2 = 0; a2 < pts.size(); ++a2)
                    for (std::size_t b2 = a2 + 1;
                         b2 < pts.size() && pts[b2][0] - pts[a2][0] <= win; ++b2) {
                        double dp = double(pts[b2][0] - pts[a2][0]) * b.cx.unit();
                        if (dp <= 0.0) continue;
                        double dv = b.atom_dist(b.val(pts[a2]), b.val(pts[b2]));
                        ++s.lip_pairs;
                        s.lip_worst = std::max(s.lip_worst, dv / dp);
                    }
            } else {
                for (const auto& base : wb) {
                    auto pts = b.cx.cube_lattice(base, level, level + 1);
                    std::vector<std::vector<double>> ph(pts.size());
                    for (std::size_t a2 = 0; a2 < pts.size(); ++a2)
                        ph[a2] = b.cx.physical(pts[a2]);
                    for (std::size_t a2 = 0; a2 < pts.size(); ++a2)
                        for (std::size_t b2 = a2 + 1; b2 < pts.size(); ++b2) {
                            double dp = sup_dist(ph[a2], ph[b2]);
                            if (dp <= 0.0 || dp > window_r + kTightTol) continue;
                            double dv = b.atom_dist(b.val(pts[a2]), b.val(pts[b2]));
                            ++s.lip_pairs;
                            s.lip_worst = std::max(s.lip_worst, dv / dp);
                        }
                }
            }
            // ancestor-scale bound on strided pairs inside common cubes
            double anc_worst = 0.0, anc_bound = 0.0;
            for (int j = cons.M; j <= level; ++j) {
                double bound = 2.0 * L * std::pow(cons.sigma, 1.0 - double(cons.M)) *
                               std::pow(cons.sigma * cons.l, double(j));
                long long cs = b.cx.step(j);
                double worst = 0.0;
                for (const auto& base : wb) {
                    auto pts = b.cx.cube_lattice(base, level, level + 1);
                    std::size_t stride = std::max<std::size_t>(1, pts.size() / 48);
                    for (std::size_t a2 = 0; a2 < pts.size(); a2 += stride)
                        for (std::size_t b2 = a2 + 1; b2 < pts.size(); b2 += stride) {
                            bool common = true;
                            for (std::size_t k = 0; k < cons.n && common; ++k) {
                                long long lo2 = std::min(pts[a2][k], pts[b2][k]);
                                long long hi2 = std::max(pts[a2][k], pts[b2][k]);
                                if (hi2 > (lo2 / cs) * cs + cs) common = false;
                            }
                            if (!common) continue;
                            worst = std::max(worst, b.atom_dist(b.val(pts[a2]),
                                                                b.val(pts[b2])));
                        }
                }
                if (worst > anc_worst) {
                    anc_worst = worst;
                    anc_bound = bound;
                }
            }
            s.ancestor_worst = anc_worst;
            s.ancestor_bound = anc_bound;
        }
        s.pass = (s.lip_pairs == 0 || s.lip_worst <= s.lip_bound + kTol) &&
                 s.witness_worst <= s.witness_bound + kTol &&
                 (s.ancestor_bound == 0.0 || s.ancestor_worst <= s.ancestor_bound + kTol);
        b.cert.levels.push_back(s);

        if (is_last || window.empty()) break;
        std::vector<CubeComplex::Pt> next;
        for (std::size_t q : window)
            for (auto& ch : b.cx.children(bases[q], level)) next.push_back(std::move(ch));
        bases = std::move(next);
    }

    // ---- assembly ----------------------------------------------------------
    HolderCertificate& cert = b.cert;
    cert.domain_points = b.domain_pts.size();
    double H = 5.0 * L * std::pow(cons.l, -cons.alpha);
    cert.holder_constant = H;
    cert.holder_exponent = cons.alpha;

    std::vector<std::vector<double>> dom_phys(b.domain_pts.size());
    std::vector<const std::vector<double>*> dom_img(b.domain_pts.size());
    for (std::size_t i = 0; i < b.domain_pts.size(); ++i) {
        dom_phys[i] = b.cx.physical(b.domain_pts[i]);
        dom_img[i] = &b.atom_coords(b.value.at(b.cx.key(b.domain_pts[i])));
    }

    // patch bad cubes one refinement deep by coordinatewise extension
    struct PatchPt {
        std::vector<double> phys, image;
    };
    std::vector<PatchPt> patches;
    {
        std::unordered_map<long long, char> done;
        std::size_t res = std::max<std::size_t>(3, opt.patch_res);
        for (const auto& ball : cert.balls) {
            long long st = b.cx.step(ball.level);
            long long ck = b.cx.key(ball.cube) * 31 + ball.level;
            if (!done.emplace(ck, 1).second) continue;
            std::vector<long long> idx(cons.n, 0);
            while (true) {
                bool interior = false;
                CubeComplex::Pt p = ball.cube;
                for (std::size_t k = 0; k < cons.n; ++k) {
                    p[k] += static_cast<long long>(double(st) * double(idx[k]) /
                                                   double(res - 1));
                    if (idx[k] != 0 && idx[k] + 1 != static_cast<long long>(res))
                        interior = true;
                }
                if (interior && b.val(p) == kUnset) {
                    PatchPt pp;
                    pp.phys = b.cx.physical(p);
                    pp.image.assign(X.space.ambient_dim(), 0.0);
                    for (std::size_t k = 0; k < X.space.ambient_dim(); ++k) {
                        double v = kInf, lo2 = kInf, hi2 = -kInf;
                        for (std::size_t d = 0; d < dom_phys.size(); ++d) {
                            double fd = (*dom_img[d])[k];
                            lo2 = std::min(lo2, fd);
                            hi2 = std::max(hi2, fd);
                            v = std::min(v, fd + H * std::pow(sup_dist(dom_phys[d], pp.phys),
                                                              cons.alpha));
                        }
                        pp.image[k] = std::max(lo2, std::min(v, hi2));
                    }
                    patches.push_back(std::move(pp));
                }
                std::size_t k = 0;
                while (k < cons.n && ++idx[k] == static_cast<long long>(res)) idx[k++] = 0;
                if (k == cons.n) break;
            }
        }
    }
    cert.patched_points = patches.size();

    // Holder and neighbor audits over the union domain plus patches. The
    // domain part runs on integer separations with a precomputed bound
    // table; patch pairs take the direct power.
    {
        double nb_range = std::pow(2.0, -double(cons.m_grid));
        cert.neighbor_bound =
            10.0 * cons.K * std::pow(2.0, -double(cons.m_grid) * cons.gamma / 2.0);
        double worst = 0.0, nb_worst = 0.0;
        std::uint64_t pairs = 0;

        std::size_t nd2 = b.domain_pts.size();
        std::uint64_t total = std::uint64_t(nd2) * (nd2 > 0 ? nd2 - 1 : 0) / 2;
        std::size_t stride = static_cast<std::size_t>(
            std::ceil(std::sqrt(double(total) / double(opt.audit_pair_cap))));
        if (stride < 1) stride = 1;

        long long max_sep = 0;
        for (std::size_t a = 0; a < nd2; ++a)
            for (std::size_t k = 0; k < cons.n; ++k)
                max_sep = std::max(max_sep, b.domain_pts[a][k]);
        std::vector<double> powtab(static_cast<std::size_t>(max_sep) + 2, 0.0);
        for (std::size_t t = 1; t < powtab.size(); ++t)
            powtab[t] = std::pow(double(t) * b.cx.unit(), cons.alpha);

        for (std::size_t a = 0; a < nd2; a += stride) {
            const auto& pa = b.domain_pts[a];
            const auto& ia = *dom_img[a];
            for (std::size_t b2 = a + 1; b2 < nd2; b2 += stride) {
                const auto& pb = b.domain_pts[b2];
                long long sep = 0;
                for (std::size_t k = 0; k < cons.n; ++k)
                    sep = std::max(sep, std::llabs(pa[k] - pb[k]));
                if (sep == 0) continue;
                double dv = sup_dist(ia, *dom_img[b2]);
                worst = std::max(worst, dv / powtab[static_cast<std::size_t>(sep)]);
                if (double(sep) * b.cx.unit() <= nb_range)
                    nb_worst = std::max(nb_worst, dv);
                ++pairs;
            }
        }
        for (std::size_t a = 0; a < patches.size(); ++a) {
            for (std::size_t d = 0; d < nd2; ++d) {
                double dp = sup_dist(patches[a].phys, dom_phys[d]);
                if (dp <= 0.0) continue;
                double dv = sup_dist(patches[a].image, *dom_img[d]);
                worst = std::max(worst, dv / std::pow(dp, cons.alpha));
                if (dp <= nb_range) nb_worst = std::max(nb_worst, dv);
                ++pairs;
            }
            for (std::size_t b2 = a + 1; b2 < patches.size(); ++b2) {
                double dp = sup_dist(patches[a].phys, patches[b2].phys);
                if (dp <= 0.0) continue;
                double dv = sup_dist(patches[a].image, patches[b2].image);
                worst = std::max(worst, dv / std::pow(dp, cons.alpha));
                if (dp <= nb_range) nb_worst = std::max(nb_worst, dv);
                ++pairs;
            }
        }
        cert.holder_worst = worst;
        cert.holder_pairs = pairs;
        cert.holder_pass = worst <= H * (1.0 + 1e-9) + kTol;
        cert.neighbor_worst = nb_worst;
        cert.neighbor_pass = nb_worst <= cert.neighbor_bound + kTol;
    }

    // ---- content handling ---------------------------------------------------
    {
        double inflate = 25.0 * std::pow(cons.sigma, double(cons.M)) *
                         std::pow(cons.l, -cons.alpha);
        std::vector<std::size_t> order(cert.balls.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
            return cert.balls[a].radius > cert.balls[c].radius ||
                   (cert.balls[a].radius == cert.balls[c].radius && a < c);
        });
        std::vector<std::size_t> picked;
        for (std::size_t i : order) {
            bool disjoint = true;
            for (std::size_t p : picked)
                if (b.atom_dist(cert.balls[i].atom, cert.balls[p].atom) <=
                    cert.balls[i].radius + cert.balls[p].radius + kTightTol) {
                    disjoint = false;
                    break;
                }
            if (disjoint) picked.push_back(i);
        }
        cert.picked = picked.size();
        cert.subcover_disjoint = true;
        for (std::size_t a = 0; a < picked.size(); ++a)
            for (std::size_t c = a + 1; c < picked.size(); ++c)
                if (b.atom_dist(cert.balls[picked[a]].atom, cert.balls[picked[c]].atom) <=
                    cert.balls[picked[a]].radius + cert.balls[picked[c]].radius)
                    cert.subcover_disjoint = false;

        cert.coverage_pass = true;
        for (std::size_t i : order) {
            bool covered = false;
            for (std::size_t p : picked)
                if (b.atom_dist(cert.balls[i].atom, cert.balls[p].atom) <=
                    inflate * cert.balls[p].radius + kTol) {
                    covered = true;
                    break;
                }
            if (!covered) {
                cert.coverage_pass = false;
                break;
            }
        }
        for (const auto& pp : patches) {
            bool covered = picked.empty();
            for (std::size_t p : picked)
                if (sup_dist(pp.image, b.atom_coords(cert.balls[p].atom)) <=
                    inflate * cert.balls[p].radius + kTol) {
                    covered = true;
                    break;
                }
            if (!covered) {
                cert.coverage_pass = false;
                break;
            }
        }

        cert.ball_density_pass = true;
        cert.balls_avoid_g = true;
        cert.balls_in_range = true;
        std::uint32_t origin_atom = b.value.at(b.cx.key(CubeComplex::Pt(cons.n, 0)));
        double range = 10.0 * L;
        double lhs = 0.0, ball_mass_total = 0.0;
        for (std::size_t p : picked) {
            const auto& ball = cert.balls[p];
            double mass = 0.0;
            for (std::size_t i = 0; i < X.size(); ++i) {
                if (b.atom_dist(ball.atom, i) > ball.radius) continue;
                mass += X.weight[i];
                if (b.in_g[i]) cert.balls_avoid_g = false;
            }
            if (mass + kTol < eta * std::pow(ball.radius, double(cons.n)))
                cert.ball_density_pass = false;
            if (b.atom_dist(ball.atom, origin_atom) + ball.radius > range + kTol)
                cert.balls_in_range = false;
            lhs += std::pow(2.0 * inflate * ball.radius, double(cons.n));
            ball_mass_total += mass;
        }
        cert.content_lhs = lhs;
        double outside_g = 0.0;
        for (std::size_t i = 0; i < X.size(); ++i)
            if (!b.in_g[i] && b.atom_dist(origin_atom, i) <= range)
                outside_g += X.weight[i];
        cert.content_rhs = cons.lambda * outside_g;
        cert.content_pass =
            lhs <= cert.content_rhs + kTol &&
            (picked.empty() || ball_mass_total <= outside_g + kTol);
    }

    bool levels_ok = true;
    for (const auto& s : cert.levels) levels_ok = levels_ok && s.pass;
    cert.pass = levels_ok && cert.holder_pass && cert.bilip_pass && cert.neighbor_pass &&
                cert.subcover_disjoint && cert.coverage_pass && cert.ball_density_pass &&
                cert.balls_avoid_g && cert.balls_in_range && cert.content_pass;
    return cert;
}

}  // namespace mmg
