#include "mmg/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mmg {

PointedSpace PointedSpace::from_matrix(std::size_t n, std::size_t base,
                                       std::vector<double> dist) {
    if (n == 0) throw DomainError("space must have at least one point");
    if (dist.size() != n * n) throw DomainError("distance matrix size mismatch");
    if (base >= n) throw DomainError("base index out of range");
    PointedSpace s;
    s.n_ = n;
    s.base_ = base;
    s.matrix_ = std::move(dist);
    return s;
}

PointedSpace PointedSpace::from_points(std::vector<std::vector<double>> coords,
                                       Norm norm, std::size_t base) {
    if (coords.empty()) throw DomainError("space must have at least one point");
    if (base >= coords.size()) throw DomainError("base index out of range");
    std::size_t dim = coords[0].size();
    for (const auto& p : coords)
        if (p.size() != dim) throw DomainError("inconsistent point dimension");
    PointedSpace s;
    s.n_ = coords.size();
    s.base_ = base;
    s.coords_ = std::move(coords);
    s.norm_ = norm;
    return s;
}

std::vector<std::string> PointedSpace::validate(double tol) const {
    std::vector<std::string> bad;
    if (base_ >= n_) bad.push_back("base index out of range");
    if (matrix_.empty()) return bad;  // coordinate metrics satisfy the axioms
    for (std::size_t i = 0; i < n_; ++i) {
        if (std::fabs(matrix_[i * n_ + i]) > tol)
            bad.push_back("nonzero diagonal at " + std::to_string(i));
        for (std::size_t j = i + 1; j < n_; ++j) {
            double dij = matrix_[i * n_ + j];
            if (dij < -tol) bad.push_back("negative distance (" + std::to_string(i) + "," + std::to_string(j) + ")");
            if (std::fabs(dij - matrix_[j * n_ + i]) > tol)
                bad.push_back("asymmetry (" + std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            for (std::size_t k = 0; k < n_; ++k) {
                double lhs = matrix_[i * n_ + k];
                double rhs = matrix_[i * n_ + j] + matrix_[j * n_ + k];
                if (lhs > rhs + tol) {
                    bad.push_back("triangle violation (" + std::to_string(i) + "," +
                                  std::to_string(j) + "," + std::to_string(k) + ")");
                    if (bad.size() > 64) return bad;
                }
            }
    return bad;
}

void PointedSpace::densify() {
    if (!matrix_.empty()) return;
    matrix_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = i + 1; j < n_; ++j)
            matrix_[i * n_ + j] = matrix_[j * n_ + i] = coord_dist(i, j);
}

double MeasuredSpace::total_mass() const {
    double m = 0.0;
    for (double w : weight) m += w;
    return m;
}

double MeasuredSpace::ball_mass(std::size_t center, double r) const {
    if (center >= size()) throw DomainError("ball center out of range");
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
        if (space.dist(center, i) <= r) m += weight[i];
    return m;
}

std::vector<std::string> MeasuredSpace::validate() const {
    std::vector<std::string> bad = space.validate();
    if (weight.size() != space.size()) bad.push_back("weight length mismatch");
    for (std::size_t i = 0; i < weight.size(); ++i)
        if (weight[i] < 0.0) bad.push_back("negative weight at " + std::to_string(i));
    return bad;
}

std::vector<std::size_t> ball(const PointedSpace& s, std::size_t center, double r) {
    if (center >= s.size()) throw DomainError("ball center out of range");
    if (r < 0.0) throw DomainError("ball radius must be nonnegative");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.dist(center, i) <= r) out.push_back(i);
    return out;
}

std::vector<std::size_t> ball_ties(const PointedSpace& s, std::size_t center, double r,
                                   double tol) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (std::fabs(s.dist(center, i) - r) <= tol) out.push_back(i);
    return out;
}

MeasuredSpace restrict_measure(const MeasuredSpace& s, const std::vector<std::size_t>& keep) {
    std::vector<char> in(s.size(), 0);
    for (std::size_t i : keep) {
        if (i >= s.size()) throw DomainError("restriction index out of range");
        in[i] = 1;
    }
    if (!in[s.base()]) throw DomainError("restriction must keep the basepoint");
    MeasuredSpace out = s;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!in[i]) out.weight[i] = 0.0;
    return out;
}

MeasuredSpace rescale(const MeasuredSpace& s, double r) {
    if (r <= 0.0) throw DomainError("rescale radius must be positive");
    double mass = s.ball_mass(s.base(), r);
    if (mass <= 0.0) throw DomainError("degenerate scale: zero mass in B(base, r)");
    MeasuredSpace out;
    if (s.space.has_coords()) {
        auto coords = s.space.coords();
        for (auto& p : coords)
            for (double& c : p) c /= r;
        out.space = PointedSpace::from_points(std::move(coords), s.space.norm(), s.base());
    } else {
        std::size_t n = s.size();
        std::vector<double> m(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m[i * n + j] = s.space.dist(i, j) / r;
        out.space = PointedSpace::from_matrix(n, s.base(), std::move(m));
    }
    out.weight = s.weight;
    for (double& w : out.weight) w /= mass;
    return out;
}

MeasuredSpace load_space(const nlohmann::json& j) {
    MeasuredSpace out;
    if (j.contains("dist")) {
        std::size_t n = j.at("n").get<std::size_t>();
        std::size_t base = j.at("base").get<std::size_t>();
        std::vector<double> m;
        m.reserve(n * n);
        for (const auto& row : j.at("dist"))
            for (const auto& v : row) m.push_back(v.get<double>());
        out.space = PointedSpace::from_matrix(n, base, std::move(m));
    } else {
        auto pts = j.at("points").get<std::vector<std::vector<double>>>();
        std::string norm = j.value("norm", "linf");
        std::size_t base = j.at("base").get<std::size_t>();
        Norm nm = norm == "l2" ? Norm::L2 : Norm::Linf;
        if (norm != "l2" && norm != "linf") throw DomainError("unknown norm: " + norm);
        out.space = PointedSpace::from_points(std::move(pts), nm, base);
    }
    if (j.contains("weights"))
        out.weight = j.at("weights").get<std::vector<double>>();
    else
        out.weight.assign(out.space.size(), 1.0);
    if (out.weight.size() != out.space.size())
        throw DomainError("weights length mismatch");
    for (double w : out.weight)
        if (w < 0.0) throw DomainError("negative weight");
    return out;
}

MeasuredSpace load_space_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return load_space(j);
}

nlohmann::json space_to_json(const MeasuredSpace& s) {
    nlohmann::json j;
    if (s.space.has_coords()) {
        j["dim"] = s.space.ambient_dim();
        j["norm"] = s.space.norm() == Norm::L2 ? "l2" : "linf";
        j["points"] = s.space.coords();
    } else {
        std::size_t n = s.size();
        j["n"] = n;
        std::vector<std::vector<double>> m(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) m[i][k] = s.space.dist(i, k);
        j["dist"] = m;
    }
    j["base"] = s.base();
    j["weights"] = s.weight;
    return j;
}

PointedSpace extract_subspace(const PointedSpace& host, const std::vector<std::size_t>& idx,
                              std::optional<std::size_t> base_of) {
    if (idx.empty()) throw DomainError("subspace must be nonempty");
    std::size_t want = base_of.value_or(host.base());
    std::size_t base_pos = static_cast<std::size_t>(-1);
    for (std::size_t k = 0; k < idx.size(); ++k)
        if (idx[k] == want) base_pos = k;
    if (base_pos == static_cast<std::size_t>(-1))
        throw DomainError("subspace does not contain the requested basepoint");
    std::size_t n = idx.size();
    std::vector<double> m(n * n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) m[a * n + b] = host.dist(idx[a], idx[b]);
    return PointedSpace::from_matrix(n, base_pos, std::move(m));
}

std::vector<std::string> EmbeddedPair::validate(const PointedSpace& left,
                                                const PointedSpace& right) const {
    std::vector<std::string> bad;
    auto has_base = [&](const std::vector<std::size_t>& v) {
        return std::find(v.begin(), v.end(), host.base()) != v.end();
    };
    if (!has_base(left_idx)) bad.push_back("left image misses host basepoint");
    if (!has_base(right_idx)) bad.push_back("right image misses host basepoint");
    auto check_restrict = [&](const std::vector<std::size_t>& idx, const PointedSpace& orig,
                              const char* side) {
        if (idx.size() != orig.size()) {
            bad.push_back(std::string(side) + " index count mismatch");
            return;
        }
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = 0; b < idx.size(); ++b)
                if (std::fabs(host.dist(idx[a], idx[b]) - orig.dist(a, b)) > kTol) {
                    bad.push_back(std::string(side) + " embedding is not isometric");
                    return;
                }
    };
    check_restrict(left_idx, left, "left");
    check_restrict(right_idx, right, "right");
    return bad;
}

GridIndex::GridIndex(const std::vector<std::vector<double>>& pts, double cell)
    : pts_(&pts), cell_(cell > 0 ? cell : 1.0) {
    if (pts.empty()) return;
    dim_ = pts[0].size();
    for (std::size_t i = 0; i < pts.size(); ++i)
        buckets_[key(cell_of(pts[i]))].push_back(i);
}

std::vector<long long> GridIndex::cell_of(const std::vector<double>& q) const {
    std::vector<long long> c(dim_);
    for (std::size_t k = 0; k < dim_; ++k)
        c[k] = static_cast<long long>(std::floor(q[k] / cell_));
    return c;
}

long long GridIndex::key(const std::vector<long long>& c) const {
    // Pack up to three 21-bit signed cell coordinates.
    long long k = 0;
    for (std::size_t i = 0; i < c.size() && i < 3; ++i)
        k = (k << 21) ^ ((c[i] + (1LL << 20)) & ((1LL << 21) - 1));
    return k;
}

std::size_t GridIndex::nearest(const std::vector<double>& q) const {
    if (!pts_ || pts_->empty()) return npos;
    const auto& pts = *pts_;
    auto supdist = [&](std::size_t i) {
        double m = 0.0;
        for (std::size_t k = 0; k < dim_; ++k)
            m = std::max(m, std::fabs(pts[i][k] - q[k]));
        return m;
    };
    for (int ring = 0;; ++ring) {
        double r = cell_ * (ring + 1);
        auto cand = within(q, r);
        if (!cand.empty()) {
            std::size_t best = cand[0];
            double bd = supdist(best);
            for (std::size_t i : cand) {
                double d = supdist(i);
                if (d < bd - kTightTol || (std::fabs(d - bd) <= kTightTol && i < best)) {
                    best = i;
                    bd = d;
                }
            }
            return best;
        }
        if (r > 1e12) return npos;  // scattered beyond any plausible extent
        // widen until something falls inside
    }
}

std::vector<std::size_t> GridIndex::within(const std::vector<double>& q, double r) const {
    std::vector<std::size_t> out;
    if (!pts_ || pts_->empty()) return out;
    const auto& pts = *pts_;
    std::vector<long long> lo(dim_), hi(dim_);
    for (std::size_t k = 0; k < dim_; ++k) {
        lo[k] = static_cast<long long>(std::floor((q[k] - r) / cell_));
        hi[k] = static_cast<long long>(std::floor((q[k] + r) / cell_));
    }
    std::vector<long long> cur = lo;
    auto visit = [&]() {
        auto it = buckets_.find(key(cur));
        if (it == buckets_.end()) return;
        for (std::size_t i : it->second) {
            double m = 0.0;
            for (std::size_t k = 0; k < dim_; ++k)
                m = std::max(m, std::fabs(pts[i][k] - q[k]));
            if (m <= r + kTightTol) out.push_back(i);
        }
    };
    while (true) {
        visit();
        std::size_t k = 0;
        while (k < dim_ && ++cur[k] > hi[k]) {
            cur[k] = lo[k];
            ++k;
        }
        if (k == dim_) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace mmg
