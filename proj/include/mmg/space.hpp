#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mmg/util.hpp"

namespace mmg {

enum class Norm { Linf, L2 };

// Finite pointed metric space. Distances come either from an explicit
// symmetric matrix or lazily from point coordinates under a named norm;
// large spaces use the coordinate backing to avoid n^2 storage.
class PointedSpace {
  public:
    PointedSpace() = default;

    static PointedSpace from_matrix(std::size_t n, std::size_t base,
                                    std::vector<double> dist);
    static PointedSpace from_points(std::vector<std::vector<double>> coords,
                                    Norm norm, std::size_t base);

    std::size_t size() const { return n_; }
    std::size_t base() const { return base_; }

    double dist(std::size_t i, std::size_t j) const {
        if (!matrix_.empty()) return matrix_[i * n_ + j];
        return coord_dist(i, j);
    }

    bool has_coords() const { return !coords_.empty(); }
    const std::vector<std::vector<double>>& coords() const { return coords_; }
    Norm norm() const { return norm_; }
    std::size_t ambient_dim() const { return coords_.empty() ? 0 : coords_[0].size(); }

    // Invariant diagnostics: symmetry, zero diagonal, triangle inequality
    // (additive tolerance 1e-12 on explicit matrices), base index range.
    std::vector<std::string> validate(double tol = kTightTol) const;

    // Materializes the explicit matrix (small spaces only).
    void densify();

  private:
    double coord_dist(std::size_t i, std::size_t j) const {
        const auto& a = coords_[i];
        const auto& b = coords_[j];
        if (norm_ == Norm::Linf) {
            double m = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k)
                m = std::max(m, std::fabs(a[k] - b[k]));
            return m;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            double d = a[k] - b[k];
            s += d * d;
        }
        return std::sqrt(s);
    }

    std::size_t n_ = 0;
    std::size_t base_ = 0;
    std::vector<double> matrix_;  // row-major n*n when explicit
    std::vector<std::vector<double>> coords_;
    Norm norm_ = Norm::Linf;
};

// Pointed space plus nonnegative atom weights. The basepoint may carry
// weight zero; operations that need x in spt(mu) state it themselves.
struct MeasuredSpace {
    PointedSpace space;
    std::vector<double> weight;

    std::size_t size() const { return space.size(); }
    std::size_t base() const { return space.base(); }
    double total_mass() const;
    double ball_mass(std::size_t center, double r) const;
    std::vector<std::string> validate() const;
};

// Closed ball {i : dist(center, i) <= r}.
std::vector<std::size_t> ball(const PointedSpace& s, std::size_t center, double r);
inline std::vector<std::size_t> ball(const MeasuredSpace& s, std::size_t center, double r) {
    return ball(s.space, center, r);
}

// Indices within tolerance of the ball boundary; reported so callers can
// see which atoms a closed-vs-open convention would move.
std::vector<std::size_t> ball_ties(const PointedSpace& s, std::size_t center, double r,
                                   double tol = kTol);

// Restriction of the measure: weights outside `keep` are zeroed, the
// metric is untouched. Requires base in keep.
MeasuredSpace restrict_measure(const MeasuredSpace& s, const std::vector<std::size_t>& keep);

// Basepoint dilation: distances divided by r, weights normalized by the
// mass of B(base, r). The result has unit mass at radius 1.
MeasuredSpace rescale(const MeasuredSpace& s, double r);

// JSON interchange.
//   distance-matrix file: {"n": int, "base": int, "dist": [[..]]}
//   point-cloud file:     {"dim": m, "norm": "linf"|"l2", "points": [[..]],
//                          "weights": [...], "base": int}
MeasuredSpace load_space(const nlohmann::json& j);
MeasuredSpace load_space_file(const std::string& path);
nlohmann::json space_to_json(const MeasuredSpace& s);

// Pulls the subspace on `idx` out of a host; the basepoint of the result
// is the position of `base_of` (defaults to host base, must be in idx).
PointedSpace extract_subspace(const PointedSpace& host, const std::vector<std::size_t>& idx,
                              std::optional<std::size_t> base_of = std::nullopt);

// Two spaces living inside one host with a shared basepoint.
struct EmbeddedPair {
    PointedSpace host;
    std::vector<std::size_t> left_idx, right_idx;
    std::vector<double> left_weight, right_weight;  // on host indices

    std::vector<std::string> validate(const PointedSpace& left,
                                      const PointedSpace& right) const;
};

// Uniform-grid nearest-neighbor index over low-dimensional sup-norm
// coordinates; used where brute force would be quadratic.
class GridIndex {
  public:
    GridIndex() = default;
    GridIndex(const std::vector<std::vector<double>>& pts, double cell);

    // Nearest point to q (ties -> lowest index); returns npos if empty.
    std::size_t nearest(const std::vector<double>& q) const;
    // All points within sup-distance r of q.
    std::vector<std::size_t> within(const std::vector<double>& q, double r) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  private:
    std::vector<long long> cell_of(const std::vector<double>& q) const;
    const std::vector<std::vector<double>>* pts_ = nullptr;
    double cell_ = 1.0;
    std::size_t dim_ = 0;
    std::unordered_map<long long, std::vector<std::size_t>> buckets_;
    long long key(const std::vector<long long>& c) const;
};

}  // namespace mmg
