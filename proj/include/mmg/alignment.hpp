#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmg/flat.hpp"
#include "mmg/hausdorff.hpp"
#include "mmg/space.hpp"

namespace mmg {

enum class Provenance { searched, from_hausdorff, user };
enum class EstimateMethod { exact_small, branch_bound, local_search };

// Basepoint-preserving map with additive distortion eps on the window
// B(base, 1/eps) and eps-coarse surjectivity onto B(base_right, 1/eps-eps).
struct EpsIsometry {
    static constexpr std::size_t unmapped = static_cast<std::size_t>(-1);
    double eps = 0.0;
    std::vector<std::size_t> map;  // left index -> right index, unmapped outside window
    Provenance provenance = Provenance::user;
};

struct IsometryCheck {
    bool pass = false;
    double worst_distortion = 0.0;  // max |rho(f a, f b) - d(a, b)| over window pairs
    double worst_coverage = 0.0;    // max dist from a required right point to the image
    std::vector<std::string> violations;
};

IsometryCheck check_eps_isometry(const PointedSpace& left, const PointedSpace& right,
                                 const EpsIsometry& cand, double tol = kTol);

// Constructive half of the equivalence: a Hausdorff-close pair inside a
// common host yields a nearest-point matching that verifies at 2*eps.
EpsIsometry eps_isometry_from_hausdorff(const SubsetPair& pair, double eps);

// Two spaces glued along their basepoints. Index layout: 0 is the shared
// basepoint, then left non-base points, then right non-base points.
struct Coupling {
    PointedSpace glued;
    std::vector<std::size_t> left_pos, right_pos;   // original index -> glued index
    std::vector<double> left_weight, right_weight;  // measures carried onto glued

    std::size_t base() const { return 0; }
    std::vector<std::size_t> left_set() const;
    std::vector<std::size_t> right_set() const;

    // Exhaustive triangle check plus exact restriction to both factors.
    std::vector<std::string> validate(const PointedSpace& left,
                                      const PointedSpace& right) const;

    double hausdorff_value() const;           // H_z of the two images
    double flat_value(double tol = 1e-6) const;  // basepointed flat metric of the measures
};

// Explicit cross-distance gluing from a verified eps-isometry.
Coupling coupling_from_eps_isometry(const MeasuredSpace& left, const MeasuredSpace& right,
                                    const EpsIsometry& iso);

struct SearchBudget {
    std::uint64_t node_cap = 2'000'000;  // backtracking nodes for exact search
    int sweeps = 100;                    // cross-matrix repair sweeps
    int improve_rounds = 3;              // map improvement passes
    std::uint64_t seed = 0;
    std::size_t exact_small_max = 10;    // per-side cap for the exact method
};

struct DistanceEstimate {
    double lower = 0.0;
    double upper = 0.5;
    EstimateMethod method = EstimateMethod::local_search;
    std::optional<Coupling> witness_upper;
    double best_eps = 0.0;  // minimal verified eps-isometry level (exact method)
};

DistanceEstimate estimate_dpgh(const PointedSpace& left, const PointedSpace& right,
                               const SearchBudget& budget = {});
DistanceEstimate estimate_dpmgh(const MeasuredSpace& left, const MeasuredSpace& right,
                                const SearchBudget& budget = {});
DistanceEstimate estimate_dstar(const MeasuredSpace& left, const MeasuredSpace& right,
                                const SearchBudget& budget = {});

struct LargeSubsetPair {
    std::vector<std::size_t> k_mu, k_nu;  // glued-host indices
    double mass_defect_mu = 0.0, mass_defect_nu = 0.0;
    double defect_bound = 0.0;       // (1+delta) * F^{1/eps,r} of the pair
    double hausdorff_between = 0.0;  // exact H_z(K_mu, K_nu) in the glued host
    double hausdorff_bound = 0.0;    // max(1/(r-eps), eps)
    DistanceEstimate pmgh_between;
};

// Constructive subset extraction inside a coupling: carve the sets via the
// explicit 1/eps-Lipschitz bump and certify both the mass-defect and the
// Hausdorff bounds.
LargeSubsetPair extract_large_subsets(const Coupling& c, double r, double eps,
                                      double delta = 1e-3);

struct SandwichReport {
    bool conclusive = false;
    double eps = 0.0;
    double coupling_flat = 0.0;       // flat value of the witness coupling
    double defect_mu = 0.0, defect_nu = 0.0;
    double hausdorff_between = 0.0;
    double restricted_flat_lr = 0.0;  // F^{1/eps,1/eps} of the restricted measures
    double restricted_flat = 0.0;     // flat metric level of the restricted measures
    double pmgh_level = 0.0;          // max of Hausdorff level and flat level
    double pmgh_sum_upper = 0.0;      // H_z + flat of the restricted pair
    double dstar_triangle_upper = 0.0;  // converse direction: sum of three legs
    bool forward_pass = false;        // defects < eps, pmgh_level < 3 eps
    bool converse_pass = false;       // triangle upper < 3 eps
    LargeSubsetPair subsets;
};

SandwichReport dstar_sandwich(const MeasuredSpace& left, const MeasuredSpace& right,
                              double eps, const SearchBudget& budget = {});

struct DoublingBound {
    double bound = 0.0;          // 4R(eps/delta)^{1/k} + eps
    double eps_measured = 0.0;   // mass of B(x,2R) outside the subset
    bool ref_bound_ok = false;   // R > 1 / (4R(eps/delta)^{1/k})
    double identity_upper = 0.0; // basepointed flat+Hausdorff upper in the space itself
    double max_ratio = 0.0;      // worst doubling ratio seen in the scan
};

// Quantitative bound for dropping a small-mass subset from a doubling
// space; verifies 2^k-doubling over dyadic scales up to 2R first.
DoublingBound doubling_subset_bound(const MeasuredSpace& s,
                                    const std::vector<std::size_t>& subset, double R,
                                    double delta, double k);

// Helpers shared with other modules.
MeasuredSpace subspace_measured(const MeasuredSpace& host, const std::vector<std::size_t>& idx,
                                std::optional<std::size_t> base_of = std::nullopt);
double radial_hausdorff_lower(const PointedSpace& left, const PointedSpace& right);

}  // namespace mmg
