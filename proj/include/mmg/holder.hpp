#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mmg/space.hpp"

namespace mmg {

// Derived quantities tying the bi-Lipschitz bound, the target Holder
// exponent and the per-level refinement together.
struct Constants {
    double K = 1.0, gamma = 0.5, eta = 1.0;
    std::size_t n = 1;
    int N = 1;            // refinement exponent: 2^N children per axis
    double alpha = 0.5;   // achieved Holder exponent
    double l = 0.5;       // 2^-N
    double sigma = 5.0;   // (5 K^2)^n per-level Lipschitz growth
    int M = 1;            // iteration offset in use
    int M_paper = 1;      // smallest integer above 2/alpha
    int m_grid = 1;       // coarse-grid depth N*M
    double lambda = 0.0;  // content constant (50 sigma^M l^-alpha)^n / eta

    std::vector<std::string> validate() const;
};

// N minimal with (5K^2)^n <= 2^{N(1-gamma)}; alpha solves the equality.
Constants solve_constants(double K, double gamma, std::size_t n, double eta);

// Re-derives the offset-dependent fields for a caller-chosen offset. The
// per-level Lipschitz budgets are validated separately against the seed
// constant, which is sharper than the blanket offset requirement.
Constants with_offset(Constants c, int M);

// beta_i = L sigma^{i-M} must stay below 1/(2 sigma l^i) for the level to
// extend; checked in logs to dodge under/overflow.
bool level_budget_ok(const Constants& c, double L, int level);

// Dyadic cube bookkeeping on [0,1]^n: integer lattice coordinates at the
// deepest materialized resolution, cubes addressed by base corner + level.
class CubeComplex {
  public:
    CubeComplex(std::size_t n, int N, int deepest_level);

    std::size_t dim() const { return n_; }
    int refinement() const { return N_; }
    int deepest() const { return deepest_; }
    long long side() const { return side_; }           // units across [0,1]
    long long step(int level) const;                   // lattice step of D(level)
    double unit() const { return unit_; }              // physical size of one unit

    // (2^{N i} + 1)^n
    std::size_t lattice_count(int level) const;

    using Pt = std::vector<long long>;
    std::vector<Pt> cube_bases(int level) const;       // all cubes of Q(level)
    std::vector<Pt> corners(const Pt& base, int level) const;
    std::vector<Pt> children(const Pt& base, int level) const;  // bases at level+1

    struct Face {
        Pt base;
        unsigned axes = 0;  // bitmask of free axes, popcount = dimension
        int level = 0;
    };
    std::vector<Face> faces(const Pt& base, int level, std::size_t m) const;
    std::vector<Face> boundary_faces(const Face& f) const;
    // D(sub_level) restricted to the face
    std::vector<Pt> face_lattice(const Face& f, int sub_level) const;
    std::vector<Pt> cube_lattice(const Pt& base, int level, int sub_level) const;

    long long key(const Pt& p) const;     // injective packing for maps
    long long face_key(const Face& f) const;
    std::vector<double> physical(const Pt& p) const;

  private:
    std::size_t n_;
    int N_, deepest_;
    long long side_;
    double unit_;
};

// Inf-convolution extension of a verified (alpha, H)-Holder function given
// on a subset; the result keeps constant H and stays inside [min f, max f].
std::vector<double> mcshane_extend(const PointedSpace& space,
                                   const std::vector<std::size_t>& domain,
                                   const std::vector<double>& f, double alpha, double H);

struct SplitResult {
    std::vector<std::size_t> good, bad;                 // positions into the cube list
    std::vector<std::size_t> witness;                   // good cube -> G atom
    double worst_witness_radius = 0.0;                  // vs the 2 beta l^i bound
    double worst_bad_gap = 0.0;                         // min G-distance over bad corners
};

struct HolderOptions {
    int M = 1;
    int depth = 1;
    std::size_t window_cubes = 0;        // telescope width; 0 extends everywhere
    std::vector<double> zoom_target;     // domain point steering the window
    std::size_t patch_res = 5;           // per-axis patch lattice inside bad cubes
    std::uint64_t audit_pair_cap = 3'000'000'000ULL;
};

struct BadBall {
    int level = 0;
    std::vector<long long> corner, cube;  // lattice corner and its cube base
    std::size_t atom = 0;
    double radius = 0.0;
    double g_gap = 0.0;  // measured distance to the nearest G atom
};

struct LevelSummary {
    int level = 0;
    double beta = 0.0;
    std::size_t cubes = 0, good = 0, bad = 0, offwindow = 0;
    double witness_worst = 0.0, witness_bound = 0.0;
    double saw_worst = 0.0, saw_bound = 0.0;  // chart selection slack
    double lip_worst = 0.0, lip_bound = 0.0;
    std::uint64_t lip_pairs = 0;
    double ancestor_worst = 0.0, ancestor_bound = 0.0;
    bool pass = false;
};

struct HolderCertificate {
    Constants constants;
    double L = 0.0;
    int depth = 0;
    bool windowed = false;
    std::size_t domain_points = 0, patched_points = 0;
    std::vector<LevelSummary> levels;
    std::vector<BadBall> balls;

    double holder_constant = 0.0, holder_exponent = 0.0, holder_worst = 0.0;
    std::uint64_t holder_pairs = 0;
    bool holder_pass = false;

    double bilip_bound = 0.0, bilip_worst = 0.0;  // seed grid, both directions
    bool bilip_pass = false;
    double neighbor_bound = 0.0, neighbor_worst = 0.0;
    bool neighbor_pass = false;

    std::size_t picked = 0;
    bool subcover_disjoint = false, coverage_pass = false, ball_density_pass = false,
         balls_avoid_g = false, balls_in_range = false;
    double content_lhs = 0.0, content_rhs = 0.0;
    bool content_pass = false;

    bool pass = false;
    nlohmann::json to_json() const;
};

// Full pipeline: seed on the level-M lattice by nearest-atom placement,
// iterate the skeleton extensions, assemble the certificate.
HolderCertificate holder_build(const MeasuredSpace& X, const std::vector<std::size_t>& C_idx,
                               const std::vector<std::size_t>& G_idx, double K, double gamma,
                               double eta, const HolderOptions& opt);

}  // namespace mmg
