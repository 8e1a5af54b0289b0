#pragma once

#include <string>
#include <vector>

#include "mmg/alignment.hpp"
#include "mmg/space.hpp"

namespace mmg {

enum class CoverMode { greedy_upper, exact_small };

struct CoverPiece {
    std::vector<std::size_t> members;
    double diam = 0.0;  // recorded covering diameter (cell size for binned covers)
};

struct CoverEstimate {
    double s = 0.0;
    double delta = 0.0;
    double value = 0.0;  // sum of diam^s over the cover
    std::vector<CoverPiece> cover;
    CoverMode mode = CoverMode::greedy_upper;
};

// Covering-sum estimate of the target set at mesh delta. Finite samples
// have vanishing exact covering sums, so the greedy estimator bins the
// sample at mesh delta and charges each occupied cell its full diameter
// (box-counting surrogate). exact_small computes the true optimal
// partition value of the sample (at most 15 points).
CoverEstimate content(const PointedSpace& space, const std::vector<std::size_t>& target,
                      double s, double delta, CoverMode mode);

struct DensityProfile {
    std::size_t point = 0;
    std::vector<double> scales;
    std::vector<double> ratio_2r;  // mass(B(x,r)) / (2r)^s
    std::vector<double> ratio_r;   // mass(B(x,r)) / r^s
    double window_min = 0.0, window_max = 0.0;  // over ratio_2r
};

DensityProfile density_profile(const MeasuredSpace& s, std::size_t point,
                               const std::vector<double>& scales, double dim);

struct DoublingRecord {
    std::size_t point = 0;
    double r = 0.0;
    double ratio = 0.0;
    bool positive = true;  // false marks a zero-mass inner ball
};

struct DoublingScan {
    std::vector<DoublingRecord> records;
    double max_ratio = 0.0;
    bool all_positive = true;
};

DoublingScan doubling_scan(const MeasuredSpace& s, const std::vector<double>& scales);

// A fitted chart from the grid on Phi = [-K(1+2delta), K(1+2delta)]^n to a
// rescaled local patch, with the band quality and a certified interval
// against the unit-window sub-grid of the fitted model.
struct ModelFit {
    std::vector<std::vector<double>> nodes;  // chart grid coordinates
    std::vector<std::size_t> chart;          // node -> local index
    double delta_fit = 0.0;                  // smallest band slack achieved
    DistanceEstimate dpgh;                   // vs the unit-window sub-grid
    double grid_spacing = 0.0;
};

// `local` must already carry the rescaled metric d/r with base at the
// patch center. The model class is sampled through fitted charts only, so
// the interval's upper bound is the certified quantity.
ModelFit bilip_model_fit(const PointedSpace& local, std::size_t n_dim, double K,
                         double delta, std::size_t grid_res,
                         const SearchBudget& budget = {});

struct GtaDensityRecord {
    std::size_t point = 0;
    double r = 0.0, mass = 0.0, bound = 0.0;
    bool pass = false;
};

struct GtaApproxRecord {
    std::size_t point = 0;
    double r = 0.0;
    std::size_t csize = 0;
    double defect = 0.0, defect_bound = 0.0;
    double dpgh_upper = 0.0, threshold = 0.0;
    double delta_fit = 0.0;
    bool pass = false;
    std::string note;
};

struct GtaReport {
    double eta = 0.0, K = 1.0, delta = 0.0, R0 = 0.0;
    std::vector<GtaDensityRecord> density;
    std::vector<GtaApproxRecord> approx;
    bool g_empty = false;
    bool pass = false;
};

// Checks the two tangential-approximation conditions over the given scale
// grid: the lower density bound on C, and for every point of G a large
// subset of the ball certified close to a fitted flat model. grid_res 0
// picks a chart resolution fine enough for the pass threshold.
GtaReport verify_gta(const MeasuredSpace& X, const std::vector<std::size_t>& C,
                     const std::vector<std::size_t>& G, double eta, double K,
                     double delta, double R0, const std::vector<double>& scales,
                     std::size_t n_dim, std::size_t grid_res = 0,
                     const SearchBudget& budget = {});

}  // namespace mmg
