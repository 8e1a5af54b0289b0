#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmg/alignment.hpp"
#include "mmg/space.hpp"

namespace mmg {

struct BlowupSequence {
    std::size_t point = 0;
    std::vector<double> scales;
    std::vector<MeasuredSpace> blowups;                 // rescaled and windowed
    std::vector<std::vector<std::size_t>> window_ties;  // atoms on the window boundary
    double window = 8.0;
};

// Basepoint dilation at each scale followed by restriction to the closed
// window ball; every blowup carries unit mass at radius one.
BlowupSequence blowup(const MeasuredSpace& s, std::size_t point,
                      const std::vector<double>& scales, double window = 8.0);

// Lattice sample of an n-dimensional normed model, normalized so the unit
// ball carries mass one. The gauge is given by per-axis scales under the
// chosen norm; coordinates are stored in the gauge-straightened frame.
MeasuredSpace model_tangent(const std::vector<double>& axes, std::size_t n,
                            double resolution, double window, Norm norm = Norm::Linf);

// Deterministic cell aggregation on the lattice through the basepoint.
MeasuredSpace aggregate_atoms(const MeasuredSpace& s, double cell);

struct FlatnessRecord {
    std::size_t point = 0;
    double scale = 0.0;
    double lower = 0.0, upper = 0.5;
    double model_spacing = 0.0;
    std::size_t atoms = 0;
    bool failed = false;
    std::string note;
};

struct FlatnessReport {
    std::vector<FlatnessRecord> records;
    std::vector<std::size_t> points;
    std::vector<double> scales;
    std::size_t dim = 1;
    // per point: worst upper over its scales
    std::vector<double> worst_upper;
};

struct ScanParams {
    std::size_t dim = 1;
    double window = 4.0;
    std::size_t atom_cap = 300;   // aggregation budget per blowup
    double flat_tol = 1e-3;       // bisection tolerance for the scores
    double poor_threshold = 0.2;  // gauge fit above this tries a chart fit
    unsigned threads = 1;
};

FlatnessReport flatness_scan(const MeasuredSpace& s, const std::vector<std::size_t>& points,
                             const std::vector<double>& scales, const ScanParams& params);

enum class FixtureKind {
    segment,
    lipschitz_graph,
    linf_plane_patch,
    four_corner_cantor,
    scattered_dust_curve,
};

struct FixtureParams {
    std::size_t count = 1001;   // atoms along the main direction
    std::size_t generation = 4; // cantor depth
    double slope = 0.5;         // graph slope bound
};

struct Fixture {
    FixtureKind kind = FixtureKind::segment;
    MeasuredSpace space;
    bool rectifiable = true;
    std::size_t dim = 1;
    std::string name;
};

Fixture generate(FixtureKind kind, const FixtureParams& params, std::uint64_t seed);

struct SeparationRow {
    std::string name;
    bool rectifiable_truth = true;
    bool rectifiable_verdict = true;
    double median_score = 0.0, max_score = 0.0;
    std::size_t points_below = 0, points_total = 0;
};

struct SeparationTable {
    double tau = 0.0;  // 2x the calibration fixture's 95th percentile
    std::vector<SeparationRow> rows;
    std::size_t confusion = 0;
};

// Runs the scan per fixture; the threshold is calibrated on the first
// fixture with kind == segment.
SeparationTable separation_experiment(const std::vector<Fixture>& fixtures,
                                      const std::vector<double>& scales,
                                      const ScanParams& params,
                                      std::size_t points_per_fixture = 8);

}  // namespace mmg
