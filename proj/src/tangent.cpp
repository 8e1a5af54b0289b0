#include "mmg/tangent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "mmg/util.hpp"

namespace mmg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

BlowupSequence blowup(const MeasuredSpace& s, std::size_t point,
                      const std::vector<double>& scales, double window) {
    if (point >= s.size()) throw DomainError("blowup point out of range");
    BlowupSequence out;
    out.point = point;
    out.scales = scales;
    out.window = window;
    for (double r : scales) {
        if (r <= 0.0) throw DomainError("blowup scale must be positive");
        if (s.ball_mass(point, r) <= 0.0)
            throw DomainError("degenerate scale " + std::to_string(r) +
                              ": zero mass around the point");
        // basepoint dilation centered at the blowup point
        MeasuredSpace scaled;
        if (s.space.has_coords()) {
            auto coords = s.space.coords();
            for (auto& p : coords)
                for (double& c : p) c /= r;
            scaled.space = PointedSpace::from_points(std::move(coords), s.space.norm(), point);
        } else {
            std::size_t n = s.size();
            std::vector<double> m(n * n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) m[i * n + j] = s.space.dist(i, j) / r;
            scaled.space = PointedSpace::from_matrix(n, point, std::move(m));
        }
        scaled.weight = s.weight;
        double mass = s.ball_mass(point, r);
        for (double& w : scaled.weight) w /= mass;

        std::vector<std::size_t> keep, ties;
        for (std::size_t i = 0; i < scaled.size(); ++i) {
            double d = scaled.space.dist(point, i);
            if (window == kInf || d <= window + kTightTol) keep.push_back(i);
            if (window != kInf && std::fabs(d - window) <= kTol) ties.push_back(i);
        }
        MeasuredSpace windowed;
        if (scaled.space.has_coords()) {
            std::vector<std::vector<double>> pc;
            std::vector<double> w;
            std::size_t base_pos = 0;
            pc.reserve(keep.size());
            for (std::size_t a = 0; a < keep.size(); ++a) {
                if (keep[a] == point) base_pos = a;
                pc.push_back(scaled.space.coords()[keep[a]]);
                w.push_back(scaled.weight[keep[a]]);
            }
            windowed.space =
                PointedSpace::from_points(std::move(pc), scaled.space.norm(), base_pos);
            windowed.weight = std::move(w);
        } else {
            windowed = subspace_measured(scaled, keep, point);
        }
        out.blowups.push_back(std::move(windowed));
        out.window_ties.push_back(std::move(ties));
    }
    return out;
}

MeasuredSpace model_tangent(const std::vector<double>& axes, std::size_t n,
                            double resolution, double window, Norm norm) {
    if (n == 0 || axes.size() != n) throw DomainError("gauge dimension mismatch");
    for (double a : axes)
        if (!(a > 0.0)) throw DomainError("degenerate gauge axis");
    if (resolution <= 0.0 || window <= 0.0)
        throw DomainError("model needs positive resolution and window");
    // gauge-straightened frame: the norm ball is the standard ball, so the
    // cell mass is h^n times (2^n / Lebesgue of the unit ball)
    double unit_ball = 1.0;
    if (norm == Norm::Linf) {
        for (std::size_t k = 0; k < n; ++k) unit_ball *= 2.0;
    } else {
        // Lebesgue volume of the Euclidean unit ball
        if (n == 1)
            unit_ball = 2.0;
        else if (n == 2)
            unit_ball = M_PI;
        else
            unit_ball = 4.0 * M_PI / 3.0;
    }
    double cell_mass = std::pow(resolution, double(n)) *
                       (std::pow(2.0, double(n)) / unit_ball) / std::pow(2.0, double(n));
    long long reach = static_cast<long long>(std::floor(window / resolution + kTightTol));
    std::vector<std::vector<double>> pts;
    std::vector<long long> idx(n, -reach);
    while (true) {
        std::vector<double> p(n);
        for (std::size_t k = 0; k < n; ++k) p[k] = double(idx[k]) * resolution;
        double g = 0.0;
        if (norm == Norm::Linf) {
            for (double c : p) g = std::max(g, std::fabs(c));
        } else {
            for (double c : p) g += c * c;
            g = std::sqrt(g);
        }
        if (g <= window + kTightTol) pts.push_back(std::move(p));
        std::size_t k = 0;
        while (k < n && ++idx[k] > reach) idx[k++] = -reach;
        if (k == n) break;
    }
    std::size_t base = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool zero = true;
        for (double c : pts[i]) zero = zero && c == 0.0;
        if (zero) base = i;
    }
    MeasuredSpace out{PointedSpace::from_points(std::move(pts), norm, base),
                      std::vector<double>(0)};
    out.weight.assign(out.size(), cell_mass);
    // pin the lattice to the same convention the dilations use: the unit
    // ball carries mass exactly one
    double unit_mass = out.ball_mass(base, 1.0);
    if (unit_mass <= 0.0) throw DomainError("model window too small for its resolution");
    for (double& w : out.weight) w /= unit_mass;
    return out;
}

MeasuredSpace aggregate_atoms(const MeasuredSpace& s, double cell) {
    if (!s.space.has_coords()) throw DomainError("aggregation needs coordinates");
    if (cell <= 0.0) throw DomainError("aggregation cell must be positive");
    const auto& base_c = s.space.coords()[s.base()];
    std::map<std::vector<long long>, double> cells;
    std::size_t dim = s.space.ambient_dim();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.weight[i] <= 0.0 && i != s.base()) continue;
        std::vector<long long> key(dim);
        for (std::size_t k = 0; k < dim; ++k)
            key[k] = static_cast<long long>(
                std::floor((s.space.coords()[i][k] - base_c[k]) / cell + 0.5));
        cells[key] += s.weight[i];
    }
    std::vector<std::vector<double>> pts;
    std::vector<double> w;
    std::size_t base = 0;
    for (const auto& kv : cells) {
        bool zero = true;
        std::vector<double> p(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            p[k] = base_c[k] + double(kv.first[k]) * cell;
            zero = zero && kv.first[k] == 0;
        }
        if (zero) base = pts.size();
        pts.push_back(std::move(p));
        w.push_back(kv.second);
    }
    return {PointedSpace::from_points(std::move(pts), s.space.norm(), base), std::move(w)};
}

namespace {

double median_spacing(const MeasuredSpace& s) {
    std::vector<double> nn;
    std::size_t step = std::max<std::size_t>(1, s.size() / 64);
    for (std::size_t i = 0; i < s.size(); i += step) {
        double d = kInf;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (j == i) continue;
            double v = s.space.dist(i, j);
            if (v > 0 && v < d) d = v;
        }
        if (d < kInf) nn.push_back(d);
    }
    if (nn.empty()) return 1.0;
    std::sort(nn.begin(), nn.end());
    return nn[nn.size() / 2];
}

FlatnessRecord scan_record(const MeasuredSpace& s, std::size_t point, double scale,
                           const ScanParams& params) {
    FlatnessRecord rec;
    rec.point = point;
    rec.scale = scale;
    try {
        auto bs = blowup(s, point, {scale}, params.window);
        MeasuredSpace raw = std::move(bs.blowups[0]);
        double spacing = median_spacing(raw);
        // snap the model lattice to the data and respect the atom budget;
        // aggregation always bins the raw blowup in one pass
        MeasuredSpace local = raw;
        while (local.size() > params.atom_cap) {
            local = aggregate_atoms(raw, spacing);
            // odd ratios keep the cells centered on the data lattice
            if (local.size() > params.atom_cap) spacing *= 3.0;
        }
        std::size_t n = params.dim;
        std::vector<double> axes(n, 1.0);
        double h = spacing;
        // a shared trimmed window keeps rim cells identical on both sides
        double w_eff = std::max(1.5, params.window - 1.5 * h);
        {
            std::vector<std::size_t> keep;
            for (std::size_t i = 0; i < local.size(); ++i)
                if (local.space.dist(local.base(), i) <= w_eff + kTightTol)
                    keep.push_back(i);
            std::vector<std::vector<double>> pc;
            std::vector<double> w;
            std::size_t base_pos = 0;
            for (std::size_t a = 0; a < keep.size(); ++a) {
                if (keep[a] == local.base()) base_pos = a;
                pc.push_back(local.space.coords()[keep[a]]);
                w.push_back(local.weight[keep[a]]);
            }
            local.space = PointedSpace::from_points(std::move(pc), local.space.norm(),
                                                    base_pos);
            local.weight = std::move(w);
        }
        MeasuredSpace model = model_tangent(axes, n, h, w_eff, Norm::Linf);
        while (model.size() > 4 * params.atom_cap) {
            h *= 3.0;
            model = model_tangent(axes, n, h, w_eff, Norm::Linf);
        }
        rec.model_spacing = h;
        rec.atoms = local.size();
        SearchBudget budget;
        budget.improve_rounds = 1;
        auto est = estimate_dstar(local, model, budget);
        rec.lower = est.lower;
        rec.upper = est.upper;
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.note = e.what();
    }
    return rec;
}

}  // namespace

FlatnessReport flatness_scan(const MeasuredSpace& s, const std::vector<std::size_t>& points,
                             const std::vector<double>& scales, const ScanParams& params) {
    FlatnessReport rep;
    rep.points = points;
    rep.scales = scales;
    rep.dim = params.dim;
    rep.records.resize(points.size() * scales.size());
    parallel_for(rep.records.size(), params.threads, [&](std::size_t t) {
        std::size_t pi = t / scales.size(), si = t % scales.size();
        rep.records[t] = scan_record(s, points[pi], scales[si], params);
    });
    rep.worst_upper.assign(points.size(), 0.0);
    for (std::size_t pi = 0; pi < points.size(); ++pi)
        for (std::size_t si = 0; si < scales.size(); ++si) {
            const auto& rec = rep.records[pi * scales.size() + si];
            rep.worst_upper[pi] =
                std::max(rep.worst_upper[pi], rec.failed ? 0.5 : rec.upper);
        }
    return rep;
}

// ---------------------------------------------------------------------------
// fixtures

Fixture generate(FixtureKind kind, const FixtureParams& params, std::uint64_t seed) {
    Fixture out;
    out.kind = kind;
    std::mt19937_64 rng(split_seed(seed, static_cast<std::uint64_t>(kind)));
    switch (kind) {
        case FixtureKind::segment: {
            std::size_t count = params.count;
            if (count < 2) throw DomainError("segment needs at least two atoms");
            std::vector<std::vector<double>> pts(count);
            for (std::size_t i = 0; i < count; ++i)
                pts[i] = {double(i) / double(count - 1)};
            std::vector<double> w(count, 1.0 / double(count));
            out.space = {PointedSpace::from_points(pts, Norm::Linf, 0), w};
            out.rectifiable = true;
            out.dim = 1;
            out.name = "segment";
            break;
        }
        case FixtureKind::lipschitz_graph: {
            std::size_t count = params.count;
            if (count < 2) throw DomainError("graph needs at least two atoms");
            double dt = 1.0 / double(count - 1);
            std::uniform_real_distribution<double> u(-params.slope, params.slope);
            std::vector<std::vector<double>> pts(count);
            double y = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                pts[i] = {double(i) * dt, y};
                y += u(rng) * dt;
            }
            std::vector<double> w(count, 1.0 / double(count));
            out.space = {PointedSpace::from_points(pts, Norm::Linf, 0), w};
            out.rectifiable = true;
            out.dim = 1;
            out.name = "lipschitz_graph";
            break;
        }
        case FixtureKind::linf_plane_patch: {
            std::size_t side = std::max<std::size_t>(
                2, static_cast<std::size_t>(std::lround(std::sqrt(double(params.count)))));
            double h = 1.0 / double(side - 1);
            std::vector<std::vector<double>> pts;
            pts.reserve(side * side);
            for (std::size_t i = 0; i < side; ++i)
                for (std::size_t j = 0; j < side; ++j)
                    pts.push_back({double(i) * h, double(j) * h});
            std::vector<double> w(pts.size(), 1.0 / double(pts.size()));
            std::size_t base = (side / 2) * side + side / 2;
            out.space = {PointedSpace::from_points(pts, Norm::Linf, base), w};
            out.rectifiable = true;
            out.dim = 2;
            out.name = "linf_plane_patch";
            break;
        }
        case FixtureKind::four_corner_cantor: {
            std::size_t g = params.generation;
            std::vector<std::vector<double>> pts{{0.0, 0.0}};
            double side = 1.0;
            for (std::size_t lvl = 0; lvl < g; ++lvl) {
                side /= 4.0;
                std::vector<std::vector<double>> next;
                next.reserve(pts.size() * 4);
                for (const auto& p : pts) {
                    next.push_back({p[0], p[1]});
                    next.push_back({p[0] + 3.0 * side, p[1]});
                    next.push_back({p[0], p[1] + 3.0 * side});
                    next.push_back({p[0] + 3.0 * side, p[1] + 3.0 * side});
                }
                pts = std::move(next);
            }
            // atoms at cell centers
            for (auto& p : pts) {
                p[0] += side / 2.0;
                p[1] += side / 2.0;
            }
            std::vector<double> w(pts.size(), 1.0 / double(pts.size()));
            out.space = {PointedSpace::from_points(pts, Norm::Linf, 0), w};
            out.rectifiable = false;
            out.dim = 1;
            out.name = "four_corner_cantor";
            break;
        }
        case FixtureKind::scattered_dust_curve: {
            std::size_t count = params.count;
            std::vector<std::vector<double>> pts(count);
            std::vector<double> w(count, 1.0 / double(count));
            for (std::size_t i = 0; i < count; ++i)
                pts[i] = {double(i) / double(count - 1), 0.0};
            // dust at every dyadic scale with vanishing relative mass
            for (int k = 2; k <= 7; ++k) {
                double r = std::pow(2.0, -k);
                std::size_t m = std::size_t{1} << k;
                double level_mass = 5e-3 * r;
                for (std::size_t j = 0; j < m; ++j) {
                    pts.push_back({(double(j) + 0.5) * r, 2.0 * r});
                    w.push_back(level_mass / double(m));
                }
            }
            out.space = {PointedSpace::from_points(pts, Norm::Linf, 0), std::move(w)};
            out.rectifiable = true;
            out.dim = 1;
            out.name = "scattered_dust_curve";
            break;
        }
    }
    return out;
}

SeparationTable separation_experiment(const std::vector<Fixture>& fixtures,
                                      const std::vector<double>& scales,
                                      const ScanParams& base_params,
                                      std::size_t points_per_fixture) {
    SeparationTable table;
    std::vector<FlatnessReport> reports(fixtures.size());
    std::vector<std::vector<std::size_t>> samples(fixtures.size());

    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        const auto& fx = fixtures[f];
        // deterministic interior-biased sample of the support
        std::vector<std::size_t> spt;
        double r_max = *std::max_element(scales.begin(), scales.end());
        double margin = base_params.window * r_max;
        for (std::size_t i = 0; i < fx.space.size(); ++i) {
            if (fx.space.weight[i] <= 0.0) continue;
            const auto& p = fx.space.space.coords()[i];
            bool interior = true;
            if (fx.kind != FixtureKind::four_corner_cantor)
                interior = p[0] >= margin && p[0] <= 1.0 - margin;
            if (fx.kind == FixtureKind::linf_plane_patch)
                interior = interior && p[1] >= margin && p[1] <= 1.0 - margin;
            if (fx.kind == FixtureKind::scattered_dust_curve)
                interior = interior && p[1] == 0.0;  // scan along the curve itself
            if (interior) spt.push_back(i);
        }
        if (spt.empty()) throw DomainError("no interior sample points for " + fx.name);
        std::size_t step = std::max<std::size_t>(1, spt.size() / points_per_fixture);
        for (std::size_t i = 0; i < spt.size() && samples[f].size() < points_per_fixture;
             i += step)
            samples[f].push_back(spt[i]);

        ScanParams params = base_params;
        params.dim = fx.dim;
        reports[f] = flatness_scan(fx.space, samples[f], scales, params);
    }

    // calibrate on the first segment fixture
    double tau = 0.0;
    bool calibrated = false;
    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        if (fixtures[f].kind != FixtureKind::segment) continue;
        auto scores = reports[f].worst_upper;
        std::sort(scores.begin(), scores.end());
        std::size_t q = std::min(scores.size() - 1,
                                 static_cast<std::size_t>(0.95 * double(scores.size())));
        tau = 2.0 * scores[q];
        calibrated = true;
        break;
    }
    if (!calibrated) throw DomainError("the experiment needs a segment fixture to calibrate");
    // scores below the bisection resolution are indistinguishable from zero
    tau = std::max(tau, 10.0 * base_params.flat_tol);
    table.tau = tau;

    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        SeparationRow row;
        row.name = fixtures[f].name;
        row.rectifiable_truth = fixtures[f].rectifiable;
        auto scores = reports[f].worst_upper;
        std::sort(scores.begin(), scores.end());
        row.points_total = scores.size();
        for (double v : scores)
            if (v <= tau) ++row.points_below;
        row.median_score = scores[scores.size() / 2];
        row.max_score = scores.back();
        row.rectifiable_verdict = row.points_below * 2 >= row.points_total;
        if (row.rectifiable_verdict != row.rectifiable_truth) ++table.confusion;
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace mmg
