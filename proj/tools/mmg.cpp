// Command-line front end: every verb reads JSON, runs one library
// operation and emits a JSON report with the echoed configuration.

#include <fstream>
#include <iostream>
#include <limits>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmg/alignment.hpp"
#include "mmg/hausdorff.hpp"
#include "mmg/holder.hpp"
#include "mmg/measure_geometry.hpp"
#include "mmg/tangent.hpp"

using nlohmann::json;
using namespace mmg;

namespace {

constexpr const char* kVersion = "mmg 0.1.0";

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path);
    json j;
    in >> j;
    return j;
}

std::vector<double> load_weights(const std::string& path) {
    json j = load_json(path);
    if (j.is_array()) return j.get<std::vector<double>>();
    return j.at("weights").get<std::vector<double>>();
}

std::vector<std::size_t> load_indices(const std::string& path) {
    json j = load_json(path);
    if (j.is_array()) return j.get<std::vector<std::size_t>>();
    return j.at("indices").get<std::vector<std::size_t>>();
}

void emit(const json& report, const std::string& out) {
    if (out.empty()) {
        std::cout << report.dump(2) << "\n";
    } else {
        std::ofstream f(out);
        f << report.dump(2) << "\n";
    }
}

json estimate_to_json(const DistanceEstimate& est) {
    const char* method = est.method == EstimateMethod::exact_small ? "exact_small"
                         : est.method == EstimateMethod::branch_bound ? "branch_bound"
                                                                      : "local_search";
    return {{"lower", est.lower}, {"upper", est.upper}, {"method", method}};
}

json coupling_to_json(const Coupling& c) {
    json j;
    std::size_t n = c.glued.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) m[i][k] = c.glued.dist(i, k);
    j["host"] = {{"n", n}, {"base", 0}, {"dist", m}};
    j["left_pos"] = c.left_pos;
    j["right_pos"] = c.right_pos;
    j["left_weight"] = c.left_weight;
    j["right_weight"] = c.right_weight;
    return j;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite pointed metric measure space toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::uint64_t budget = 2'000'000;
    std::string out;
    app.add_option("--seed", seed, "deterministic seed echoed into reports");
    app.add_option("--threads", threads, "worker threads for per-record maps");
    app.add_option("--budget", budget, "search node budget");
    app.add_option("--out", out, "write the report to this path");

    // --- flat -------------------------------------------------------------
    auto* flat_cmd = app.add_subcommand("flat", "bounded-Lipschitz flat metric");
    std::string f_host, f_mu, f_nu;
    double f_L = 0.0, f_r = 0.0;
    flat_cmd->add_option("--host", f_host)->required();
    flat_cmd->add_option("--mu", f_mu)->required();
    flat_cmd->add_option("--nu", f_nu)->required();
    flat_cmd->add_option("--L", f_L);
    flat_cmd->add_option("--r", f_r);

    // --- hz ---------------------------------------------------------------
    auto* hz_cmd = app.add_subcommand("hz", "local Hausdorff pseudometric");
    std::string h_host, h_left, h_right;
    hz_cmd->add_option("--host", h_host)->required();
    hz_cmd->add_option("--left", h_left)->required();
    hz_cmd->add_option("--right", h_right)->required();

    // --- alignment estimates ------------------------------------------------
    std::string a_left, a_right;
    auto* dpgh_cmd = app.add_subcommand("dpgh", "pointed Gromov-Hausdorff estimate");
    auto* dpmgh_cmd = app.add_subcommand("dpmgh", "pointed measured GH estimate");
    auto* dstar_cmd = app.add_subcommand("dstar", "basepointed measure distance estimate");
    for (auto* c : {dpgh_cmd, dpmgh_cmd, dstar_cmd}) {
        c->add_option("--left", a_left)->required();
        c->add_option("--right", a_right)->required();
    }

    // --- measure geometry ---------------------------------------------------
    auto* content_cmd = app.add_subcommand("content", "covering-sum estimate");
    std::string c_space, c_target;
    double c_s = 1.0;
    std::string c_delta = "inf";
    std::string c_mode = "greedy";
    content_cmd->add_option("--space", c_space)->required();
    content_cmd->add_option("--target", c_target);
    content_cmd->add_option("--s", c_s)->required();
    content_cmd->add_option("--delta", c_delta);
    content_cmd->add_option("--mode", c_mode)->check(CLI::IsMember({"greedy", "exact"}));

    auto* density_cmd = app.add_subcommand("density", "density ratio profile");
    std::string d_space;
    std::size_t d_point = 0;
    std::vector<double> d_scales;
    double d_dim = 1.0;
    density_cmd->add_option("--space", d_space)->required();
    density_cmd->add_option("--point", d_point)->required();
    density_cmd->add_option("--scales", d_scales)->required();
    density_cmd->add_option("--dim", d_dim)->required();

    auto* doubling_cmd = app.add_subcommand("doubling", "doubling ratio scan");
    std::string db_space;
    std::vector<double> db_scales;
    doubling_cmd->add_option("--space", db_space)->required();
    doubling_cmd->add_option("--scales", db_scales)->required();

    auto* gta_cmd = app.add_subcommand("gta", "tangential approximation verifier");
    std::string g_space, g_c, g_g;
    double g_eta = 1.0, g_K = 1.0, g_delta = 0.25, g_R0 = 1.0;
    std::vector<double> g_scales;
    std::size_t g_dim = 2, g_res = 0;
    gta_cmd->add_option("--space", g_space)->required();
    gta_cmd->add_option("--C", g_c)->required();
    gta_cmd->add_option("--G", g_g)->required();
    gta_cmd->add_option("--eta", g_eta)->required();
    gta_cmd->add_option("--K", g_K)->required();
    gta_cmd->add_option("--delta", g_delta)->required();
    gta_cmd->add_option("--R0", g_R0)->required();
    gta_cmd->add_option("--scales", g_scales)->required();
    gta_cmd->add_option("--dim", g_dim)->required();
    gta_cmd->add_option("--grid-res", g_res);

    // --- construction ---------------------------------------------------------
    auto* hb_cmd = app.add_subcommand("holder-build", "multiscale surface construction");
    std::string hb_space, hb_c, hb_g;
    double hb_K = 1.0, hb_gamma = 0.5, hb_eta = 1.0;
    int hb_depth = 1, hb_M = 1;
    std::size_t hb_window = 0;
    std::vector<double> hb_zoom;
    hb_cmd->add_option("--space", hb_space)->required();
    hb_cmd->add_option("--C", hb_c);
    hb_cmd->add_option("--G", hb_g);
    hb_cmd->add_option("--K", hb_K)->required();
    hb_cmd->add_option("--gamma", hb_gamma)->required();
    hb_cmd->add_option("--eta", hb_eta)->required();
    hb_cmd->add_option("--depth", hb_depth)->required();
    hb_cmd->add_option("--M", hb_M);
    hb_cmd->add_option("--window", hb_window);
    hb_cmd->add_option("--zoom", hb_zoom);

    // --- tangents ---------------------------------------------------------------
    auto* blow_cmd = app.add_subcommand("blowup", "basepoint dilations");
    std::string b_space;
    std::size_t b_point = 0;
    std::vector<double> b_scales;
    double b_window = 8.0;
    blow_cmd->add_option("--space", b_space)->required();
    blow_cmd->add_option("--point", b_point)->required();
    blow_cmd->add_option("--scales", b_scales)->required();
    blow_cmd->add_option("--window", b_window);

    auto* scan_cmd = app.add_subcommand("scan", "flatness scores per point and scale");
    std::string s_space;
    std::vector<std::size_t> s_points;
    std::vector<double> s_scales;
    std::size_t s_dim = 1;
    double s_window = 4.0;
    scan_cmd->add_option("--space", s_space)->required();
    scan_cmd->add_option("--points", s_points)->required();
    scan_cmd->add_option("--scales", s_scales)->required();
    scan_cmd->add_option("--dim", s_dim)->required();
    scan_cmd->add_option("--window", s_window);

    auto* gen_cmd = app.add_subcommand("generate", "labeled fixtures");
    std::string gen_kind = "segment";
    std::size_t gen_count = 1001, gen_generation = 4;
    double gen_slope = 0.5;
    gen_cmd->add_option("--kind", gen_kind)
        ->check(CLI::IsMember({"segment", "lipschitz_graph", "linf_plane_patch",
                               "four_corner_cantor", "scattered_dust_curve"}));
    gen_cmd->add_option("--count", gen_count);
    gen_cmd->add_option("--generation", gen_generation);
    gen_cmd->add_option("--slope", gen_slope);

    auto* sep_cmd = app.add_subcommand("separate", "rectifiability separation table");
    std::size_t sep_points = 8;
    std::vector<double> sep_scales{1.0 / 32.0, 1.0 / 64.0};
    double sep_window = 4.0;
    sep_cmd->add_option("--points", sep_points);
    sep_cmd->add_option("--scales", sep_scales);
    sep_cmd->add_option("--window", sep_window);

    CLI11_PARSE(app, argc, argv);

    json report;
    report["version"] = kVersion;
    report["seed"] = seed;
    int status = 0;

    try {
        if (*flat_cmd) {
            auto host = load_space_file(f_host);
            auto mu = load_weights(f_mu);
            auto nu = load_weights(f_nu);
            report["config"] = {{"host", f_host}, {"mu", f_mu}, {"nu", f_nu},
                                {"L", f_L},       {"r", f_r}};
            if (f_L > 0.0 && f_r > 0.0) {
                FlatProblem p{host.space, mu, nu, f_L, f_r};
                auto sol = flat_lr(p);
                report["value"] = sol.value;
                report["witness"] = sol.witness;
                report["active"] = sol.active;
                report["feasibility"] = verify_flat_solution(p, sol);
            } else if (f_L > 0.0) {
                report["value"] = flat_L(host.space, mu, nu, f_L);
            } else {
                report["value"] = flat(host.space, mu, nu);
            }
        } else if (*hz_cmd) {
            auto host = load_space_file(h_host);
            SubsetPair p{host.space, load_indices(h_left), load_indices(h_right)};
            auto res = local_hausdorff(p);
            report["config"] = {{"host", h_host}, {"left", h_left}, {"right", h_right}};
            report["value"] = res.value;
            report["critical_eps"] = res.critical_eps;
            report["critical_index"] = res.critical_index;
        } else if (*dpgh_cmd || *dpmgh_cmd || *dstar_cmd) {
            auto left = load_space_file(a_left);
            auto right = load_space_file(a_right);
            SearchBudget sb;
            sb.node_cap = budget;
            sb.seed = seed;
            DistanceEstimate est;
            if (*dpgh_cmd)
                est = estimate_dpgh(left.space, right.space, sb);
            else if (*dpmgh_cmd)
                est = estimate_dpmgh(left, right, sb);
            else
                est = estimate_dstar(left, right, sb);
            report["config"] = {{"left", a_left}, {"right", a_right}, {"budget", budget}};
            report.update(estimate_to_json(est));
            if (est.witness_upper && !out.empty()) {
                std::string wf = out + ".witness.json";
                emit(coupling_to_json(*est.witness_upper), wf);
                report["witness_file"] = wf;
            }
        } else if (*content_cmd) {
            auto space = load_space_file(c_space);
            auto target = c_target.empty() ? all_indices(space.size())
                                           : load_indices(c_target);
            double delta = c_delta == "inf"
                               ? std::numeric_limits<double>::infinity()
                               : std::stod(c_delta);
            auto mode = c_mode == "exact" ? CoverMode::exact_small : CoverMode::greedy_upper;
            auto est = content(space.space, target, c_s, delta, mode);
            report["config"] = {{"space", c_space}, {"s", c_s}, {"delta", c_delta},
                                {"mode", c_mode},   {"target_size", target.size()}};
            report["value"] = est.value;
            report["pieces"] = est.cover.size();
        } else if (*density_cmd) {
            auto space = load_space_file(d_space);
            auto prof = density_profile(space, d_point, d_scales, d_dim);
            report["config"] = {{"space", d_space}, {"point", d_point}, {"dim", d_dim}};
            report["scales"] = prof.scales;
            report["ratio_2r"] = prof.ratio_2r;
            report["ratio_r"] = prof.ratio_r;
            report["window_min"] = prof.window_min;
            report["window_max"] = prof.window_max;
        } else if (*doubling_cmd) {
            auto space = load_space_file(db_space);
            auto scan = doubling_scan(space, db_scales);
            report["config"] = {{"space", db_space}};
            report["max_ratio"] = scan.max_ratio;
            report["all_positive"] = scan.all_positive;
            json recs = json::array();
            for (const auto& r : scan.records)
                recs.push_back({{"point", r.point},
                                {"r", r.r},
                                {"ratio", r.ratio},
                                {"positive", r.positive}});
            report["records"] = recs;
        } else if (*gta_cmd) {
            auto space = load_space_file(g_space);
            auto C = load_indices(g_c);
            auto G = load_indices(g_g);
            auto rep = verify_gta(space, C, G, g_eta, g_K, g_delta, g_R0, g_scales,
                                  g_dim, g_res);
            report["config"] = {{"space", g_space}, {"eta", g_eta}, {"K", g_K},
                                {"delta", g_delta}, {"R0", g_R0},  {"dim", g_dim}};
            report["pass"] = rep.pass;
            json dens = json::array();
            for (const auto& r : rep.density)
                dens.push_back({{"point", r.point},
                                {"r", r.r},
                                {"mass", r.mass},
                                {"bound", r.bound},
                                {"pass", r.pass}});
            report["density"] = dens;
            json appr = json::array();
            for (const auto& r : rep.approx)
                appr.push_back({{"point", r.point},
                                {"r", r.r},
                                {"defect", r.defect},
                                {"defect_bound", r.defect_bound},
                                {"upper", r.dpgh_upper},
                                {"threshold", r.threshold},
                                {"pass", r.pass},
                                {"note", r.note}});
            report["approx"] = appr;
            if (!rep.pass) status = 3;
        } else if (*hb_cmd) {
            auto space = load_space_file(hb_space);
            auto C = hb_c.empty() ? all_indices(space.size()) : load_indices(hb_c);
            auto G = hb_g.empty() ? C : load_indices(hb_g);
            HolderOptions opt;
            opt.M = hb_M;
            opt.depth = hb_depth;
            opt.window_cubes = hb_window;
            opt.zoom_target = hb_zoom;
            auto cert = holder_build(space, C, G, hb_K, hb_gamma, hb_eta, opt);
            report["config"] = {{"space", hb_space}, {"K", hb_K},     {"gamma", hb_gamma},
                                {"eta", hb_eta},     {"depth", hb_depth}, {"M", hb_M}};
            report["certificate"] = cert.to_json();
            if (!cert.pass) status = 3;
        } else if (*blow_cmd) {
            auto space = load_space_file(b_space);
            auto bs = blowup(space, b_point, b_scales, b_window);
            report["config"] = {{"space", b_space}, {"point", b_point},
                                {"window", b_window}};
            json arr = json::array();
            for (std::size_t i = 0; i < bs.blowups.size(); ++i)
                arr.push_back({{"scale", bs.scales[i]},
                               {"atoms", bs.blowups[i].size()},
                               {"unit_ball_mass",
                                bs.blowups[i].ball_mass(bs.blowups[i].base(), 1.0)},
                               {"window_ties", bs.window_ties[i]}});
            report["blowups"] = arr;
        } else if (*scan_cmd) {
            auto space = load_space_file(s_space);
            ScanParams params;
            params.dim = s_dim;
            params.window = s_window;
            params.threads = threads;
            auto rep = flatness_scan(space, s_points, s_scales, params);
            report["config"] = {{"space", s_space}, {"dim", s_dim}, {"window", s_window}};
            json recs = json::array();
            for (const auto& r : rep.records)
                recs.push_back({{"point", r.point},
                                {"scale", r.scale},
                                {"lower", r.lower},
                                {"upper", r.upper},
                                {"model_spacing", r.model_spacing},
                                {"atoms", r.atoms},
                                {"failed", r.failed}});
            report["records"] = recs;
            report["worst_upper"] = rep.worst_upper;
        } else if (*gen_cmd) {
            FixtureKind kind = FixtureKind::segment;
            if (gen_kind == "lipschitz_graph") kind = FixtureKind::lipschitz_graph;
            if (gen_kind == "linf_plane_patch") kind = FixtureKind::linf_plane_patch;
            if (gen_kind == "four_corner_cantor") kind = FixtureKind::four_corner_cantor;
            if (gen_kind == "scattered_dust_curve") kind = FixtureKind::scattered_dust_curve;
            FixtureParams p;
            p.count = gen_count;
            p.generation = gen_generation;
            p.slope = gen_slope;
            auto fx = generate(kind, p, seed);
            json fixture = space_to_json(fx.space);
            fixture["label"] = fx.name;
            fixture["rectifiable"] = fx.rectifiable;
            fixture["intrinsic_dim"] = fx.dim;
            emit(fixture, out);
            return 0;
        } else if (*sep_cmd) {
            FixtureParams p;
            std::vector<Fixture> fixtures;
            p.count = 1001;
            fixtures.push_back(generate(FixtureKind::segment, p, seed));
            p.count = 2048;
            fixtures.push_back(generate(FixtureKind::lipschitz_graph, p, seed));
            p.count = 4096;
            fixtures.push_back(generate(FixtureKind::linf_plane_patch, p, seed));
            p.generation = 4;
            fixtures.push_back(generate(FixtureKind::four_corner_cantor, p, seed));
            p.count = 1001;
            fixtures.push_back(generate(FixtureKind::scattered_dust_curve, p, seed));
            ScanParams params;
            params.window = sep_window;
            params.threads = threads;
            auto table = separation_experiment(fixtures, sep_scales, params, sep_points);
            report["config"] = {{"window", sep_window}, {"points", sep_points}};
            report["tau"] = table.tau;
            report["confusion"] = table.confusion;
            json rows = json::array();
            for (const auto& r : table.rows)
                rows.push_back({{"name", r.name},
                                {"truth", r.rectifiable_truth},
                                {"verdict", r.rectifiable_verdict},
                                {"median", r.median_score},
                                {"max", r.max_score},
                                {"below", r.points_below},
                                {"total", r.points_total}});
            report["rows"] = rows;
        }
    } catch (const DomainError& e) {
        report["error"] = e.what();
        emit(report, out);
        return 2;
    } catch (const CertificateError& e) {
        report["error"] = e.what();
        emit(report, out);
        return 3;
    } catch (const json::exception& e) {
        report["error"] = e.what();
        emit(report, out);
        return 2;
    } catch (const std::exception& e) {
        report["error"] = e.what();
        emit(report, out);
        return 2;
    }
    emit(report, out);
    return status;
}
