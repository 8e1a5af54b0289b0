#include <doctest.h>

#include <random>
#include <set>

#include "mmg/alignment.hpp"

using namespace mmg;

namespace {

MeasuredSpace from_pts(std::vector<std::vector<double>> pts, std::vector<double> w,
                       std::size_t base = 0) {
    return {PointedSpace::from_points(std::move(pts), Norm::Linf, base), std::move(w)};
}

MeasuredSpace random_ms(std::mt19937_64& rng, std::size_t n, double spread = 1.0,
                        bool normalize = false) {
    std::uniform_real_distribution<double> u(0.0, spread);
    std::vector<std::vector<double>> pts(n, std::vector<double>(2));
    std::vector<double> w(n);
    for (auto& p : pts)
        for (double& c : p) c = u(rng);
    pts[0] = {0.0, 0.0};
    std::uniform_real_distribution<double> uw(0.1, 1.0);
    for (double& x : w) x = uw(rng);
    if (normalize) {
        double tot = 0.0;
        for (double x : w) tot += x;
        for (double& x : w) x /= tot;
    }
    return {PointedSpace::from_points(pts, Norm::Linf, 0), w};
}

// oracle: minimum coupling Hausdorff value over every basepointed map in
// both directions (small sides only)
double exhaustive_coupling_optimum(const MeasuredSpace& L, const MeasuredSpace& R) {
    auto scan = [&](const MeasuredSpace& A, const MeasuredSpace& B) {
        std::size_t n = A.size(), m = B.size();
        double best = 0.5;
        std::vector<std::size_t> map(n, 0);
        map[A.base()] = B.base();
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < n; ++i)
            if (i != A.base()) free.push_back(i);
        std::vector<std::size_t> choice(free.size(), 0);
        while (true) {
            for (std::size_t k = 0; k < free.size(); ++k) map[free[k]] = choice[k];
            EpsIsometry iso;
            iso.map = map;
            // verified level for this map
            double lvl = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j)
                    lvl = std::max(lvl, std::fabs(B.space.dist(map[i], map[j]) -
                                                  A.space.dist(i, j)));
            for (std::size_t j = 0; j < m; ++j) {
                double bd = 1e18;
                for (std::size_t i = 0; i < n; ++i)
                    bd = std::min(bd, B.space.dist(map[i], j));
                lvl = std::max(lvl, bd);
            }
            iso.eps = std::max(lvl, 1e-9);
            Coupling c = coupling_from_eps_isometry(A, B, iso);
            best = std::min(best, c.hausdorff_value());
            // odometer
            std::size_t k = 0;
            while (k < choice.size() && ++choice[k] == m) choice[k++] = 0;
            if (k == choice.size()) break;
        }
        return best;
    };
    // the overlay through the shared coordinate frame is also a coupling
    double ambient;
    {
        std::vector<std::vector<double>> coords{{0.0, 0.0}};
        std::vector<std::size_t> ls{0}, rs{0};
        const auto& lb = L.space.coords()[L.base()];
        const auto& rb = R.space.coords()[R.base()];
        for (std::size_t i = 0; i < L.size(); ++i) {
            if (i == L.base()) continue;
            ls.push_back(coords.size());
            coords.push_back({L.space.coords()[i][0] - lb[0], L.space.coords()[i][1] - lb[1]});
        }
        for (std::size_t j = 0; j < R.size(); ++j) {
            if (j == R.base()) continue;
            rs.push_back(coords.size());
            coords.push_back({R.space.coords()[j][0] - rb[0], R.space.coords()[j][1] - rb[1]});
        }
        auto host = PointedSpace::from_points(coords, Norm::Linf, 0);
        ambient = local_hausdorff({host, ls, rs}).value;
    }
    return std::min({scan(L, R), scan(R, L), ambient});
}

}  // namespace

TEST_CASE("check_eps_isometry basics") {
    auto L = from_pts({{0}, {1}}, {1, 1});
    SUBCASE("identity passes") {
        EpsIsometry iso{};
        iso.eps = 0.5;
        iso.map = {0, 1};
        auto r = check_eps_isometry(L.space, L.space, iso);
        CHECK(r.pass);
    }
    SUBCASE("collapse at distance eps passes on the boundary") {
        auto S = from_pts({{0}}, {1});
        EpsIsometry iso{};
        iso.eps = 1.0;
        iso.map = {0, 0};
        auto r = check_eps_isometry(L.space, S.space, iso);
        CHECK(r.pass);
        CHECK(r.worst_distortion == doctest::Approx(1.0));
    }
    SUBCASE("collapse at three times eps fails") {
        auto wide = from_pts({{0}, {0.3}}, {1, 1});
        auto S = from_pts({{0}}, {1});
        EpsIsometry iso{};
        iso.eps = 0.1;
        iso.map = {0, 0};
        auto r = check_eps_isometry(wide.space, S.space, iso);
        CHECK(!r.pass);
        CHECK(r.worst_distortion == doctest::Approx(0.3));
    }
    SUBCASE("window point without image is an incomplete candidate") {
        EpsIsometry iso{};
        iso.eps = 0.5;
        iso.map = {0, EpsIsometry::unmapped};
        CHECK_THROWS_AS(check_eps_isometry(L.space, L.space, iso), DomainError);
    }
}

TEST_CASE("eps isometry from hausdorff-close subsets") {
    SUBCASE("identical sets pass at any level") {
        std::vector<std::vector<double>> pts{{0}, {1}, {2}};
        auto host = PointedSpace::from_points(pts, Norm::Linf, 0);
        SubsetPair p{host, {0, 1, 2}, {0, 1, 2}};
        auto iso = eps_isometry_from_hausdorff(p, 0.25);
        auto L = extract_subspace(host, p.left);
        auto R = extract_subspace(host, p.right);
        CHECK(check_eps_isometry(L, R, iso).pass);
    }
    SUBCASE("shifted point matches within 2 eps") {
        std::vector<std::vector<double>> pts{{0}, {1}, {1.05}};
        auto host = PointedSpace::from_points(pts, Norm::Linf, 0);
        SubsetPair p{host, {0, 1}, {0, 2}};
        auto iso = eps_isometry_from_hausdorff(p, 0.1);
        auto L = extract_subspace(host, p.left);
        auto R = extract_subspace(host, p.right);
        CHECK(iso.eps == doctest::Approx(0.2));
        CHECK(check_eps_isometry(L, R, iso).pass);
    }
    SUBCASE("violated precondition throws") {
        std::vector<std::vector<double>> pts{{0}, {1}};
        auto host = PointedSpace::from_points(pts, Norm::Linf, 0);
        SubsetPair p{host, {0}, {0, 1}};  // H_z = 1/2
        CHECK_THROWS_AS(eps_isometry_from_hausdorff(p, 0.1), DomainError);
    }
}

TEST_CASE("coupling from identity and collapse isometries") {
    std::mt19937_64 rng(61);
    SUBCASE("identity coupling is a valid metric") {
        auto s = random_ms(rng, 6);
        EpsIsometry iso{};
        iso.eps = 0.05;
        iso.map = {0, 1, 2, 3, 4, 5};
        Coupling c = coupling_from_eps_isometry(s, s, iso);
        CHECK(c.validate(s.space, s.space).empty());
        CHECK(c.hausdorff_value() <= 0.05 + 1e-9);
    }
    SUBCASE("two points collapsed at distance eps") {
        auto L = from_pts({{0}, {0.2}}, {1, 1});
        auto S = from_pts({{0}}, {1});
        EpsIsometry iso{};
        iso.eps = 0.2;
        iso.map = {0, 0};
        Coupling c = coupling_from_eps_isometry(L, S, iso);
        CHECK(c.validate(L.space, S.space).empty());
    }
    SUBCASE("invalid isometry is rejected") {
        auto L = from_pts({{0}, {3.0}}, {1, 1});
        auto S = from_pts({{0}}, {1});
        EpsIsometry iso{};
        iso.eps = 0.1;
        iso.map = {0, 0};
        CHECK_THROWS_AS(coupling_from_eps_isometry(L, S, iso), DomainError);
    }
}

TEST_CASE("dpgh estimates") {
    std::mt19937_64 rng(67);
    SUBCASE("identical spaces give a zero interval") {
        auto s = random_ms(rng, 5);
        auto est = estimate_dpgh(s.space, s.space);
        CHECK(est.method == EstimateMethod::exact_small);
        CHECK(est.lower <= 1e-6);
        CHECK(est.upper <= 1e-6);
    }
    SUBCASE("single points are at distance zero") {
        auto a = from_pts({{0}}, {1});
        auto b = from_pts({{0}}, {2});
        auto est = estimate_dpgh(a.space, b.space);
        CHECK(est.upper <= 1e-9);
    }
    SUBCASE("segment vs point brackets the collapse level") {
        auto seg = from_pts({{0}, {1}}, {1, 1});
        auto pt = from_pts({{0}}, {1});
        auto est = estimate_dpgh(seg.space, pt.space);
        CHECK(est.lower > 0.0);
        CHECK(est.lower <= est.upper);
        CHECK(est.best_eps > 0.0);
    }
}

TEST_CASE("sandwich soundness against exhaustive coupling enumeration") {
    std::mt19937_64 rng(71);
    for (int t = 0; t < 12; ++t) {
        auto L = random_ms(rng, 4);
        auto R = random_ms(rng, 4 + (t % 2));
        auto est = estimate_dpgh(L.space, R.space);
        double opt = exhaustive_coupling_optimum(L, R);
        CHECK(est.lower <= opt + 1e-9);
        CHECK(opt <= est.upper + 1e-9);
    }
}

TEST_CASE("dstar estimates") {
    std::mt19937_64 rng(73);
    SUBCASE("identical measured spaces") {
        auto s = random_ms(rng, 6);
        auto est = estimate_dstar(s, s);
        CHECK(est.upper <= 1e-6);
    }
    SUBCASE("mass gap at the basepoint saturates") {
        auto a = from_pts({{0}}, {1});
        auto b = from_pts({{0}}, {2});
        auto est = estimate_dstar(a, b);
        CHECK(est.lower == doctest::Approx(0.5).epsilon(0.01));
        CHECK(est.upper == doctest::Approx(0.5));
    }
    SUBCASE("small perturbation stays small") {
        auto s = random_ms(rng, 6);
        auto t2 = s;
        for (auto& w : t2.weight) w += 1e-4;
        auto est = estimate_dstar(s, t2);
        CHECK(est.upper <= 2e-3);
    }
    SUBCASE("dstar never exceeds dpmgh on the same coupling") {
        for (int t = 0; t < 10; ++t) {
            auto a = random_ms(rng, 5);
            auto b = random_ms(rng, 5);
            auto ds = estimate_dstar(a, b);
            auto dp = estimate_dpmgh(a, b);
            REQUIRE(dp.witness_upper.has_value());
            const Coupling& c = *dp.witness_upper;
            CHECK(c.flat_value() <= c.hausdorff_value() + c.flat_value() + 1e-12);
            CHECK(ds.upper <= dp.upper + 1e-9);
        }
    }
}

TEST_CASE("extract_large_subsets") {
    std::mt19937_64 rng(79);
    SUBCASE("equal measures keep everything") {
        auto s = random_ms(rng, 6);
        EpsIsometry iso{};
        iso.eps = 0.05;
        iso.map = {0, 1, 2, 3, 4, 5};
        Coupling c = coupling_from_eps_isometry(s, s, iso);
        auto ls = extract_large_subsets(c, 4.0, 0.5);
        CHECK(ls.mass_defect_mu <= ls.defect_bound + 1e-12);
        CHECK(ls.mass_defect_nu <= ls.defect_bound + 1e-12);
        CHECK(ls.hausdorff_between <= ls.hausdorff_bound + 1e-12);
    }
    SUBCASE("guard on r <= eps") {
        auto s = random_ms(rng, 4);
        EpsIsometry iso{};
        iso.eps = 0.05;
        iso.map = {0, 1, 2, 3};
        Coupling c = coupling_from_eps_isometry(s, s, iso);
        CHECK_THROWS_AS(extract_large_subsets(c, 0.1, 0.5), DomainError);
    }
    SUBCASE("random pairs satisfy both bounds") {
        for (int t = 0; t < 15; ++t) {
            auto a = random_ms(rng, 6);
            auto b = random_ms(rng, 6);
            auto est = estimate_dstar(a, b);
            REQUIRE(est.witness_upper.has_value());
            double eps = 0.4;
            auto ls = extract_large_subsets(*est.witness_upper, 1.0 / eps, eps);
            CHECK(ls.mass_defect_mu < ls.defect_bound + 1e-9);
            CHECK(ls.mass_defect_nu < ls.defect_bound + 1e-9);
            if (!ls.k_mu.empty() && !ls.k_nu.empty())
                CHECK(ls.hausdorff_between <= ls.hausdorff_bound + 1e-9);
        }
    }
}

TEST_CASE("dstar sandwich forward and converse") {
    std::mt19937_64 rng(83);
    SUBCASE("identical spaces pass at any eps") {
        auto s = random_ms(rng, 6);
        auto rep = dstar_sandwich(s, s, 0.3);
        REQUIRE(rep.conclusive);
        CHECK(rep.forward_pass);
        CHECK(rep.converse_pass);
        CHECK(rep.defect_mu == doctest::Approx(0.0));
    }
    SUBCASE("perturbed pairs slightly above their coupling value") {
        std::uniform_real_distribution<double> noise(-0.02, 0.02);
        int conclusive = 0;
        for (int t = 0; t < 10; ++t) {
            auto a = random_ms(rng, 6, 1.0, true);
            auto b = a;
            auto pts = b.space.coords();
            for (auto& p : pts)
                for (double& c : p) c += noise(rng);
            pts[0] = {0.0, 0.0};
            b.space = PointedSpace::from_points(pts, Norm::Linf, 0);
            for (auto& w : b.weight) w *= 1.0 + noise(rng);
            auto est = estimate_dstar(a, b);
            double eps = std::min(0.49, est.upper * 1.25 + 1e-3);
            auto rep = dstar_sandwich(a, b, eps);
            if (!rep.conclusive) continue;
            ++conclusive;
            CHECK(rep.forward_pass);
            CHECK(rep.converse_pass);
        }
        CHECK(conclusive >= 8);
    }
}

TEST_CASE("doubling subset bound") {
    // uniform grid on a segment, drop the far 1% of mass
    std::size_t n = 100;
    std::vector<std::vector<double>> pts(n);
    std::vector<double> w(n, 0.01);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {double(i) / double(n - 1)};
    auto s = from_pts(pts, w, 0);

    SUBCASE("full subset returns the eps term only") {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        auto b = doubling_subset_bound(s, all, 1.0, 0.5, 2.0);
        CHECK(b.bound == doctest::Approx(0.0));
    }
    SUBCASE("one percent drop, frozen hand value") {
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i + 1 < n; ++i) keep.push_back(i);
        auto b = doubling_subset_bound(s, keep, 1.0, 0.5, 2.0);
        // 4 * 1 * (0.01/0.5)^(1/2) + 0.01 with k = 2 from the grid scan
        CHECK(b.eps_measured == doctest::Approx(0.01));
        CHECK(b.bound == doctest::Approx(4.0 * std::sqrt(0.02) + 0.01));
        CHECK(b.identity_upper <= b.bound + 1e-9);
    }
    SUBCASE("non-doubling instance is rejected") {
        auto bad = from_pts({{0}, {1e-6}, {1.0}}, {1e-9, 1e-9, 1.0}, 0);
        std::vector<std::size_t> keep{0, 1, 2};
        CHECK_THROWS_AS(doubling_subset_bound(bad, keep, 1.0, 0.5, 1.0), DomainError);
    }
}

TEST_CASE("pushforward perturbation inequality") {
    // |F(f#mu, nu) - F(mu, nu)| <= eps L mu(B(z, r+eps)) for any verified
    // eps-isometry, checked inside the coupling host
    std::mt19937_64 rng(89);
    for (int t = 0; t < 8; ++t) {
        auto a = random_ms(rng, 5);
        auto b = random_ms(rng, 5);
        auto est = estimate_dpmgh(a, b);
        REQUIRE(est.witness_upper.has_value());
        const Coupling& c = *est.witness_upper;
        // recover the eps-isometry the coupling encodes: nearest right image
        double eps = 0.0;
        std::vector<std::size_t> img(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            double bd = 1e18;
            for (std::size_t j = 0; j < b.size(); ++j) {
                double d = c.glued.dist(c.left_pos[i], c.right_pos[j]);
                if (d < bd) {
                    bd = d;
                    img[i] = j;
                }
            }
            eps = std::max(eps, bd);
        }
        eps = std::max(eps, 1e-6);
        if (eps >= 0.5) continue;
        std::uniform_real_distribution<double> u(0.2, 2.0);
        double L = u(rng), r = std::min(u(rng), 1.0 / eps - eps);
        if (r <= 0) continue;
        std::vector<double> push(c.glued.size(), 0.0);
        for (std::size_t i = 0; i < a.size(); ++i)
            push[c.right_pos[img[i]]] += a.weight[i];
        double f_push =
            flat_lr({c.glued, push, c.right_weight, L, r}, false).value;
        double f_orig =
            flat_lr({c.glued, c.left_weight, c.right_weight, L, r}, false).value;
        double mass = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (c.glued.dist(0, c.left_pos[i]) <= r + eps) mass += a.weight[i];
        CHECK(std::fabs(f_push - f_orig) <= eps * L * mass + 1e-6);
    }
}

TEST_CASE("radial hausdorff lower bound is sound in a shared host") {
    std::mt19937_64 rng(97);
    for (int t = 0; t < 20; ++t) {
        auto h = random_ms(rng, 10);
        std::vector<std::size_t> A{0}, B{0};
        for (std::size_t i = 1; i < 10; ++i) (rng() & 1 ? A : B).push_back(i);
        auto L = extract_subspace(h.space, A);
        auto R = extract_subspace(h.space, B);
        double lower = radial_hausdorff_lower(L, R);
        double host_h = local_hausdorff({h.space, A, B}).value;
        CHECK(lower <= host_h + 1e-12);
    }
}
