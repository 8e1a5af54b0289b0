#include <doctest.h>

#include <random>

#include "mmg/flat.hpp"

using namespace mmg;

namespace {

PointedSpace two_points(double d) {
    return PointedSpace::from_matrix(2, 0, {0, d, d, 0});
}

MeasuredSpace random_host(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> pts(n, std::vector<double>(2));
    std::vector<double> w(n);
    for (auto& p : pts)
        for (double& c : p) c = u(rng);
    for (double& x : w) x = u(rng);
    return {PointedSpace::from_points(pts, Norm::Linf, 0), w};
}

// brute-force oracle for two-variable instances: dense grid over the box
double grid_oracle_2(const FlatProblem& p) {
    double best = -1e18;
    const int N = 400;
    auto in_ball = [&](std::size_t i) { return p.host.dist(p.host.base(), i) <= p.r; };
    for (int a = -N; a <= N; ++a)
        for (int b = -N; b <= N; ++b) {
            double g0 = a / double(N), g1 = b / double(N);
            if (!in_ball(0) && g0 != 0.0) continue;
            if (!in_ball(1) && g1 != 0.0) continue;
            if (std::fabs(g0 - g1) > p.L * p.host.dist(0, 1) + 1e-12) continue;
            best = std::max(best, g0 * (p.mu[0] - p.nu[0]) + g1 * (p.mu[1] - p.nu[1]));
        }
    return best;
}

}  // namespace

TEST_CASE("flat_lr identical measures") {
    FlatProblem p{two_points(1.0), {0.5, 0.5}, {0.5, 0.5}, 1.0, 2.0};
    auto s = flat_lr(p);
    CHECK(s.value == doctest::Approx(0.0));
    CHECK(verify_flat_solution(p, s).empty());
}

TEST_CASE("flat_lr two diracs, frozen vertex value") {
    // host {z,w}, d = 1, mu = delta_z, nu = delta_w, L = 1, r = 2 -> 1
    FlatProblem p{two_points(1.0), {1, 0}, {0, 1}, 1.0, 2.0};
    auto s = flat_lr(p);
    CHECK(s.value == doctest::Approx(1.0));
    CHECK(verify_flat_solution(p, s).empty());
    CHECK(s.value == doctest::Approx(grid_oracle_2(p)).epsilon(1e-2));
}

TEST_CASE("flat_lr agrees with the grid oracle on random 2-atom instances") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.1, 1.5);
    for (int t = 0; t < 30; ++t) {
        FlatProblem p{two_points(u(rng)), {u(rng), u(rng)}, {u(rng), u(rng)}, u(rng), u(rng)};
        auto s = flat_lr(p);
        CHECK(verify_flat_solution(p, s).empty());
        CHECK(s.value == doctest::Approx(grid_oracle_2(p)).epsilon(2e-2));
    }
}

TEST_CASE("restriction bound holds exactly") {
    // 4 atoms of mass 0.25, nu drops one atom: value <= dropped mass
    std::mt19937_64 rng(23);
    auto host = random_host(rng, 4);
    std::vector<double> mu{0.25, 0.25, 0.25, 0.25};
    std::vector<double> nu = mu;
    nu[3] = 0.0;
    double r = 2.0;  // everything inside
    FlatProblem p{host.space, mu, nu, 1.0, r};
    auto s = flat_lr(p);
    CHECK(s.value <= 0.25 + 1e-9);
    CHECK(verify_flat_solution(p, s).empty());
}

TEST_CASE("scaling and monotonicity") {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 25; ++t) {
        auto host = random_host(rng, 8);
        std::uniform_real_distribution<double> u(0.1, 1.0);
        std::vector<double> mu(8), nu(8);
        for (auto& x : mu) x = u(rng);
        for (auto& x : nu) x = u(rng);
        double L = u(rng), r = 0.3 + u(rng);
        double Lp = L + u(rng);
        double base = flat_lr({host.space, mu, nu, L, r}, false).value;
        double bigL = flat_lr({host.space, mu, nu, Lp, r}, false).value;
        CHECK(bigL <= (Lp / L) * base + 1e-9);  // scaling inequality
        CHECK(bigL + 1e-9 >= base);             // monotone in L
        double bigR = flat_lr({host.space, mu, nu, L, r + 0.3}, false).value;
        CHECK(bigR + 1e-9 >= base);             // monotone in r
    }
}

TEST_CASE("flat_L thresholds") {
    PointedSpace one = PointedSpace::from_matrix(1, 0, {0.0});
    SUBCASE("equal measures give zero") {
        CHECK(flat_L(one, {1.0}, {1.0}, 1.0) <= 1e-6);
    }
    SUBCASE("mass gap one saturates at a half") {
        CHECK(flat_L(one, {1.0}, {2.0}, 1.0) == doctest::Approx(0.5));
    }
    SUBCASE("small mass gap crosses at the gap") {
        double v = flat_L(one, {1.0}, {1.0 + 1e-3}, 1.0);
        CHECK(v == doctest::Approx(1e-3).epsilon(0.05));
    }
}

TEST_CASE("flat metric on far diracs saturates") {
    // two unit diracs at distance 10, basepoint at the first
    PointedSpace host = two_points(10.0);
    double v = flat(host, {1, 0}, {0, 1});
    CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("flat symmetry and triangle inequality") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 60; ++t) {
        auto host = random_host(rng, 10);
        std::vector<double> mu(10), la(10), nu(10);
        for (auto& x : mu) x = u(rng);
        for (auto& x : la) x = u(rng);
        for (auto& x : nu) x = u(rng);
        double ab = flat(host.space, mu, nu);
        double ba = flat(host.space, nu, mu);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-5));
        double al = flat(host.space, mu, la);
        double lb = flat(host.space, la, nu);
        CHECK(ab <= al + lb + 2e-6);
    }
}

TEST_CASE("radial lower bound is a true lower bound in the same host") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        auto host = random_host(rng, 9);
        MeasuredSpace left = host, right = host;
        for (auto& x : right.weight) x = u(rng);
        double lower = radial_lower_bound(left, right);
        double same_host = flat(host.space, left.weight, right.weight);
        CHECK(lower <= same_host + 1e-6);
    }
}

TEST_CASE("witness certifies optimality on larger random instances") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        auto host = random_host(rng, 30);
        std::vector<double> mu(30), nu(30);
        for (auto& x : mu) x = u(rng);
        for (auto& x : nu) x = u(rng);
        FlatProblem p{host.space, mu, nu, 2.0, 0.8};
        auto s = flat_lr(p);
        CHECK(verify_flat_solution(p, s).empty());
    }
}
