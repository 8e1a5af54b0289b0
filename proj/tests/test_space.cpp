#include <doctest.h>

#include <random>

#include "mmg/space.hpp"

using namespace mmg;

namespace {

MeasuredSpace line_space(std::vector<double> xs, std::vector<double> w, std::size_t base) {
    std::vector<std::vector<double>> pts;
    for (double x : xs) pts.push_back({x});
    MeasuredSpace s;
    s.space = PointedSpace::from_points(pts, Norm::Linf, base);
    s.weight = std::move(w);
    return s;
}

MeasuredSpace random_space(std::mt19937_64& rng, std::size_t n, int dim = 2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    std::vector<double> w(n);
    for (auto& p : pts)
        for (double& c : p) c = u(rng);
    for (double& x : w) x = u(rng);
    MeasuredSpace s;
    s.space = PointedSpace::from_points(pts, Norm::Linf, 0);
    s.weight = std::move(w);
    return s;
}

}  // namespace

TEST_CASE("ball basics") {
    auto s = line_space({0.0, 0.5, 1.0}, {1, 1, 1}, 0);
    CHECK(ball(s, 0, 0.0) == std::vector<std::size_t>{0});
    CHECK(ball(s, 0, 0.5) == std::vector<std::size_t>{0, 1});
    CHECK(ball(s, 0, 1.0).size() == 3);  // max pairwise distance reaches all
    CHECK_THROWS_AS(ball(s.space, 7, 1.0), DomainError);
}

TEST_CASE("ball at radius zero keeps duplicates") {
    std::vector<double> m{0, 0, 1, 0, 0, 1, 1, 1, 0};
    MeasuredSpace s{PointedSpace::from_matrix(3, 0, m), {1, 1, 1}};
    auto b = ball(s, 0, 0.0);
    CHECK(b == std::vector<std::size_t>{0, 1});
}

TEST_CASE("ball monotone in radius") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 50; ++t) {
        auto s = random_space(rng, 12);
        std::uniform_real_distribution<double> u(0.0, 1.5);
        double r1 = u(rng), r2 = u(rng);
        if (r1 > r2) std::swap(r1, r2);
        auto b1 = ball(s, 0, r1), b2 = ball(s, 0, r2);
        for (std::size_t i : b1)
            CHECK(std::find(b2.begin(), b2.end(), i) != b2.end());
    }
}

TEST_CASE("restrict_measure") {
    auto s = line_space({0, 0.25, 0.5, 0.75}, {0.25, 0.25, 0.25, 0.25}, 0);
    SUBCASE("identity") {
        auto r = restrict_measure(s, {0, 1, 2, 3});
        CHECK(r.total_mass() == doctest::Approx(1.0));
    }
    SUBCASE("dirac at base") {
        auto r = restrict_measure(s, {0});
        CHECK(r.total_mass() == doctest::Approx(0.25));
        CHECK(r.weight[1] == 0.0);
    }
    SUBCASE("partial mass is additive") {
        auto r = restrict_measure(s, {0, 1, 2});
        CHECK(r.total_mass() == doctest::Approx(0.75));
    }
    CHECK_THROWS_AS(restrict_measure(s, {1, 2}), DomainError);
}

TEST_CASE("rescale formula on a line") {
    auto s = line_space({0, 1, 2}, {1, 1, 1}, 0);
    auto t = rescale(s, 2.0);
    CHECK(t.space.dist(0, 1) == doctest::Approx(0.5));
    CHECK(t.space.dist(0, 2) == doctest::Approx(1.0));
    for (double w : t.weight) CHECK(w == doctest::Approx(1.0 / 3.0));
    CHECK(t.ball_mass(0, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("rescale identity and composition") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
        auto s = random_space(rng, 10);
        std::uniform_real_distribution<double> u(0.05, 1.0);
        double a = u(rng), b = u(rng);
        auto lhs = rescale(rescale(s, a), b);
        auto rhs = rescale(s, a * b);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(lhs.weight[i] == doctest::Approx(rhs.weight[i]).epsilon(1e-12));
            CHECK(lhs.space.dist(0, i) == doctest::Approx(rhs.space.dist(0, i)).epsilon(1e-12));
        }
    }
    auto s = line_space({0, 0.3}, {1, 0.5}, 0);
    auto t1 = rescale(s, 1.0);
    CHECK(t1.space.dist(0, 1) == doctest::Approx(0.3));
    CHECK(t1.weight[0] == doctest::Approx(1.0 / 1.5));
}

TEST_CASE("rescale degenerate scale") {
    auto s = line_space({0, 1}, {0, 1}, 0);
    CHECK_THROWS_AS(rescale(s, 0.5), DomainError);
}

TEST_CASE("validate flags violations") {
    SUBCASE("euclidean coordinates are clean") {
        std::mt19937_64 rng(3);
        auto s = random_space(rng, 9);
        s.space.densify();
        CHECK(s.space.validate().empty());
    }
    SUBCASE("asymmetry") {
        std::vector<double> m{0, 1, 2, 0};  // d(0,1)=1 but d(1,0)=2
        auto s = PointedSpace::from_matrix(2, 0, m);
        CHECK(!s.validate().empty());
    }
    SUBCASE("triangle violation") {
        std::vector<double> m{0, 1, 3, 1, 0, 1, 3, 1, 0};
        auto s = PointedSpace::from_matrix(3, 0, m);
        bool has_triangle = false;
        for (const auto& v : s.validate())
            if (v.find("triangle") != std::string::npos) has_triangle = true;
        CHECK(has_triangle);
    }
}

TEST_CASE("json round trip") {
    auto s = line_space({0, 0.5, 1}, {0.2, 0.3, 0.5}, 1);
    auto j = space_to_json(s);
    auto t = load_space(j);
    CHECK(t.base() == 1);
    CHECK(t.space.dist(0, 2) == doctest::Approx(1.0));
    CHECK(t.weight[2] == doctest::Approx(0.5));

    nlohmann::json jm = {{"n", 2}, {"base", 0}, {"dist", {{0.0, 1.0}, {1.0, 0.0}}}};
    auto u = load_space(jm);
    CHECK(u.space.dist(0, 1) == doctest::Approx(1.0));
    CHECK(u.weight == std::vector<double>{1.0, 1.0});
}

TEST_CASE("subspace extraction keeps the metric") {
    std::mt19937_64 rng(5);
    auto s = random_space(rng, 8);
    auto sub = extract_subspace(s.space, {0, 3, 5});
    CHECK(sub.size() == 3);
    CHECK(sub.base() == 0);
    CHECK(sub.dist(1, 2) == doctest::Approx(s.space.dist(3, 5)));
}

TEST_CASE("grid index nearest / within") {
    std::vector<std::vector<double>> pts{{0, 0}, {1, 0}, {0.4, 0.4}, {2, 2}};
    GridIndex gi(pts, 0.5);
    CHECK(gi.nearest({0.05, 0.0}) == 0);
    CHECK(gi.nearest({0.9, 0.1}) == 1);
    auto w = gi.within({0, 0}, 0.45);
    CHECK(w == std::vector<std::size_t>{0, 2});
}
