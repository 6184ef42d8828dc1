#include "rubricrl/error.hpp"
#include "rubricrl/misspec_map.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace rubricrl;

namespace {

std::vector<MisspecMap> sample_maps(testutil::Gen& g) {
    return {MisspecMap::identity(), MisspecMap::reversed(), MisspecMap::top_wrong(g.param_c()),
            MisspecMap::worst_wrong(g.param_c())};
}

} // namespace

TEST_CASE("built-in maps at hand-picked points") {
    CHECK(apply_map(MisspecMap::identity(), 0.3) == 0.3);
    CHECK(apply_map(MisspecMap::reversed(), 0.3) == doctest::Approx(0.7));

    const auto tw = MisspecMap::top_wrong(0.1);
    CHECK(apply_map(tw, 0.5) == 0.5);
    CHECK(apply_map(tw, 0.9) == doctest::Approx(1.0));
    CHECK(apply_map(tw, 0.95) == doctest::Approx(0.95));
    CHECK(apply_map(tw, 1.0) == doctest::Approx(0.9));

    const auto ww = MisspecMap::worst_wrong(0.25);
    CHECK(apply_map(ww, 0.0) == doctest::Approx(0.25));
    CHECK(apply_map(ww, 0.1) == doctest::Approx(0.15));
    CHECK(apply_map(ww, 0.25) == doctest::Approx(0.0));
    CHECK(apply_map(ww, 0.6) == 0.6);
}

TEST_CASE("parameter and domain checks") {
    CHECK_THROWS_AS(MisspecMap::top_wrong(0.0), DomainError);
    CHECK_THROWS_AS(MisspecMap::top_wrong(1.0), DomainError);
    CHECK_THROWS_AS(MisspecMap::worst_wrong(1.5), DomainError);
    CHECK_THROWS_AS(MisspecMap::worst_wrong(std::nan("")), DomainError);
    CHECK_THROWS_AS(apply_map(MisspecMap::identity(), 1.0001), DomainError);
    CHECK_THROWS_AS(apply_map(MisspecMap::reversed(), -0.1), DomainError);
}

TEST_CASE("from_name") {
    CHECK(MisspecMap::from_name("identity", std::nullopt).kind() == MapKind::Identity);
    CHECK(MisspecMap::from_name("reversed", std::nullopt).kind() == MapKind::Reversed);
    const auto tw = MisspecMap::from_name("top-wrong", 0.2);
    CHECK(tw.kind() == MapKind::TopWrong);
    CHECK(*tw.param_c() == 0.2);
    CHECK(tw.name() == "top-wrong");
    CHECK_THROWS_AS(MisspecMap::from_name("identity", 0.2), DomainError);
    CHECK_THROWS_AS(MisspecMap::from_name("worst-wrong", std::nullopt), DomainError);
    CHECK_THROWS_AS(MisspecMap::from_name("sideways", std::nullopt), DomainError);
}

TEST_CASE("breakpoints") {
    CHECK(MisspecMap::identity().breakpoints().empty());
    CHECK(MisspecMap::top_wrong(0.1).breakpoints() == std::vector<double>{0.9});
    CHECK(MisspecMap::worst_wrong(0.25).breakpoints() == std::vector<double>{0.25});
}

TEST_CASE("custom maps apply but do not invert") {
    const auto sq = MisspecMap::custom("square", [](double r) { return r * r; });
    CHECK(sq.kind() == MapKind::Custom);
    CHECK_FALSE(sq.invertible());
    CHECK(sq.name() == "square");
    CHECK(apply_map(sq, 0.5) == 0.25);
    CHECK_THROWS_AS(invert_map(sq, 0.25), UnsupportedMapError);
}

TEST_CASE("property: built-in maps are involutions on 10^4 points") {
    testutil::Gen g(11);
    for (int trial = 0; trial < 20; ++trial) {
        for (const auto& m : sample_maps(g)) {
            double worst = 0.0;
            for (int i = 0; i < 500; ++i) {
                const double r = i < 2 ? static_cast<double>(i) : g.uniform();
                worst = std::max(worst, std::abs(apply_map(m, apply_map(m, r)) - r));
                worst = std::max(worst, std::abs(invert_map(m, apply_map(m, r)) - r));
            }
            INFO(m.name(), " c=", m.param_c().value_or(-1));
            CHECK(worst <= 1e-12);
        }
    }
}

TEST_CASE("property: built-in maps preserve Lebesgue measure") {
    // Push a 10^6-point midpoint grid through f and compare the empirical
    // CDF of the image with the uniform CDF.
    testutil::Gen g(12);
    const std::size_t n = 1'000'000;
    std::vector<double> ys(n);
    for (const auto& m : sample_maps(g)) {
        for (std::size_t i = 0; i < n; ++i) {
            ys[i] = apply_map(m, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
        }
        std::sort(ys.begin(), ys.end());
        double sup = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double lo = static_cast<double>(i) / static_cast<double>(n);
            const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
            sup = std::max({sup, std::abs(ys[i] - lo), std::abs(ys[i] - hi)});
        }
        INFO(m.name(), " c=", m.param_c().value_or(-1));
        CHECK(sup < 1e-5);
    }
}

TEST_CASE("property: maps stay inside [0,1]") {
    testutil::Gen g(13);
    for (int trial = 0; trial < 50; ++trial) {
        for (const auto& m : sample_maps(g)) {
            for (int i = 0; i < 200; ++i) {
                const double y = apply_map(m, g.uniform());
                CHECK((y >= 0.0 && y <= 1.0));
            }
        }
    }
}
