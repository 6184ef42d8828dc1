#include "rubricrl/error.hpp"
#include "rubricrl/reward_theory.hpp"
#include "rubricrl/tilted_sim.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

using namespace rubricrl;

// Reference values from tests/oracles/theory_oracle.py (mpmath, 60 digits).

TEST_CASE("closed-form KL against the high-precision oracle") {
    struct Row {
        double beta;
        double kl;
    };
    const Row rows[] = {
        {1.0, 0.040651852256408315407},  {0.2, 0.65011693641511008791},
        {0.05, 1.9957323168382171517},   {0.1, 1.3030845138645130509},
        {0.5, 0.15159592392813567003},   {5.0, 0.0016650017618185005032},
        {1e-3, 5.9077552789821370521},
    };
    for (const auto& r : rows) {
        INFO("beta=", r.beta);
        CHECK(kl_closed_form(r.beta) == doctest::Approx(r.kl).epsilon(1e-13));
    }
    CHECK(std::abs(kl_closed_form(1.0) - 0.0406518522564) < 1e-12);
}

TEST_CASE("KL stays finite at the extremes") {
    CHECK(kl_closed_form(1e9) == doctest::Approx(4.1666666666666667e-20).epsilon(1e-9));
    CHECK(kl_closed_form(1e9) < 1e-12);
    CHECK(std::isfinite(kl_closed_form(1e-8)));
    // Large 1/beta: KL ~ 1/beta... - log beta - 1 asymptotically.
    CHECK(kl_closed_form(1e-6) == doctest::Approx(-std::log(1e-6) - 1.0).epsilon(1e-9));
    CHECK(kl_closed_form(1e-300) > 600.0);
    CHECK(std::isfinite(kl_closed_form(1e300)));
}

TEST_CASE("KL domain errors") {
    CHECK_THROWS_AS(kl_closed_form(0.0), DomainError);
    CHECK_THROWS_AS(kl_closed_form(-1.0), DomainError);
    CHECK_THROWS_AS(kl_closed_form(std::nan("")), DomainError);
    CHECK_THROWS_AS(kl_closed_form(std::numeric_limits<double>::infinity()), DomainError);
}

TEST_CASE("win rate against the high-precision oracle") {
    struct Row {
        MisspecMap map;
        double beta;
        double wr;
    };
    const auto id = MisspecMap::identity();
    const auto rev = MisspecMap::reversed();
    const auto tw1 = MisspecMap::top_wrong(0.1);
    const auto ww25 = MisspecMap::worst_wrong(0.25);
    const auto tw4 = MisspecMap::top_wrong(0.4);
    const auto ww1 = MisspecMap::worst_wrong(0.1);
    const std::vector<Row> rows = {
        {id, 1.0, 0.58197670686932642439},     {id, 0.2, 0.8067836549063042311},
        {id, 0.1, 0.90004540199100968777},     {id, 1e-3, 0.999},
        {rev, 1.0, 0.41802329313067357561},    {rev, 0.2, 0.1932163450936957689},
        {rev, 0.1, 0.099954598008990312232},   {rev, 1e-3, 0.001},
        {tw1, 1.0, 0.58172584036403670673},    {tw1, 0.2, 0.80349617417908701474},
        {tw1, 0.1, 0.88968109910095374563},    {tw1, 1e-3, 0.901},
        {ww25, 1.0, 0.58025666260912324615},   {ww25, 0.2, 0.80592587153641704695},
        {ww25, 0.1, 0.89999731562099135654},   {ww25, 1e-3, 0.999},
        {tw4, 1.0, 0.56810576031795442722},    {tw4, 0.2, 0.69778097403051478122},
        {tw4, 0.1, 0.68904643931968394424},    {tw4, 1e-3, 0.601},
        {ww1, 1.0, 0.58187471215963047067},    {ww1, 0.2, 0.80674713429428603674},
        {ww1, 0.1, 0.90004412293442053096},    {ww1, 1e-3, 0.999},
    };
    for (const auto& r : rows) {
        INFO(r.map.name(), " c=", r.map.param_c().value_or(-1), " beta=", r.beta);
        CHECK(std::abs(win_rate_quadrature(r.map, r.beta) - r.wr) < 1e-9);
    }
    CHECK(std::abs(win_rate_quadrature(id, 1.0) - 1.0 / (std::exp(1.0) - 1.0)) < 1e-9);
}

TEST_CASE("win rate errors") {
    const auto sq = MisspecMap::custom("square", [](double r) { return r * r; });
    CHECK_THROWS_AS(win_rate_quadrature(sq, 1.0), UnsupportedMapError);
    CHECK_THROWS_AS(win_rate_quadrature(MisspecMap::identity(), 0.0), DomainError);
    CHECK_THROWS_AS(win_rate_quadrature(MisspecMap::identity(), -2.0), DomainError);
}

TEST_CASE("property: rearrangement ordering identity >= any map >= reversed") {
    testutil::Gen g(21);
    for (int trial = 0; trial < 200; ++trial) {
        const double beta = g.beta(1e-3, 20.0);
        const double hi = win_rate_quadrature(MisspecMap::identity(), beta);
        const double lo = win_rate_quadrature(MisspecMap::reversed(), beta);
        for (const auto& m : {MisspecMap::top_wrong(g.param_c()),
                              MisspecMap::worst_wrong(g.param_c())}) {
            const double w = win_rate_quadrature(m, beta);
            INFO(m.name(), " c=", *m.param_c(), " beta=", beta);
            CHECK(w <= hi + 1e-12);
            CHECK(w >= lo - 1e-12);
        }
    }
}

TEST_CASE("property: win rate tends to 1/2 as beta grows and KL to zero") {
    testutil::Gen g(22);
    for (int trial = 0; trial < 50; ++trial) {
        const double c = g.param_c();
        for (const auto& m : {MisspecMap::identity(), MisspecMap::reversed(),
                              MisspecMap::top_wrong(c), MisspecMap::worst_wrong(c)}) {
            CHECK(std::abs(win_rate_quadrature(m, 1e6) - 0.5) < 1e-6);
        }
    }
    CHECK(kl_closed_form(1e6) < 1e-12);
}

TEST_CASE("property: small-beta limits") {
    // As beta -> 0 the tilted policy concentrates on proxy reward 1, whose
    // gold reward is f^-1(1): 1 for identity and worst-wrong, 0 for
    // reversed, 1 - c for top-wrong. The approach is linear in beta.
    testutil::Gen g(23);
    const double beta = 1e-4;
    for (int trial = 0; trial < 50; ++trial) {
        const double c = g.uniform(0.05, 0.95);
        CHECK(std::abs(win_rate_quadrature(MisspecMap::top_wrong(c), beta) - (1.0 - c)) < 2 * beta);
        CHECK(std::abs(win_rate_quadrature(MisspecMap::worst_wrong(c), beta) - 1.0) < 2 * beta);
    }
    CHECK(std::abs(win_rate_quadrature(MisspecMap::identity(), beta) - 1.0) < 2 * beta);
    CHECK(std::abs(win_rate_quadrature(MisspecMap::reversed(), beta)) < 2 * beta);
}

TEST_CASE("property: KL strictly decreases in beta; identity win rate increases as beta falls") {
    const auto betas = log_beta_grid(5.0, 1e-3, 200);
    for (std::size_t i = 1; i < betas.size(); ++i) {
        CHECK(kl_closed_form(betas[i]) > kl_closed_form(betas[i - 1]));
        CHECK(win_rate_quadrature(MisspecMap::identity(), betas[i]) >
              win_rate_quadrature(MisspecMap::identity(), betas[i - 1]));
        CHECK(win_rate_quadrature(MisspecMap::reversed(), betas[i]) <
              win_rate_quadrature(MisspecMap::reversed(), betas[i - 1]));
    }
}

TEST_CASE("property: identity and reversed are mirror images") {
    testutil::Gen g(24);
    for (int trial = 0; trial < 100; ++trial) {
        const double beta = g.beta();
        CHECK(win_rate_quadrature(MisspecMap::identity(), beta) +
                  win_rate_quadrature(MisspecMap::reversed(), beta) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("property: quadrature agrees with Monte Carlo") {
    testutil::Gen g(25);
    for (int trial = 0; trial < 6; ++trial) {
        const double beta = g.beta(0.05, 5.0);
        const double c = g.param_c();
        for (const auto& m : {MisspecMap::identity(), MisspecMap::reversed(),
                              MisspecMap::top_wrong(c), MisspecMap::worst_wrong(c)}) {
            const double q = win_rate_quadrature(m, beta);
            const double mc = monte_carlo_win_rate(m, beta, 200'000, 1000 + trial);
            INFO(m.name(), " c=", c, " beta=", beta);
            CHECK(std::abs(q - mc) < 5e-3);
        }
    }
}

TEST_CASE("tradeoff curve") {
    const std::vector<double> betas = {1.0, 0.1, 5.0};
    const auto pts = tradeoff_curve(MisspecMap::identity(), betas);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].beta == 5.0);
    CHECK(pts[2].beta == 0.1);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        CHECK(pts[i].kl >= pts[i - 1].kl);
    }
    CHECK(pts[1].kl == kl_closed_form(1.0));
    CHECK(pts[1].win_rate == win_rate_quadrature(MisspecMap::identity(), 1.0));

    const std::vector<double> bad = {1.0, -0.5};
    try {
        (void)tradeoff_curve(MisspecMap::identity(), bad);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("beta=-0.5") != std::string::npos);
    }
}

TEST_CASE("log beta grid") {
    const auto g = log_beta_grid(5.0, 1e-3, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 5.0);
    CHECK(g.back() == doctest::Approx(1e-3));
    for (std::size_t i = 1; i < g.size(); ++i) {
        CHECK(g[i] < g[i - 1]);
    }
}
