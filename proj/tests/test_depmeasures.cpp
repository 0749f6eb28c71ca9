#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "maxmix/depmeasures.hpp"

using namespace maxmix;

namespace {

MaxStableSpec smith_iso(double s) { return {SmithParams{s, 0.0, s}}; }
MaxStableSpec teg(double r, double range) { return {TegParams{r, {range}}}; }
MaxStableSpec br(double scale, double expo) { return {BrownResnickParams{{scale, expo}}}; }
MaxStableSpec extt(double dof, double range) { return {ExtremalTParams{dof, {range}}}; }

}  // namespace

TEST_CASE("extremal coefficient closed forms match independent references") {
    // storm-profile family: theta = 2 Phi(h / (2 sigma))
    CHECK(theta_closed_form(smith_iso(1.0), 2.0) ==
          Catch::Approx(1.6826894921370859).epsilon(1e-12));
    CHECK(theta_closed_form(smith_iso(0.36), 0.6) ==
          Catch::Approx(1.3829249225480262).epsilon(1e-12));
    // truncated extremal Gaussian
    CHECK(theta_closed_form(teg(0.25, 0.2), 0.25) ==
          Catch::Approx(1.7986417592910882).epsilon(1e-12));
    // variogram family: scale 1, exponent 2, h 1 gives 2 Phi(0.5)
    CHECK(theta_closed_form(br(1.0, 2.0), 1.0) ==
          Catch::Approx(1.3829249225480262).epsilon(1e-12));
    CHECK(theta_closed_form(br(1.4, 1.5), 2.0) ==
          Catch::Approx(1.4864698962159975).epsilon(1e-11));
    // t family: rho = 0 (underflows exactly) gives 2 T_2(sqrt 2)
    CHECK(theta_closed_form(extt(1.0, 1.0), 800.0) ==
          Catch::Approx(1.7071067811865475).epsilon(1e-12));
    CHECK(theta_closed_form(extt(2.0, 1.5), 1.0) ==
          Catch::Approx(1.6015335665375987).epsilon(1e-11));
}

TEST_CASE("theta boundary behaviour") {
    // colocated sites are completely dependent
    CHECK(theta_closed_form(smith_iso(0.5), 0.0) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(theta_closed_form(teg(0.3, 0.4), 0.0) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(theta_closed_form(br(1.0, 1.0), 0.0) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(theta_closed_form(extt(3.0, 1.0), 0.0) == Catch::Approx(1.0).epsilon(1e-12));
    // disk family reaches exact independence beyond the diameter
    CHECK(theta_closed_form(teg(0.25, 0.2), 0.5) == 2.0);
    CHECK(theta_closed_form(teg(0.25, 0.2), 7.0) == 2.0);
    // theta stays in [1,2] on a coarse sweep
    for (double h : {0.01, 0.1, 0.5, 1.0, 3.0, 20.0}) {
        for (const auto& s : {smith_iso(0.8), teg(0.4, 0.3), br(1.2, 1.3), extt(2.0, 0.9)}) {
            const double t = theta_closed_form(s, h);
            CHECK(t >= 1.0);
            CHECK(t <= 2.0);
        }
    }
    CHECK_THROWS_AS(theta_closed_form(smith_iso(1.0), -0.1), invalid_input);
}

TEST_CASE("anisotropic storm covariance rejects scalar-lag queries") {
    MaxStableSpec s{SmithParams{1.0, 0.2, 1.0}};
    CHECK_THROWS_AS(theta_closed_form(s, 1.0), invalid_input);
    MaxStableSpec s2{SmithParams{1.0, 0.0, 2.0}};
    CHECK_THROWS_AS(exponent_bivariate(s2, 1.0, 1.0, 1.0), invalid_input);
}

TEST_CASE("exponent function: diagonal recovers theta, homogeneity, marginal limit") {
    const std::vector<MaxStableSpec> specs = {smith_iso(0.7), teg(0.35, 0.25), br(1.1, 1.6),
                                              extt(2.0, 1.2)};
    for (const auto& s : specs) {
        for (double h : {0.05, 0.3, 0.9}) {
            for (double z : {0.4, 1.0, 2.5}) {
                CHECK(z * exponent_bivariate(s, h, z, z) ==
                      Catch::Approx(theta_closed_form(s, h)).margin(1e-10));
            }
            // order -1 homogeneity
            const double v = exponent_bivariate(s, h, 0.8, 1.7);
            for (double t : {0.3, 2.0, 11.0}) {
                CHECK(exponent_bivariate(s, h, 0.8 * t, 1.7 * t) ==
                      Catch::Approx(v / t).epsilon(1e-12));
            }
            // V(x, inf) -> 1/x
            CHECK(exponent_bivariate(s, h, 1.3, 1e9) == Catch::Approx(1.0 / 1.3).margin(1e-6));
        }
    }
    CHECK_THROWS_AS(exponent_bivariate(smith_iso(1.0), 1.0, -1.0, 1.0), invalid_input);
    CHECK_THROWS_AS(exponent_bivariate(smith_iso(1.0), 1.0, 1.0, 0.0), invalid_input);
}

TEST_CASE("mixture madogram closed form matches named limits") {
    // max-stable limit at a=1: nu = lambda/(1+lambda) * (theta-1)/(lambda+theta)
    for (double lam : {0.5, 1.0, 1.5, 3.0}) {
        for (double tx : {1.0, 1.3, 1.8, 2.0}) {
            CHECK(flambda_mm_theoretical(1.0, lam, tx, 1.5) ==
                  Catch::Approx(lam / (1.0 + lam) * (tx - 1.0) / (lam + tx)).epsilon(1e-13));
        }
    }
    // lambda=1, a=1: theta_from_fmadogram inverts the madogram exactly
    for (double tx : {1.0, 1.2, 1.5, 1.75, 2.0}) {
        CHECK(theta_from_fmadogram(flambda_mm_theoretical(1.0, 1.0, tx, 1.3)) ==
              Catch::Approx(tx).epsilon(1e-12));
    }
    // independence inside the max-stable part, lambda=1: nu = 1/6
    CHECK(flambda_mm_theoretical(1.0, 1.0, 2.0, 1.0) == Catch::Approx(1.0 / 6.0).epsilon(1e-13));
    // complete dependence: nu = 0
    CHECK(flambda_mm_theoretical(1.0, 1.0, 1.0, 1.0) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("mixture madogram branches are continuous") {
    for (double lam : {0.5, 1.0, 3.0}) {
        const double at_one = flambda_mm_theoretical(1.0, lam, 1.6, 1.4);
        const double near_one = flambda_mm_theoretical(1.0 - 2e-8, lam, 1.6, 1.4);
        CHECK(near_one == Catch::Approx(at_one).margin(1e-7));
        const double at_zero = flambda_mm_theoretical(0.0, lam, 1.6, 1.4);
        const double near_zero = flambda_mm_theoretical(1e-11, lam, 1.6, 1.4);
        CHECK(near_zero == Catch::Approx(at_zero).margin(1e-9));
    }
}

TEST_CASE("mixture madogram closed form agrees with direct quadrature") {
    const double thetas[][2] = {{1.0, 1.0}, {1.3, 1.7}, {1.9, 1.1}, {2.0, 2.0}, {1.5, 1.5}};
    for (double a : {0.0, 0.1, 0.35, 0.6, 0.9, 0.99, 1.0}) {
        for (double lam : {0.5, 1.0, 1.5, 3.0}) {
            for (const auto& th : thetas) {
                const double closed = flambda_mm_theoretical(a, lam, th[0], th[1]);
                const double quad = flambda_integral_oracle(a, lam, th[0], th[1]);
                INFO("a=" << a << " lambda=" << lam << " tx=" << th[0] << " ty=" << th[1]);
                CHECK(closed == Catch::Approx(quad).margin(1e-8));
            }
        }
    }
}

TEST_CASE("theta_from_fmadogram mapping and domain") {
    CHECK(theta_from_fmadogram(0.0) == 1.0);
    CHECK(theta_from_fmadogram(1.0 / 6.0) == Catch::Approx(2.0).epsilon(1e-13));
    CHECK(theta_from_fmadogram(0.1) == Catch::Approx(1.5).epsilon(1e-13));
    CHECK(theta_from_fmadogram(0.49) == 2.0);  // clamped into [1,2]
    CHECK_THROWS_AS(theta_from_fmadogram(0.5), invalid_input);
    CHECK_THROWS_AS(theta_from_fmadogram(-0.01), invalid_input);
    CHECK_THROWS_AS(theta_from_fmadogram(std::numeric_limits<double>::quiet_NaN()),
                    invalid_input);
}

TEST_CASE("chi and eta of the mixture follow the closed forms") {
    MaxMixtureSpec mm;
    mm.a = 0.6;
    mm.x = teg(0.25, 0.2);
    mm.y = extt(2.0, 1.5);
    const double tx = theta_closed_form(mm.x, 0.25);
    CHECK(chi_mm(mm, 0.25) == Catch::Approx(0.6 * (2.0 - tx)).epsilon(1e-13));
    CHECK(chi_mm(mm, 5.0) == Catch::Approx(0.0).margin(1e-15));  // beyond the disk
    CHECK(eta_of(mm.y, 1.0) == Catch::Approx(1.0 / 1.6015335665375987).epsilon(1e-11));
}

TEST_CASE("empirical madogram on hand-built uniform pairs") {
    // two sites, constant |u1 - u2| = 0.6 so nu-hat = 0.3
    FieldSample f(4, 2, Margins::uniform);
    const double rows[4][2] = {{0.2, 0.8}, {0.8, 0.2}, {0.2, 0.8}, {0.8, 0.2}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) f.at(i, j) = rows[i][j];
    SiteSet ss;
    ss.sites = {{"a", 0.0, 0.0, 0.0}, {"b", 1.0, 0.0, 0.0}};
    auto pairs = pairwise_lags(ss);
    auto bins = bin_lags(pairs, 1.0);
    auto curve = flambda_madogram_empirical(f, pairs, bins, 1.0);
    REQUIRE(curve.h.size() == 1);
    CHECK(curve.value[0] == Catch::Approx(0.3).epsilon(1e-14));
    CHECK(curve.count[0] == 4);
    // lambda=2 weights the upper tail: 0.5|0.04-0.64| = 0.3 as well by symmetry
    auto c2 = flambda_madogram_empirical(f, pairs, bins, 2.0);
    CHECK(c2.value[0] == Catch::Approx(0.5 * (0.64 - 0.04)).epsilon(1e-14));
    CHECK_THROWS_AS(flambda_madogram_empirical(f, pairs, bins, 0.0), invalid_input);
    // single-pair route gives the same number
    long cnt = 0;
    CHECK(flambda_madogram_pair(f, pairs[0], 1.0, &cnt) == Catch::Approx(0.3).epsilon(1e-14));
    CHECK(cnt == 4);
}

TEST_CASE("empirical madogram drops incomplete pair observations") {
    FieldSample f(3, 2, Margins::uniform);
    f.at(0, 0) = 0.2;
    f.at(0, 1) = 0.8;
    f.at(1, 0) = std::numeric_limits<double>::quiet_NaN();
    f.at(1, 1) = 0.5;
    f.at(2, 0) = 0.8;
    f.at(2, 1) = 0.2;
    SiteSet ss;
    ss.sites = {{"a", 0.0, 0.0, 0.0}, {"b", 1.0, 0.0, 0.0}};
    auto pairs = pairwise_lags(ss);
    auto bins = bin_lags(pairs, 1.0);
    auto curve = fmadogram_empirical(f, pairs, bins);
    REQUIRE(curve.count.size() == 1);
    CHECK(curve.count[0] == 2);
    CHECK(curve.value[0] == Catch::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("chi and chibar equal one under perfect dependence") {
    FieldSample f(9, 2, Margins::uniform);
    for (int i = 0; i < 9; ++i) {
        f.at(i, 0) = 0.1 * (i + 1);
        f.at(i, 1) = 0.1 * (i + 1);
    }
    SiteSet ss;
    ss.sites = {{"a", 0.0, 0.0, 0.0}, {"b", 1.0, 0.0, 0.0}};
    auto pairs = pairwise_lags(ss);
    auto bins = bin_lags(pairs, 1.0);
    auto curve = chi_chibar_empirical(f, pairs, bins, 0.5);
    REQUIRE(curve.h.size() == 1);
    REQUIRE(curve.defined[0]);
    CHECK(curve.chi[0] == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(curve.chibar[0] == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(curve.joint_count[0] == 4);
    CHECK_THROWS_AS(chi_chibar_empirical(f, pairs, bins, 1.0), invalid_input);
    // no joint exceedances at an extreme threshold: flagged, not crashed
    auto hi = chi_chibar_empirical(f, pairs, bins, 0.95);
    REQUIRE(hi.h.size() == 1);
    CHECK_FALSE(hi.defined[0]);
    CHECK(std::isnan(hi.chi[0]));
}
