#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "maxmix/depmeasures.hpp"
#include "maxmix/simulate.hpp"

using namespace maxmix;

namespace {

SiteSet square4(double side) {
    SiteSet ss;
    ss.sites = {{"a", 0.0, 0.0, 0.0},
                {"b", side, 0.0, 0.0},
                {"c", 0.0, side, 0.0},
                {"d", side, side, 0.0}};
    return ss;
}

// One-sample Kolmogorov-Smirnov distance of column j against unit Frechet.
double ks_unit_frechet(const FieldSample& f, int j) {
    std::vector<double> z;
    z.reserve(f.n);
    for (int i = 0; i < f.n; ++i) {
        REQUIRE(std::isfinite(f.at(i, j)));
        REQUIRE(f.at(i, j) > 0.0);
        z.push_back(f.at(i, j));
    }
    std::sort(z.begin(), z.end());
    const double n = static_cast<double>(z.size());
    double d = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        const double u = std::exp(-1.0 / z[i]);
        d = std::max(d, std::max(u - i / n, (i + 1) / n - u));
    }
    return d;
}

}  // namespace

TEST_CASE("simulation is a pure function of the seed") {
    auto ss = square4(1.0);
    MaxStableSpec spec{TegParams{0.5, {0.3}}};
    auto f1 = simulate_max_stable(spec, ss, 50, 99);
    auto f2 = simulate_max_stable(spec, ss, 50, 99);
    REQUIRE(f1.values == f2.values);
    auto f3 = simulate_max_stable(spec, ss, 50, 100);
    CHECK(f1.values != f3.values);
    CHECK(f1.margins == Margins::unit_frechet);
    CHECK(f1.seed == 99);
    CHECK(f1.seed_label == "max-stable");
}

TEST_CASE("all four families produce unit Frechet margins") {
    // alpha = 0.001 KS critical value at n = 5000
    const double crit = 1.949 / std::sqrt(5000.0);
    auto ss = square4(1.0);
    const std::vector<std::pair<std::string, MaxStableSpec>> specs = {
        {"smith", MaxStableSpec{SmithParams{0.36, 0.0, 0.36}}},
        {"teg", MaxStableSpec{TegParams{0.5, {0.3}}}},
        {"brown-resnick", MaxStableSpec{BrownResnickParams{{1.0, 1.0}}}},
        {"extremal-t", MaxStableSpec{ExtremalTParams{2.0, {1.0}}}},
    };
    for (const auto& [name, spec] : specs) {
        auto f = simulate_max_stable(spec, ss, 5000, 2024);
        for (int j = 0; j < f.k; ++j) {
            INFO(name << " site " << j);
            CHECK(ks_unit_frechet(f, j) < crit);
        }
    }
}

TEST_CASE("disk storms are exactly independent beyond the diameter") {
    SiteSet ss;
    ss.sites = {{"a", 0.0, 0.0, 0.0}, {"b", 1.5, 0.0, 0.0}, {"c", 3.0, 0.0, 0.0}};
    MaxStableSpec spec{TegParams{0.5, {0.3}}};  // diameter 1 < every lag
    auto f = simulate_max_stable(spec, ss, 4000, 7);
    auto pairs = pairwise_lags(ss);
    auto bins = bin_lags(pairs, 3.0);  // one pooled bin
    auto curve = fmadogram_empirical(f, pairs, bins);
    REQUIRE(curve.value.size() == 1);
    // independent unit Frechet pairs have F-madogram 1/6
    CHECK(curve.value[0] == Catch::Approx(1.0 / 6.0).margin(0.01));
    CHECK(theta_from_fmadogram(curve.value[0]) == Catch::Approx(2.0).margin(0.1));
}

TEST_CASE("pointwise inversion maps the known value and passes NaN through") {
    FieldSample f(3, 1, Margins::unit_frechet);
    f.at(0, 0) = 1.0;
    f.at(1, 0) = std::numeric_limits<double>::quiet_NaN();
    f.at(2, 0) = 10.0;
    auto g = invert_max_stable(f);
    CHECK(g.margins == Margins::unit_frechet);
    // -1/log(1 - e^{-1})
    CHECK(g.at(0, 0) == Catch::Approx(2.180192256016155).epsilon(1e-12));
    CHECK(std::isnan(g.at(1, 0)));
    // inversion swaps tails: a large value maps near the lower end
    CHECK(g.at(2, 0) < 0.5);
    CHECK(g.at(2, 0) > 0.0);

    FieldSample raw(1, 1, Margins::raw);
    raw.at(0, 0) = 1.0;
    CHECK_THROWS_AS(invert_max_stable(raw), invalid_input);
    FieldSample bad(1, 1, Margins::unit_frechet);
    bad.at(0, 0) = -1.0;
    CHECK_THROWS_AS(invert_max_stable(bad), invalid_input);
}

TEST_CASE("inversion preserves unit Frechet margins exactly") {
    auto ss = square4(1.0);
    MaxStableSpec spec{TegParams{0.5, {0.3}}};
    auto y = invert_max_stable(simulate_max_stable(spec, ss, 5000, 31));
    const double crit = 1.949 / std::sqrt(5000.0);
    for (int j = 0; j < y.k; ++j) CHECK(ks_unit_frechet(y, j) < crit);
}

TEST_CASE("gaussian to Frechet marginal map") {
    FieldSample f(2, 1, Margins::raw);
    f.at(0, 0) = 0.0;
    f.at(1, 0) = std::numeric_limits<double>::quiet_NaN();
    auto g = gaussian_to_ai_frechet(f);
    CHECK(g.margins == Margins::unit_frechet);
    CHECK(g.at(0, 0) == Catch::Approx(1.4426950408889634).epsilon(1e-12));  // -1/log(1/2)
    CHECK(std::isnan(g.at(1, 0)));
}

TEST_CASE("mixture endpoints reuse the component streams exactly") {
    auto ss = square4(1.0);
    MaxMixtureSpec mm;
    mm.x = MaxStableSpec{TegParams{0.4, {0.2}}};
    mm.y = MaxStableSpec{TegParams{0.8, {0.6}}};
    const std::uint64_t seed = 555;

    mm.a = 1.0;
    auto z1 = simulate_max_mixture(mm, ss, 30, seed);
    auto x = simulate_max_stable(mm.x, ss, 30, seed, "mm-x");
    REQUIRE(z1.values == x.values);
    CHECK(z1.seed_label == "mm-x (a=1)");

    mm.a = 0.0;
    auto z0 = simulate_max_mixture(mm, ss, 30, seed);
    auto y = invert_max_stable(simulate_max_stable(mm.y, ss, 30, seed, "mm-y"));
    REQUIRE(z0.values == y.values);

    mm.a = 0.5;
    auto zh = simulate_max_mixture(mm, ss, 30, seed);
    REQUIRE(zh.values.size() == x.values.size());
    for (size_t i = 0; i < zh.values.size(); ++i)
        REQUIRE(zh.values[i] == std::max(0.5 * x.values[i], 0.5 * y.values[i]));
}

TEST_CASE("mixture margins are unit Frechet") {
    auto ss = square4(1.0);
    MaxMixtureSpec mm;
    mm.a = 0.5;
    mm.x = MaxStableSpec{TegParams{0.4, {0.2}}};
    mm.y = MaxStableSpec{TegParams{0.8, {0.6}}};
    auto z = simulate_max_mixture(mm, ss, 5000, 77);
    CHECK(z.margins == Margins::unit_frechet);
    const double crit = 1.949 / std::sqrt(5000.0);
    for (int j = 0; j < z.k; ++j) CHECK(ks_unit_frechet(z, j) < crit);
}

TEST_CASE("gaussian_factor handles PSD inputs and rejects indefinite ones") {
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
    auto a = gaussian_factor(id);
    CHECK((a * a.transpose() - id).norm() < 1e-12);
    // rank-one PSD matrix (perfect correlation)
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 3);
    auto b = gaussian_factor(ones);
    CHECK((b * b.transpose() - ones).norm() < 1e-10);
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
    CHECK_THROWS_AS(gaussian_factor(indef), numeric_failure);
    Eigen::MatrixXd rect(2, 3);
    rect.setZero();
    CHECK_THROWS_AS(gaussian_factor(rect), invalid_input);
}

TEST_CASE("correlated gaussian sampler has the requested moments") {
    SiteSet ss;
    ss.sites = {{"a", 0.0, 0.0, 0.0}, {"b", 1.0, 0.0, 0.0}};
    auto f = sample_gaussian(ss, {1.0}, 20000, 13);
    CHECK(f.margins == Margins::raw);
    double m0 = 0, m1 = 0, v0 = 0, v1 = 0, cov = 0;
    for (int i = 0; i < f.n; ++i) {
        m0 += f.at(i, 0);
        m1 += f.at(i, 1);
    }
    m0 /= f.n;
    m1 /= f.n;
    for (int i = 0; i < f.n; ++i) {
        const double d0 = f.at(i, 0) - m0, d1 = f.at(i, 1) - m1;
        v0 += d0 * d0;
        v1 += d1 * d1;
        cov += d0 * d1;
    }
    v0 /= f.n;
    v1 /= f.n;
    cov /= f.n;
    CHECK(m0 == Catch::Approx(0.0).margin(0.03));
    CHECK(m1 == Catch::Approx(0.0).margin(0.03));
    CHECK(v0 == Catch::Approx(1.0).margin(0.05));
    CHECK(v1 == Catch::Approx(1.0).margin(0.05));
    CHECK(cov / std::sqrt(v0 * v1) ==
          Catch::Approx(0.36787944117144233).margin(0.03));
}

TEST_CASE("simulation input validation") {
    auto ss = square4(1.0);
    MaxStableSpec spec{TegParams{0.5, {0.3}}};
    CHECK_THROWS_AS(simulate_max_stable(spec, ss, 0, 1), invalid_input);
    SiteSet geo;
    geo.coords = CoordSystem::lonlat;
    geo.sites = {{"a", 0.0, 0.0, 0.0}, {"b", 1.0, 0.0, 0.0}};
    CHECK_THROWS_AS(simulate_max_stable(spec, geo, 5, 1), invalid_input);
    MaxStableSpec bad{TegParams{-1.0, {0.3}}};
    CHECK_THROWS_AS(simulate_max_stable(bad, ss, 5, 1), invalid_input);
    MaxMixtureSpec mm;
    mm.a = 1.5;
    CHECK_THROWS_AS(simulate_max_mixture(mm, ss, 5, 1), invalid_input);
}
