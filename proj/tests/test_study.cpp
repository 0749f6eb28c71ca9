#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "maxmix/study.hpp"

using namespace maxmix;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

StudyConfig small_study() {
    StudyConfig cfg = study_design_m1(0.5);
    cfg.k = 12;
    cfg.n = 200;
    cfg.experiments = 2;
    cfg.bins = 8;
    cfg.a_grid = {0.0, 0.5, 1.0};
    cfg.seed = 404;
    return cfg;
}

}  // namespace

TEST_CASE("study designs carry the documented parameters") {
    auto m1 = study_design_m1(0.75);
    CHECK(m1.model.a == 0.75);
    CHECK(m1.domain == 2.0);
    CHECK(family_name(m1.model.x) == "teg");
    CHECK(family_name(m1.model.y) == "teg");
    CHECK(std::get<TegParams>(m1.model.x.family).r == 0.2);
    CHECK(std::get<TegParams>(m1.model.y.family).r == 0.9);
    auto m2 = study_design_m2(0.5);
    CHECK(m2.domain == 5.0);
    CHECK(family_name(m2.model.x) == "brown-resnick");
    CHECK(family_name(m2.model.y) == "extremal-t");
    CHECK(std::get<BrownResnickParams>(m2.model.x.family).vario.exponent == 2.0);
    CHECK(std::get<ExtremalTParams>(m2.model.y.family).dof == 2.0);
}

TEST_CASE("study config validation") {
    auto cfg = small_study();
    CHECK_NOTHROW(validate(cfg));
    auto bad = cfg;
    bad.k = 1;
    CHECK_THROWS_AS(validate(bad), invalid_input);
    bad = cfg;
    bad.a_grid = {0.5, 1.2};
    CHECK_THROWS_AS(validate(bad), invalid_input);
    bad = cfg;
    bad.experiments = 0;
    CHECK_THROWS_AS(validate(bad), invalid_input);
    bad = cfg;
    bad.bins = 0;
    CHECK_THROWS_AS(validate(bad), invalid_input);
    bad = cfg;
    bad.threads = 0;
    CHECK_THROWS_AS(validate(bad), invalid_input);
}

TEST_CASE("experiment seeds and site layouts differ by index") {
    CHECK(detail::experiment_seed(1, 0) != detail::experiment_seed(1, 1));
    CHECK(detail::experiment_seed(1, 0) != detail::experiment_seed(2, 0));
    auto s0 = detail::random_sites(9, 0, 10, 2.0);
    auto s1 = detail::random_sites(9, 1, 10, 2.0);
    REQUIRE(s0.size() == 10);
    bool same = true;
    for (int i = 0; i < 10; ++i)
        if (s0.sites[i].c1 != s1.sites[i].c1 || s0.sites[i].c2 != s1.sites[i].c2) same = false;
    CHECK_FALSE(same);
    for (const auto& s : s0.sites) {
        CHECK(s.c1 >= 0.0);
        CHECK(s.c1 <= 2.0);
        CHECK(s.c2 >= 0.0);
        CHECK(s.c2 <= 2.0);
    }
    CHECK(s0.sites[0].id == "s1");
    CHECK(s0.sites[9].id == "s10");
}

TEST_CASE("box statistics use linear-interpolation quantiles") {
    auto b = detail::box_stats({5.0, 1.0, 3.0, 2.0, 4.0});
    CHECK(b.min == 1.0);
    CHECK(b.q1 == 2.0);
    CHECK(b.median == 3.0);
    CHECK(b.q3 == 4.0);
    CHECK(b.max == 5.0);
    auto b2 = detail::box_stats({1.0, 2.0});
    CHECK(b2.median == Catch::Approx(1.5));
    CHECK(b2.q1 == Catch::Approx(1.25));
}

TEST_CASE("small study end to end: selection, aggregation, files") {
    auto cfg = small_study();
    auto dir = (std::filesystem::temp_directory_path() / "maxmix_study_smoke").string();
    std::filesystem::remove_all(dir);
    int calls = 0;
    auto rep = run_simulation_study(cfg, dir, [&](int done, int total) {
        ++calls;
        CHECK(total == cfg.experiments);
        CHECK(done >= 1);
        CHECK(done <= total);
    });
    CHECK(calls == cfg.experiments);
    REQUIRE(rep.results.size() == 2);
    CHECK(rep.results[0].index == 0);
    CHECK(rep.results[1].index == 1);
    REQUIRE(rep.selection_count.size() == 3);
    CHECK(rep.selection_count[0] + rep.selection_count[1] + rep.selection_count[2] == 2);
    REQUIRE(rep.dc_box.size() == 3);
    REQUIRE(rep.mse.size() == 3);
    REQUIRE(rep.bin_edges.size() == 9);
    CHECK(rep.bin_edges.back() == Catch::Approx(2.0 * std::sqrt(2.0)));
    // per-a MSE curves live on the shared bin grid
    for (const auto& c : rep.mse) {
        CHECK(c.h.size() == 8);
        CHECK(c.mse_x.size() == 8);
        CHECK(c.experiments.size() == 8);
    }
    // selection frequencies by value, and the off-grid error
    const double f0 = rep.selection_frequency(0.0), f5 = rep.selection_frequency(0.5),
                 f1 = rep.selection_frequency(1.0);
    CHECK(f0 + f5 + f1 == Catch::Approx(1.0));
    CHECK_THROWS_AS(rep.selection_frequency(0.33), invalid_input);
    // flushed files exist
    for (const char* name : {"exp_1_dc.csv", "exp_1_theta.csv", "exp_2_dc.csv",
                             "exp_2_theta.csv", "study_mse.csv", "study_dc_box.csv",
                             "study_ahat.csv"}) {
        INFO(name);
        CHECK(std::filesystem::exists(std::filesystem::path(dir) / name));
    }
    // headers
    CHECK(slurp(dir + "/study_mse.csv").rfind("a,bin,h,mse_x,mse_y,experiments\n", 0) == 0);
    CHECK(slurp(dir + "/study_dc_box.csv")
              .rfind("a,min,q1,median,q3,max,select_count,select_freq\n", 0) == 0);
}

TEST_CASE("study reruns and thread counts do not change the outputs") {
    auto cfg = small_study();
    auto d1 = (std::filesystem::temp_directory_path() / "maxmix_study_rerun1").string();
    auto d2 = (std::filesystem::temp_directory_path() / "maxmix_study_rerun2").string();
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
    auto r1 = run_simulation_study(cfg, d1);
    auto cfg2 = cfg;
    cfg2.threads = 2;  // same work split across workers
    auto r2 = run_simulation_study(cfg2, d2);
    REQUIRE(r1.results.size() == r2.results.size());
    for (size_t e = 0; e < r1.results.size(); ++e) {
        REQUIRE(r1.results[e].dc.dc.size() == r2.results[e].dc.dc.size());
        for (size_t i = 0; i < r1.results[e].dc.dc.size(); ++i)
            REQUIRE(r1.results[e].dc.dc[i] == r2.results[e].dc.dc[i]);
        CHECK(r1.results[e].a_hat == r2.results[e].a_hat);
    }
    CHECK(slurp(d1 + "/study_ahat.csv") == slurp(d2 + "/study_ahat.csv"));
    CHECK(slurp(d1 + "/study_mse.csv") == slurp(d2 + "/study_mse.csv"));
    // byte-identical on a plain rerun as well
    auto d3 = (std::filesystem::temp_directory_path() / "maxmix_study_rerun3").string();
    std::filesystem::remove_all(d3);
    run_simulation_study(cfg, d3);
    CHECK(slurp(d1 + "/study_ahat.csv") == slurp(d3 + "/study_ahat.csv"));
}

TEST_CASE("theoretical plug-in curves") {
    MaxMixtureSpec mm = study_design_m1(0.5).model;
    auto curves = theoretical_curves(mm, {0.5, 1.0, 1.5, 3.0}, {0.0, 0.2, 0.5, 1.0});
    // four lambda curves plus two disk-diameter markers
    REQUIRE(curves.size() == 6);
    for (int c = 0; c < 4; ++c) {
        CHECK(curves[c].kind == "theoretical");
        REQUIRE(curves[c].h.size() == 4);
        // colocated sites: both components completely dependent, madogram 0
        CHECK(curves[c].value[0] == Catch::Approx(0.0).margin(1e-12));
        // values increase with distance for these designs
        CHECK(curves[c].value[3] > curves[c].value[1]);
    }
    CHECK(curves[4].kind == "diameter-x");
    CHECK(curves[4].h[0] == Catch::Approx(0.4));
    CHECK(std::isnan(curves[4].value[0]));
    CHECK(curves[5].kind == "diameter-y");
    CHECK(curves[5].h[0] == Catch::Approx(1.8));
    // non-disk components produce no marker rows
    auto m2 = study_design_m2(0.5).model;
    auto c2 = theoretical_curves(m2, {1.0}, {0.1, 1.0});
    CHECK(c2.size() == 1);
    CHECK_THROWS_AS(theoretical_curves(mm, {}, {0.1}), invalid_input);
    CHECK_THROWS_AS(theoretical_curves(mm, {1.0}, {}), invalid_input);
}
