#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "maxmix/depmeasures.hpp"
#include "maxmix/errors.hpp"
#include "maxmix/estimate.hpp"
#include "maxmix/io.hpp"
#include "maxmix/models.hpp"
#include "maxmix/rng.hpp"
#include "maxmix/simulate.hpp"
#include "maxmix/spatial.hpp"

namespace maxmix {

struct StudyConfig {
  MaxMixtureSpec model;
  double domain = 2.0;   // square side, sites uniform on [0, domain]^2
  int k = 50;            // sites per experiment
  int n = 2000;          // replicates per experiment
  int experiments = 20;  // independent repetitions of the whole pipeline
  std::vector<double> a_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  int bins = 15;  // shared lag-bin count over [0, domain*sqrt(2)]
  NlsConfig nls;
  DCWeights weights = DCWeights::equal;
  double weight_quantile = 0.5;
  int threads = 1;
  std::uint64_t seed = 1;
  bool exact_margins = false;  // default: rank margins, as with real data
};

// Disk-storm X blended with an inverted disk-storm Y.
inline StudyConfig study_design_m1(double a0) {
  StudyConfig cfg;
  cfg.model.a = a0;
  cfg.model.x.family = TegParams{0.2, CorrelationSpec{0.1}};
  cfg.model.y.family = TegParams{0.9, CorrelationSpec{0.7}};
  cfg.domain = 2.0;
  return cfg;
}

// Log-normal-spectral X blended with an inverted extremal-t Y.
inline StudyConfig study_design_m2(double a0) {
  StudyConfig cfg;
  cfg.model.a = a0;
  cfg.model.x.family = BrownResnickParams{VariogramSpec{0.1, 2.0}};
  cfg.model.y.family = ExtremalTParams{2.0, CorrelationSpec{1.5}};
  cfg.domain = 5.0;
  return cfg;
}

inline void validate(const StudyConfig& cfg) {
  validate(cfg.model);
  if (!(cfg.domain > 0.0)) throw invalid_input("study: domain side must be positive");
  if (cfg.k < 2) throw invalid_input("study: need at least 2 sites");
  if (cfg.n < 2) throw invalid_input("study: need at least 2 replicates");
  if (cfg.experiments < 1) throw invalid_input("study: need at least 1 experiment");
  if (cfg.a_grid.empty()) throw invalid_input("study: empty a grid");
  for (double a : cfg.a_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw invalid_input("study: a grid entries must be in [0,1]");
  if (cfg.bins < 1) throw invalid_input("study: need at least 1 lag bin");
  if (cfg.threads < 1) throw invalid_input("study: need at least 1 thread");
}

struct ExperimentResult {
  int index = 0;
  SiteSet sites;
  DCResult dc;
  double a_hat = 0.0;
};

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Aggregated over experiments on the shared bin grid. Bin cells that never
// received a pair stay at count 0 with NaN values.
struct StudyMseCurve {
  double a = 0.0;
  std::vector<double> h;      // mean representative distance per shared bin
  std::vector<double> mse_x;  // relative MSE of theta_x against the truth
  std::vector<double> mse_y;
  std::vector<int> experiments;  // contributing experiment count per bin
};

struct StudyReport {
  StudyConfig config;
  std::vector<double> bin_edges;
  std::vector<ExperimentResult> results;        // ordered by experiment index
  std::vector<int> selection_count;             // per a-grid entry
  std::vector<BoxStats> dc_box;                 // per a-grid entry
  std::vector<StudyMseCurve> mse;               // per a-grid entry
  double selection_frequency(double a0) const {
    for (size_t i = 0; i < config.a_grid.size(); ++i)
      if (config.a_grid[i] == a0)
        return static_cast<double>(selection_count[i]) / results.size();
    throw invalid_input("selection_frequency: a0 not on the grid");
  }
};

namespace detail {

// Child seed for one experiment; decorrelated from the master stream and from
// every other experiment index.
inline std::uint64_t experiment_seed(std::uint64_t master, int index) {
  std::uint64_t state = master ^ hash_label("study-experiment");
  state ^= static_cast<std::uint64_t>(index) * 0xda942042e4dd58b5ULL + 0x2545f4914f6cdd1dULL;
  return splitmix64(state);
}

inline SiteSet random_sites(std::uint64_t seed, int index, int k, double side) {
  auto eng = substream(seed, "study-sites", static_cast<std::uint64_t>(index));
  std::uniform_real_distribution<double> u(0.0, side);
  SiteSet ss;
  ss.coords = CoordSystem::euclidean;
  for (int j = 0; j < k; ++j)
    ss.sites.push_back(Site{"s" + std::to_string(j + 1), u(eng), u(eng)});
  return ss;
}

inline BoxStats box_stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double t = p * (v.size() - 1);
    const size_t lo = static_cast<size_t>(t);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (t - lo) * (v[hi] - v[lo]);
  };
  return BoxStats{v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

}  // namespace detail

inline ExperimentResult run_experiment(const StudyConfig& cfg, int index) {
  ExperimentResult r;
  r.index = index;
  r.sites = detail::random_sites(cfg.seed, index, cfg.k, cfg.domain);
  FieldSample field =
      simulate_max_mixture(cfg.model, r.sites, cfg.n, detail::experiment_seed(cfg.seed, index));
  // Rank margins mimic the real-data pipeline; the exact-margins switch keeps
  // the known unit-Frechet probability transform instead.
  if (!cfg.exact_margins) field.margins = Margins::raw;

  const auto pairs = pairwise_lags(r.sites);
  std::vector<double> edges(cfg.bins + 1);
  const double width = cfg.domain * std::sqrt(2.0) / cfg.bins;
  for (int b = 0; b <= cfg.bins; ++b) edges[b] = b * width;
  const LagBins bins = bin_lags(pairs, edges);

  r.dc = select_a(field, pairs, bins, cfg.a_grid, cfg.nls, cfg.weights, cfg.weight_quantile);
  r.a_hat = r.dc.a_hat;
  return r;
}

// Everything downstream of the per-experiment results is a deterministic
// reduction over the ordered result vector, so thread count never changes
// the report.
inline StudyReport aggregate_study(const StudyConfig& cfg,
                                   std::vector<ExperimentResult> results) {
  StudyReport rep;
  rep.config = cfg;
  const double width = cfg.domain * std::sqrt(2.0) / cfg.bins;
  rep.bin_edges.resize(cfg.bins + 1);
  for (int b = 0; b <= cfg.bins; ++b) rep.bin_edges[b] = b * width;

  rep.selection_count.assign(cfg.a_grid.size(), 0);
  for (const auto& r : results) ++rep.selection_count[r.dc.argmin_index];

  for (size_t ai = 0; ai < cfg.a_grid.size(); ++ai) {
    std::vector<double> dcvals;
    for (const auto& r : results) dcvals.push_back(r.dc.dc[ai]);
    rep.dc_box.push_back(detail::box_stats(std::move(dcvals)));

    StudyMseCurve curve;
    curve.a = cfg.a_grid[ai];
    curve.h.assign(cfg.bins, 0.0);
    curve.mse_x.assign(cfg.bins, 0.0);
    curve.mse_y.assign(cfg.bins, 0.0);
    curve.experiments.assign(cfg.bins, 0);
    for (const auto& r : results) {
      for (const auto& bin : r.dc.estimates[ai].bins) {
        const int b = std::min(cfg.bins - 1, static_cast<int>(bin.h / width));
        const double tx = theta_closed_form(cfg.model.x, bin.h);
        const double ty = theta_closed_form(cfg.model.y, bin.h);
        curve.h[b] += bin.h;
        curve.mse_x[b] += (bin.theta_x - tx) * (bin.theta_x - tx) / tx;
        curve.mse_y[b] += (bin.theta_y - ty) * (bin.theta_y - ty) / ty;
        ++curve.experiments[b];
      }
    }
    for (int b = 0; b < cfg.bins; ++b) {
      if (curve.experiments[b] == 0) {
        curve.h[b] = curve.mse_x[b] = curve.mse_y[b] =
            std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      curve.h[b] /= curve.experiments[b];
      curve.mse_x[b] /= curve.experiments[b];
      curve.mse_y[b] /= curve.experiments[b];
    }
    rep.mse.push_back(std::move(curve));
  }
  rep.results = std::move(results);
  return rep;
}

// Runs the M experiments (concurrently when cfg.threads > 1), flushing one
// DC curve and one theta table per finished experiment; empty out_dir skips
// all file output. progress, when given, is called once per completion.
inline StudyReport run_simulation_study(
    const StudyConfig& cfg, const std::string& out_dir = "",
    const std::function<void(int, int)>& progress = nullptr) {
  validate(cfg);
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  std::vector<ExperimentResult> results(cfg.experiments);
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex io_mutex;  // single writer for files and progress
  std::exception_ptr first_error;

  auto worker = [&]() {
    while (true) {
      const int e = next.fetch_add(1);
      if (e >= cfg.experiments) return;
      try {
        ExperimentResult r = run_experiment(cfg, e);
        std::lock_guard<std::mutex> lock(io_mutex);
        if (!out_dir.empty()) {
          const std::string stem = out_dir + "/exp_" + std::to_string(e + 1);
          write_dc_csv(stem + "_dc.csv", r.dc);
          write_theta_csv(stem + "_theta.csv", r.dc.estimates);
        }
        results[e] = std::move(r);
        if (progress) progress(done.fetch_add(1) + 1, cfg.experiments);
      } catch (...) {
        std::lock_guard<std::mutex> lock(io_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int nw = std::min(cfg.threads, cfg.experiments);
  if (nw <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  StudyReport rep = aggregate_study(cfg, std::move(results));
  if (!out_dir.empty()) {
    {
      auto f = detail::open_out(out_dir + "/study_mse.csv");
      f << "a,bin,h,mse_x,mse_y,experiments\n";
      for (const auto& c : rep.mse)
        for (int b = 0; b < cfg.bins; ++b)
          f << detail::format_double(c.a) << ',' << (b + 1) << ','
            << detail::format_double(c.h[b]) << ',' << detail::format_double(c.mse_x[b]) << ','
            << detail::format_double(c.mse_y[b]) << ',' << c.experiments[b] << '\n';
    }
    {
      auto f = detail::open_out(out_dir + "/study_dc_box.csv");
      f << "a,min,q1,median,q3,max,select_count,select_freq\n";
      for (size_t ai = 0; ai < cfg.a_grid.size(); ++ai) {
        const auto& bx = rep.dc_box[ai];
        f << detail::format_double(cfg.a_grid[ai]) << ',' << detail::format_double(bx.min) << ','
          << detail::format_double(bx.q1) << ',' << detail::format_double(bx.median) << ','
          << detail::format_double(bx.q3) << ',' << detail::format_double(bx.max) << ','
          << rep.selection_count[ai] << ','
          << detail::format_double(static_cast<double>(rep.selection_count[ai]) /
                                   cfg.experiments)
          << '\n';
      }
    }
    {
      auto f = detail::open_out(out_dir + "/study_ahat.csv");
      f << "experiment,a_hat\n";
      for (const auto& r : rep.results)
        f << (r.index + 1) << ',' << detail::format_double(r.a_hat) << '\n';
    }
  }
  return rep;
}

// Plug-in madogram curves on an h grid, plus disk-diameter marker rows for
// any disk-storm component (value NaN, kind names the component).
inline std::vector<MadogramCurve> theoretical_curves(const MaxMixtureSpec& mm,
                                                     const std::vector<double>& lambdas,
                                                     const std::vector<double>& h_grid) {
  validate(mm);
  if (lambdas.empty() || h_grid.empty())
    throw invalid_input("theoretical_curves: empty lambda list or h grid");
  std::vector<MadogramCurve> out;
  for (double lam : lambdas) {
    MadogramCurve c;
    c.lambda = lam;
    c.kind = "theoretical";
    for (double h : h_grid) {
      c.h.push_back(h);
      c.value.push_back(flambda_mm_theoretical(mm.a, lam, theta_closed_form(mm.x, h),
                                               theta_closed_form(mm.y, h)));
      c.count.push_back(0);
    }
    out.push_back(std::move(c));
  }
  auto mark = [&](const MaxStableSpec& s, const char* kind) {
    if (const auto* p = std::get_if<TegParams>(&s.family)) {
      MadogramCurve c;
      c.lambda = 0.0;
      c.kind = kind;
      c.h.push_back(2.0 * p->r);
      c.value.push_back(std::numeric_limits<double>::quiet_NaN());
      c.count.push_back(0);
      out.push_back(std::move(c));
    }
  };
  mark(mm.x, "diameter-x");
  mark(mm.y, "diameter-y");
  return out;
}

}  // namespace maxmix
