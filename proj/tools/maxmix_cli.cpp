// Command-line front end: simulation, dependence estimation, mixing-
// coefficient selection, conditional prediction, the simulation-study
// harness, and observation ingestion. Exit codes: 0 success, 2 invalid
// input or config, 3 numeric failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maxmix/depmeasures.hpp"
#include "maxmix/estimate.hpp"
#include "maxmix/field.hpp"
#include "maxmix/io.hpp"
#include "maxmix/margins.hpp"
#include "maxmix/models.hpp"
#include "maxmix/predict.hpp"
#include "maxmix/simulate.hpp"
#include "maxmix/spatial.hpp"
#include "maxmix/study.hpp"

namespace {

using nlohmann::json;

struct Global {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out = "out";
  std::string config_path;
  json config = json::object();
};

json section(const Global& g, const char* name) {
  json merged = json::object();
  for (const char* key : {"seed", "threads", "out"})
    if (g.config.contains(key)) merged[key] = g.config[key];
  if (g.config.contains(name) && g.config[name].is_object())
    for (auto& [k, v] : g.config[name].items()) merged[k] = v;
  return merged;
}

// Flag beats config beats default.
template <class T>
void cfg(const CLI::Option* opt, T& var, const json& sec, const char* key) {
  if (opt != nullptr && opt->count() > 0) return;
  if (sec.contains(key)) {
    try {
      var = sec[key].get<T>();
    } catch (const json::exception&) {
      throw maxmix::invalid_input(std::string("config field '") + key + "' has the wrong type");
    }
  }
}

void apply_global(const CLI::Option* seed_opt, const CLI::Option* threads_opt,
                  const CLI::Option* out_opt, Global& g, const json& sec) {
  cfg(seed_opt, g.seed, sec, "seed");
  cfg(threads_opt, g.threads, sec, "threads");
  cfg(out_opt, g.out, sec, "out");
}

maxmix::CoordSystem coords_from(const std::string& s) {
  if (s == "euclidean") return maxmix::CoordSystem::euclidean;
  if (s == "lonlat") return maxmix::CoordSystem::lonlat;
  throw maxmix::invalid_input("coords must be 'euclidean' or 'lonlat'");
}

int site_index(const maxmix::SiteSet& ss, const std::string& id) {
  for (int j = 0; j < ss.size(); ++j)
    if (ss.sites[j].id == id) return j;
  throw maxmix::invalid_input("unknown site id '" + id + "'");
}

std::vector<std::string> ids_of(const maxmix::SiteSet& ss) {
  std::vector<std::string> ids;
  for (const auto& s : ss.sites) ids.push_back(s.id);
  return ids;
}

maxmix::SiteSet random_square_sites(std::uint64_t seed, int k, double side) {
  auto eng = maxmix::substream(seed, "sites");
  std::uniform_real_distribution<double> u(0.0, side);
  maxmix::SiteSet ss;
  for (int j = 0; j < k; ++j)
    ss.sites.push_back(maxmix::Site{"site_" + std::to_string(j + 1), u(eng), u(eng)});
  return ss;
}

// Lag bins from either explicit edges, a width, or a bin count over the
// observed distance range.
maxmix::LagBins make_bins(const std::vector<maxmix::PairLag>& pairs,
                          const std::vector<double>& edges, double width, int count) {
  if (!edges.empty()) return maxmix::bin_lags(pairs, edges);
  if (width > 0.0) return maxmix::bin_lags(pairs, width);
  if (count < 1) throw maxmix::invalid_input("need a positive bin count, width, or edge list");
  double hmax = 0.0;
  for (const auto& p : pairs) hmax = std::max(hmax, p.h);
  return maxmix::bin_lags(pairs, hmax / count);
}

// Model described by flags: single family, or max-mixture with x-/y-
// prefixed component flags.
struct FamilyFlags {
  std::string family;
  double s11 = 1.0, s12 = 0.0, s22 = 1.0;
  double r = 1.0, range = 1.0;
  double scale = 1.0, exponent = 1.0;
  double dof = 1.0;
};

maxmix::MaxStableSpec spec_from_flags(const FamilyFlags& f) {
  json j;
  j["family"] = f.family;
  if (f.family == "smith") {
    j["s11"] = f.s11;
    j["s12"] = f.s12;
    j["s22"] = f.s22;
  } else if (f.family == "teg") {
    j["r"] = f.r;
    j["range"] = f.range;
  } else if (f.family == "brown-resnick") {
    j["scale"] = f.scale;
    j["exponent"] = f.exponent;
  } else if (f.family == "extremal-t") {
    j["dof"] = f.dof;
    j["range"] = f.range;
  } else {
    throw maxmix::invalid_input("unknown family '" + f.family + "'");
  }
  return maxmix::max_stable_from_json(j);
}

void add_family_flags(CLI::App* cmd, FamilyFlags& f, const std::string& prefix) {
  cmd->add_option("--" + prefix + "family", f.family,
                  "smith | teg | brown-resnick | extremal-t");
  cmd->add_option("--" + prefix + "s11", f.s11, "storm covariance (1,1)");
  cmd->add_option("--" + prefix + "s12", f.s12, "storm covariance (1,2)");
  cmd->add_option("--" + prefix + "s22", f.s22, "storm covariance (2,2)");
  cmd->add_option("--" + prefix + "r", f.r, "disk radius");
  cmd->add_option("--" + prefix + "range", f.range, "correlation range");
  cmd->add_option("--" + prefix + "scale", f.scale, "variogram scale");
  cmd->add_option("--" + prefix + "exponent", f.exponent, "variogram exponent");
  cmd->add_option("--" + prefix + "dof", f.dof, "degrees of freedom");
}

// Pull the fitted bin nearest in distance at the requested a from a
// theta_hat.csv table.
void lookup_theta_row(const std::string& path, double a, double h, double& tx, double& ty) {
  auto f = maxmix::detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw maxmix::invalid_input("theta table is empty: " + path);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (maxmix::detail::trim(line).empty()) continue;
    const auto cells = maxmix::detail::split_csv_line(line);
    if (cells.size() < 4)
      throw maxmix::invalid_input("theta table row " + std::to_string(row) + " is malformed");
    const std::string ctx = "theta table row " + std::to_string(row);
    const double arow = maxmix::detail::parse_cell(cells[0], ctx);
    const double hrow = maxmix::detail::parse_cell(cells[1], ctx);
    if (std::fabs(arow - a) > 1e-9) continue;
    if (std::fabs(hrow - h) < best) {
      best = std::fabs(hrow - h);
      tx = maxmix::detail::parse_cell(cells[2], ctx);
      ty = maxmix::detail::parse_cell(cells[3], ctx);
      found = true;
    }
  }
  if (!found)
    throw maxmix::invalid_input("predict: no theta row at a=" + std::to_string(a) + " in " + path);
}

void write_manifest(const Global& g, const std::string& command, const json& eff,
                    const std::vector<std::string>& outputs, const json& results = {}) {
  std::filesystem::create_directories(g.out);
  maxmix::write_json_file(g.out + "/manifest.json",
                          maxmix::make_manifest(command, eff, g.seed, outputs, results));
}

// Field for estimation: sidecar margins honored, --ranks forces the
// rank-based uniform view.
maxmix::FieldFile load_field(const std::string& path, bool force_ranks) {
  maxmix::FieldFile ff = maxmix::read_field_csv(path);
  if (force_ranks) ff.field.margins = maxmix::Margins::raw;
  return ff;
}

maxmix::SiteSet sites_matching_field(const std::string& sites_path, maxmix::CoordSystem cs,
                                     const maxmix::FieldFile& ff) {
  maxmix::SiteSet ss = maxmix::read_sites(sites_path, cs);
  if (ss.size() != ff.field.k)
    throw maxmix::invalid_input("sites file and field disagree on the number of sites");
  for (int j = 0; j < ss.size(); ++j)
    if (ss.sites[j].id != ff.site_ids[j])
      throw maxmix::invalid_input("site order mismatch: field column '" + ff.site_ids[j] +
                                  "' vs site '" + ss.sites[j].id + "'");
  return ss;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"max-mixture spatial extremes toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  auto* seed_opt = app.add_option("--seed", g.seed, "master RNG seed");
  auto* threads_opt = app.add_option("--threads", g.threads, "worker thread count");
  auto* out_opt = app.add_option("--out", g.out, "output directory");
  app.add_option("--config", g.config_path, "JSON config file; flags override its values");

  // simulate ----------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "sample a max-stable or max-mixture field");
  std::string sim_model_path, sim_sites_path, sim_coords = "euclidean";
  int sim_k = 0, sim_n = 100;
  double sim_domain = 1.0, sim_a = -1.0;
  FamilyFlags sim_fam, sim_x, sim_y;
  auto* sim_model_opt = sim->add_option("--model", sim_model_path, "model spec JSON file");
  auto* sim_sites_opt = sim->add_option("--sites", sim_sites_path, "sites CSV (id,c1,c2[,alt])");
  sim->add_option("--coords", sim_coords, "euclidean | lonlat");
  auto* sim_k_opt = sim->add_option("--k", sim_k, "number of uniform random sites");
  auto* sim_n_opt = sim->add_option("--n", sim_n, "replicates");
  auto* sim_domain_opt = sim->add_option("--domain", sim_domain, "square side for random sites");
  auto* sim_a_opt = sim->add_option("--a", sim_a, "mixing coefficient (makes a max-mixture)");
  add_family_flags(sim, sim_fam, "");
  add_family_flags(sim, sim_x, "x-");
  add_family_flags(sim, sim_y, "y-");

  // madogram ------------------------------------------------------------
  auto* mad = app.add_subcommand("madogram", "empirical and plug-in dependence curves");
  std::string mad_field_path, mad_sites_path, mad_coords = "euclidean", mad_model_path;
  std::vector<double> mad_lambdas{1.0}, mad_edges;
  double mad_width = 0.0, mad_chi_u = 0.0, mad_hmax = 0.0;
  int mad_bins = 15, mad_hsteps = 200;
  bool mad_ranks = false;
  auto* mad_field_opt = mad->add_option("--field", mad_field_path, "field CSV");
  auto* mad_sites_opt = mad->add_option("--sites", mad_sites_path, "sites CSV");
  mad->add_option("--coords", mad_coords, "euclidean | lonlat");
  auto* mad_lam_opt = mad->add_option("--lambda", mad_lambdas, "madogram exponents");
  auto* mad_bins_opt = mad->add_option("--bins", mad_bins, "lag bin count");
  auto* mad_width_opt = mad->add_option("--bin-width", mad_width, "lag bin width");
  auto* mad_edges_opt = mad->add_option("--edges", mad_edges, "explicit bin edges");
  auto* mad_chi_opt = mad->add_option("--chi-u", mad_chi_u, "also emit chi/chibar at this level");
  mad->add_flag("--ranks", mad_ranks, "force rank margins");
  auto* mad_model_opt =
      mad->add_option("--theoretical-model", mad_model_path, "model spec JSON for plug-in curves");
  auto* mad_hmax_opt = mad->add_option("--h-max", mad_hmax, "plug-in curve distance cap");
  auto* mad_hsteps_opt = mad->add_option("--h-steps", mad_hsteps, "plug-in curve grid size");

  // select-a ------------------------------------------------------------
  auto* sel = app.add_subcommand("select-a", "estimate theta curves and pick the mixing a");
  std::string sel_field_path, sel_sites_path, sel_coords = "euclidean", sel_weights = "equal";
  std::vector<double> sel_a_grid, sel_lambdas, sel_edges;
  double sel_a_step = 0.0, sel_lambda_sel = 1.5, sel_wquant = 0.5, sel_width = 0.0;
  int sel_bins = 15, sel_grid_n = 41;
  bool sel_ranks = false;
  auto* sel_field_opt = sel->add_option("--field", sel_field_path, "field CSV");
  auto* sel_sites_opt = sel->add_option("--sites", sel_sites_path, "sites CSV");
  sel->add_option("--coords", sel_coords, "euclidean | lonlat");
  auto* sel_agrid_opt = sel->add_option("--a-grid", sel_a_grid, "candidate mixing values");
  auto* sel_astep_opt = sel->add_option("--a-step", sel_a_step, "dense grid 0..1 with this step");
  auto* sel_lam_opt = sel->add_option("--lambdas", sel_lambdas, "fit exponents (default 1 3)");
  auto* sel_lsel_opt = sel->add_option("--lambda-sel", sel_lambda_sel, "held-out exponent");
  auto* sel_bins_opt = sel->add_option("--bins", sel_bins, "lag bin count");
  auto* sel_width_opt = sel->add_option("--bin-width", sel_width, "lag bin width");
  auto* sel_edges_opt = sel->add_option("--edges", sel_edges, "explicit bin edges");
  auto* sel_gridn_opt = sel->add_option("--grid-n", sel_grid_n, "coarse theta grid per axis");
  auto* sel_w_opt = sel->add_option("--weights", sel_weights, "equal | distance");
  auto* sel_wq_opt = sel->add_option("--weight-quantile", sel_wquant, "distance cutoff quantile");
  sel->add_flag("--ranks", sel_ranks, "force rank margins");

  // predict -------------------------------------------------------------
  auto* prd = app.add_subcommand("predict", "conditional exceedance curve for a site pair");
  std::string prd_field_path, prd_sites_path, prd_coords = "euclidean", prd_theta_csv;
  std::string prd_cond, prd_target;
  double prd_a = 0.5, prd_tx = 0.0, prd_ty = 0.0, prd_qlo = 0.90, prd_qhi = 0.995;
  int prd_qn = 20;
  bool prd_ranks = false;
  auto* prd_field_opt = prd->add_option("--field", prd_field_path, "field CSV");
  auto* prd_sites_opt = prd->add_option("--sites", prd_sites_path, "sites CSV");
  prd->add_option("--coords", prd_coords, "euclidean | lonlat");
  auto* prd_cond_opt = prd->add_option("--cond", prd_cond, "conditioning site id");
  auto* prd_target_opt = prd->add_option("--target", prd_target, "target site id");
  auto* prd_a_opt = prd->add_option("--a", prd_a, "mixing coefficient");
  auto* prd_tx_opt = prd->add_option("--theta-x", prd_tx, "max-stable extremal coefficient");
  auto* prd_ty_opt = prd->add_option("--theta-y", prd_ty, "inverted-component coefficient");
  auto* prd_tcsv_opt =
      prd->add_option("--theta-csv", prd_theta_csv, "take thetas from a fitted table");
  auto* prd_qlo_opt = prd->add_option("--q-lo", prd_qlo, "lowest quantile level");
  auto* prd_qhi_opt = prd->add_option("--q-hi", prd_qhi, "highest quantile level");
  auto* prd_qn_opt = prd->add_option("--q-n", prd_qn, "number of quantile levels");
  prd->add_flag("--ranks", prd_ranks, "rank-transform raw margins to unit Frechet");

  // study -----------------------------------------------------------------
  auto* stu = app.add_subcommand("study", "simulation study: estimate, select, aggregate");
  std::string stu_design = "m1", stu_model_path, stu_weights = "equal";
  double stu_a0 = 0.5, stu_domain = 0.0, stu_wquant = 0.5, stu_lambda_sel = 1.5;
  int stu_k = 50, stu_n = 2000, stu_m = 20, stu_bins = 15, stu_grid_n = 41;
  std::vector<double> stu_a_grid, stu_lambdas;
  bool stu_exact = false;
  auto* stu_design_opt = stu->add_option("--design", stu_design, "m1 | m2");
  auto* stu_a0_opt = stu->add_option("--a0", stu_a0, "true mixing coefficient");
  auto* stu_model_opt =
      stu->add_option("--model", stu_model_path, "max-mixture spec JSON (overrides --design)");
  auto* stu_domain_opt = stu->add_option("--domain", stu_domain, "square side");
  auto* stu_k_opt = stu->add_option("--k", stu_k, "sites per experiment");
  auto* stu_n_opt = stu->add_option("--n", stu_n, "replicates per experiment");
  auto* stu_m_opt = stu->add_option("--experiments", stu_m, "experiment count");
  auto* stu_agrid_opt = stu->add_option("--a-grid", stu_a_grid, "candidate mixing values");
  auto* stu_bins_opt = stu->add_option("--bins", stu_bins, "shared lag bin count");
  auto* stu_lam_opt = stu->add_option("--lambdas", stu_lambdas, "fit exponents");
  auto* stu_lsel_opt = stu->add_option("--lambda-sel", stu_lambda_sel, "held-out exponent");
  auto* stu_gridn_opt = stu->add_option("--grid-n", stu_grid_n, "coarse theta grid per axis");
  auto* stu_w_opt = stu->add_option("--weights", stu_weights, "equal | distance");
  auto* stu_wq_opt = stu->add_option("--weight-quantile", stu_wquant, "distance cutoff quantile");
  stu->add_flag("--exact-margins", stu_exact, "use the exact probability transform");

  // ingest ------------------------------------------------------------------
  auto* ing = app.add_subcommand("ingest", "dated wide observations -> field + margins");
  std::string ing_sites_path, ing_data_path, ing_coords = "euclidean", ing_months,
              ing_transform = "none";
  auto* ing_sites_opt = ing->add_option("--sites", ing_sites_path, "sites CSV");
  auto* ing_data_opt = ing->add_option("--data", ing_data_path, "observations CSV (date,<ids>)");
  ing->add_option("--coords", ing_coords, "euclidean | lonlat");
  auto* ing_months_opt =
      ing->add_option("--months", ing_months, "keep calendar months lo:hi (e.g. 4:9)");
  auto* ing_tr_opt = ing->add_option("--transform", ing_transform, "none | gev | ranks");

  try {
    app.parse(argc, argv);
    if (!g.config_path.empty()) g.config = maxmix::read_json_file(g.config_path);

    // ---- simulate ----
    if (sim->parsed()) {
      const json sec = section(g, "simulate");
      apply_global(seed_opt, threads_opt, out_opt, g, sec);
      cfg(sim_n_opt, sim_n, sec, "n");
      cfg(sim_k_opt, sim_k, sec, "k");
      cfg(sim_domain_opt, sim_domain, sec, "domain");
      cfg(sim_sites_opt, sim_sites_path, sec, "sites");
      cfg(static_cast<CLI::Option*>(nullptr), sim_coords, sec, "coords");
      cfg(sim_model_opt, sim_model_path, sec, "model");

      json model_json;
      if (!sim_model_path.empty())
        model_json = maxmix::read_json_file(sim_model_path);
      else if (sec.contains("model_spec"))
        model_json = sec["model_spec"];

      maxmix::SiteSet ss;
      if (!sim_sites_path.empty())
        ss = maxmix::read_sites(sim_sites_path, coords_from(sim_coords));
      else if (sim_k > 0 || sim_k_opt->count() > 0)
        ss = random_square_sites(g.seed, sim_k, sim_domain);
      else
        throw maxmix::invalid_input("simulate: give --sites or --k/--domain");

      maxmix::FieldSample field;
      json spec_json;
      const bool mixture = (sim_a_opt->count() > 0 || sim_a >= 0.0 ||
                            maxmix::is_max_mixture_json(model_json)) &&
                           sim_fam.family.empty();
      if (!model_json.is_null() && maxmix::is_max_mixture_json(model_json)) {
        const auto mm = maxmix::max_mixture_from_json(model_json);
        field = maxmix::simulate_max_mixture(mm, ss, sim_n, g.seed);
        spec_json = maxmix::spec_to_json(mm);
      } else if (!model_json.is_null()) {
        const auto spec = maxmix::max_stable_from_json(model_json);
        field = maxmix::simulate_max_stable(spec, ss, sim_n, g.seed);
        spec_json = maxmix::spec_to_json(spec);
      } else if (mixture) {
        maxmix::MaxMixtureSpec mm;
        mm.a = sim_a;
        mm.x = spec_from_flags(sim_x);
        mm.y = spec_from_flags(sim_y);
        field = maxmix::simulate_max_mixture(mm, ss, sim_n, g.seed);
        spec_json = maxmix::spec_to_json(mm);
      } else if (!sim_fam.family.empty()) {
        const auto spec = spec_from_flags(sim_fam);
        field = maxmix::simulate_max_stable(spec, ss, sim_n, g.seed);
        spec_json = maxmix::spec_to_json(spec);
      } else {
        throw maxmix::invalid_input("simulate: no model given (flags, --model, or config)");
      }

      std::filesystem::create_directories(g.out);
      const std::string field_path = g.out + "/field.csv";
      maxmix::write_field_csv(field_path, field, ids_of(ss));
      json extra;
      extra["model"] = spec_json;
      maxmix::write_field_sidecar(field_path, field, extra);
      maxmix::write_sites(g.out + "/sites.csv", ss);
      maxmix::write_json_file(g.out + "/model.json", spec_json);
      json eff{{"n", sim_n},
               {"sites", sim_sites_path.empty() ? json{{"k", ss.size()}, {"domain", sim_domain}}
                                                : json(sim_sites_path)},
               {"coords", sim_coords},
               {"model", spec_json}};
      write_manifest(g, "simulate", eff,
                     {"field.csv", "field.csv.meta.json", "sites.csv", "model.json"});
      std::cout << "wrote " << field_path << " (" << field.n << " x " << field.k << ")\n";
    }

    // ---- madogram ----
    if (mad->parsed()) {
      const json sec = section(g, "madogram");
      apply_global(seed_opt, threads_opt, out_opt, g, sec);
      cfg(mad_field_opt, mad_field_path, sec, "field");
      cfg(mad_sites_opt, mad_sites_path, sec, "sites");
      cfg(static_cast<CLI::Option*>(nullptr), mad_coords, sec, "coords");
      cfg(mad_lam_opt, mad_lambdas, sec, "lambda");
      cfg(mad_bins_opt, mad_bins, sec, "bins");
      cfg(mad_width_opt, mad_width, sec, "bin_width");
      cfg(mad_edges_opt, mad_edges, sec, "edges");
      cfg(mad_chi_opt, mad_chi_u, sec, "chi_u");
      cfg(mad_model_opt, mad_model_path, sec, "theoretical_model");
      cfg(mad_hmax_opt, mad_hmax, sec, "h_max");
      cfg(mad_hsteps_opt, mad_hsteps, sec, "h_steps");

      std::filesystem::create_directories(g.out);
      std::vector<std::string> outputs;
      if (!mad_field_path.empty()) {
        if (mad_sites_path.empty()) throw maxmix::invalid_input("madogram: --sites required");
        const auto ff = load_field(mad_field_path, mad_ranks);
        const auto ss = sites_matching_field(mad_sites_path, coords_from(mad_coords), ff);
        const auto pairs = maxmix::pairwise_lags(ss);
        const auto bins = make_bins(pairs, mad_edges, mad_width, mad_bins);
        std::vector<maxmix::MadogramCurve> curves;
        const maxmix::FieldSample u = maxmix::uniform_view(ff.field);
        for (double lam : mad_lambdas)
          curves.push_back(maxmix::flambda_madogram_empirical(u, pairs, bins, lam));
        maxmix::write_madogram_csv(g.out + "/madogram.csv", curves);
        outputs.push_back("madogram.csv");
        if (mad_chi_opt->count() > 0 || sec.contains("chi_u")) {
          maxmix::write_chi_csv(g.out + "/chi.csv",
                                maxmix::chi_chibar_empirical(u, pairs, bins, mad_chi_u));
          outputs.push_back("chi.csv");
        }
      }
      if (!mad_model_path.empty()) {
        const json mj = maxmix::read_json_file(mad_model_path);
        if (!maxmix::is_max_mixture_json(mj))
          throw maxmix::invalid_input("madogram: plug-in curves need a max-mixture spec");
        const auto mm = maxmix::max_mixture_from_json(mj);
        double hmax = mad_hmax;
        if (!(hmax > 0.0)) {
          if (mad_sites_path.empty())
            throw maxmix::invalid_input("madogram: give --h-max or --sites for plug-in curves");
          const auto ss = maxmix::read_sites(mad_sites_path, coords_from(mad_coords));
          for (const auto& p : maxmix::pairwise_lags(ss)) hmax = std::max(hmax, p.h);
        }
        std::vector<double> hgrid;
        for (int i = 0; i <= mad_hsteps; ++i) hgrid.push_back(hmax * i / mad_hsteps);
        std::vector<double> lams = mad_lambdas;
        if (mad_lam_opt->count() == 0 && !sec.contains("lambda"))
          lams = {0.5, 1.0, 1.5, 3.0};
        maxmix::write_madogram_csv(g.out + "/madogram_theoretical.csv",
                                   maxmix::theoretical_curves(mm, lams, hgrid));
        outputs.push_back("madogram_theoretical.csv");
      }
      if (outputs.empty())
        throw maxmix::invalid_input("madogram: nothing to do (need --field or a plug-in model)");
      json eff{{"field", mad_field_path}, {"sites", mad_sites_path},   {"coords", mad_coords},
               {"lambda", mad_lambdas},   {"bins", mad_bins},          {"bin_width", mad_width},
               {"edges", mad_edges},      {"ranks", mad_ranks},        {"chi_u", mad_chi_u},
               {"model", mad_model_path}, {"h_max", mad_hmax},         {"h_steps", mad_hsteps}};
      write_manifest(g, "madogram", eff, outputs);
      std::cout << "wrote " << outputs.size() << " table(s) under " << g.out << "\n";
    }

    // ---- select-a ----
    if (sel->parsed()) {
      const json sec = section(g, "select-a");
      apply_global(seed_opt, threads_opt, out_opt, g, sec);
      cfg(sel_field_opt, sel_field_path, sec, "field");
      cfg(sel_sites_opt, sel_sites_path, sec, "sites");
      cfg(static_cast<CLI::Option*>(nullptr), sel_coords, sec, "coords");
      cfg(sel_agrid_opt, sel_a_grid, sec, "a_grid");
      cfg(sel_astep_opt, sel_a_step, sec, "a_step");
      cfg(sel_lam_opt, sel_lambdas, sec, "lambdas");
      cfg(sel_lsel_opt, sel_lambda_sel, sec, "lambda_sel");
      cfg(sel_bins_opt, sel_bins, sec, "bins");
      cfg(sel_width_opt, sel_width, sec, "bin_width");
      cfg(sel_edges_opt, sel_edges, sec, "edges");
      cfg(sel_gridn_opt, sel_grid_n, sec, "grid_n");
      cfg(sel_w_opt, sel_weights, sec, "weights");
      cfg(sel_wq_opt, sel_wquant, sec, "weight_quantile");
      if (sel_field_path.empty() || sel_sites_path.empty())
        throw maxmix::invalid_input("select-a: --field and --sites are required");

      const auto ff = load_field(sel_field_path, sel_ranks);
      const auto ss = sites_matching_field(sel_sites_path, coords_from(sel_coords), ff);
      const auto pairs = maxmix::pairwise_lags(ss);
      const auto bins = make_bins(pairs, sel_edges, sel_width, sel_bins);

      std::vector<double> a_grid = sel_a_grid;
      if (a_grid.empty() && sel_a_step > 0.0)
        for (double a = 0.0; a <= 1.0 + 1e-12; a += sel_a_step)
          a_grid.push_back(std::min(a, 1.0));
      if (a_grid.empty()) a_grid = {0.0, 0.25, 0.5, 0.75, 1.0};

      maxmix::NlsConfig ncfg;
      if (!sel_lambdas.empty()) ncfg.lambdas = sel_lambdas;
      ncfg.lambda_sel = sel_lambda_sel;
      ncfg.grid_n = sel_grid_n;
      const auto wmode = sel_weights == "distance" ? maxmix::DCWeights::distance_quantile
                                                   : maxmix::DCWeights::equal;
      if (sel_weights != "equal" && sel_weights != "distance")
        throw maxmix::invalid_input("select-a: weights must be 'equal' or 'distance'");

      const auto dc = maxmix::select_a(ff.field, pairs, bins, a_grid, ncfg, wmode, sel_wquant);
      std::filesystem::create_directories(g.out);
      maxmix::write_dc_csv(g.out + "/dc_curve.csv", dc);
      maxmix::write_theta_csv(g.out + "/theta_hat.csv", dc.estimates);
      json eff{{"field", sel_field_path},
               {"sites", sel_sites_path},
               {"coords", sel_coords},
               {"a_grid", a_grid},
               {"lambdas", ncfg.lambdas},
               {"lambda_sel", ncfg.lambda_sel},
               {"bins", sel_bins},
               {"bin_width", sel_width},
               {"edges", sel_edges},
               {"grid_n", ncfg.grid_n},
               {"weights", sel_weights},
               {"weight_quantile", sel_wquant},
               {"ranks", sel_ranks}};
      write_manifest(g, "select-a", eff, {"dc_curve.csv", "theta_hat.csv"},
                     json{{"a_hat", dc.a_hat}, {"dc_min", dc.dc[dc.argmin_index]}});
      std::cout << "a_hat = " << dc.a_hat << "\n";
    }

    // ---- predict ----
    if (prd->parsed()) {
      const json sec = section(g, "predict");
      apply_global(seed_opt, threads_opt, out_opt, g, sec);
      cfg(prd_field_opt, prd_field_path, sec, "field");
      cfg(prd_sites_opt, prd_sites_path, sec, "sites");
      cfg(static_cast<CLI::Option*>(nullptr), prd_coords, sec, "coords");
      cfg(prd_cond_opt, prd_cond, sec, "cond");
      cfg(prd_target_opt, prd_target, sec, "target");
      cfg(prd_a_opt, prd_a, sec, "a");
      cfg(prd_tx_opt, prd_tx, sec, "theta_x");
      cfg(prd_ty_opt, prd_ty, sec, "theta_y");
      cfg(prd_tcsv_opt, prd_theta_csv, sec, "theta_csv");
      cfg(prd_qlo_opt, prd_qlo, sec, "q_lo");
      cfg(prd_qhi_opt, prd_qhi, sec, "q_hi");
      cfg(prd_qn_opt, prd_qn, sec, "q_n");
      if (prd_field_path.empty() || prd_sites_path.empty() || prd_cond.empty() ||
          prd_target.empty())
        throw maxmix::invalid_input("predict: --field, --sites, --cond, --target are required");

      maxmix::FieldFile ff = load_field(prd_field_path, false);
      const auto ss = sites_matching_field(prd_sites_path, coords_from(prd_coords), ff);
      if (ff.field.margins != maxmix::Margins::unit_frechet) {
        if (!prd_ranks)
          throw maxmix::invalid_input(
              "predict: field is not on the unit-frechet scale (use --ranks to transform)");
        ff.field = maxmix::to_unit_frechet_empirical(ff.field);
      }
      const int ci = site_index(ss, prd_cond), ti = site_index(ss, prd_target);
      if (ci == ti) throw maxmix::invalid_input("predict: cond and target must differ");

      double tx = prd_tx, ty = prd_ty;
      if (!prd_theta_csv.empty()) {
        const double h = maxmix::site_distance(ss, std::min(ci, ti), std::max(ci, ti));
        lookup_theta_row(prd_theta_csv, prd_a, h, tx, ty);
      }
      if (!(tx >= 1.0 && tx <= 2.0 && ty >= 1.0 && ty <= 2.0))
        throw maxmix::invalid_input("predict: thetas must lie in [1,2] (give --theta-x/--theta-y)");

      if (prd_qn < 1 || !(prd_qlo > 0.0 && prd_qhi < 1.0 && prd_qlo <= prd_qhi))
        throw maxmix::invalid_input("predict: invalid quantile grid");
      std::vector<double> qgrid;
      for (int i = 0; i < prd_qn; ++i)
        qgrid.push_back(prd_qn == 1 ? prd_qlo
                                    : prd_qlo + (prd_qhi - prd_qlo) * i / (prd_qn - 1));
      const auto curve = maxmix::pp_curve(ff.field, ci, ti, prd_a, tx, ty, qgrid);
      std::filesystem::create_directories(g.out);
      maxmix::write_pp_csv(g.out + "/predict.csv", curve);
      json eff{{"field", prd_field_path}, {"sites", prd_sites_path}, {"coords", prd_coords},
               {"cond", prd_cond},        {"target", prd_target},    {"a", prd_a},
               {"theta_x", tx},           {"theta_y", ty},           {"q_lo", prd_qlo},
               {"q_hi", prd_qhi},         {"q_n", prd_qn}};
      write_manifest(g, "predict", eff, {"predict.csv"});
      std::cout << "wrote " << g.out << "/predict.csv\n";
    }

    // ---- study ----
    if (stu->parsed()) {
      const json sec = section(g, "study");
      apply_global(seed_opt, threads_opt, out_opt, g, sec);
      cfg(stu_design_opt, stu_design, sec, "design");
      cfg(stu_a0_opt, stu_a0, sec, "a0");
      cfg(stu_model_opt, stu_model_path, sec, "model");
      cfg(stu_domain_opt, stu_domain, sec, "domain");
      cfg(stu_k_opt, stu_k, sec, "k");
      cfg(stu_n_opt, stu_n, sec, "n");
      cfg(stu_m_opt, stu_m, sec, "experiments");
      cfg(stu_agrid_opt, stu_a_grid, sec, "a_grid");
      cfg(stu_bins_opt, stu_bins, sec, "bins");
      cfg(stu_lam_opt, stu_lambdas, sec, "lambdas");
      cfg(stu_lsel_opt, stu_lambda_sel, sec, "lambda_sel");
      cfg(stu_gridn_opt, stu_grid_n, sec, "grid_n");
      cfg(stu_w_opt, stu_weights, sec, "weights");
      cfg(stu_wq_opt, stu_wquant, sec, "weight_quantile");

      maxmix::StudyConfig cfg_s;
      if (!stu_model_path.empty()) {
        cfg_s.model = maxmix::max_mixture_from_json(maxmix::read_json_file(stu_model_path));
        if (!(stu_domain > 0.0))
          throw maxmix::invalid_input("study: --domain required with an explicit model");
      } else if (stu_design == "m1") {
        cfg_s = maxmix::study_design_m1(stu_a0);
      } else if (stu_design == "m2") {
        cfg_s = maxmix::study_design_m2(stu_a0);
      } else {
        throw maxmix::invalid_input("study: design must be 'm1' or 'm2'");
      }
      if (stu_domain > 0.0) cfg_s.domain = stu_domain;
      cfg_s.k = stu_k;
      cfg_s.n = stu_n;
      cfg_s.experiments = stu_m;
      if (!stu_a_grid.empty()) cfg_s.a_grid = stu_a_grid;
      cfg_s.bins = stu_bins;
      if (!stu_lambdas.empty()) cfg_s.nls.lambdas = stu_lambdas;
      cfg_s.nls.lambda_sel = stu_lambda_sel;
      cfg_s.nls.grid_n = stu_grid_n;
      cfg_s.weights = stu_weights == "distance" ? maxmix::DCWeights::distance_quantile
                                                 : maxmix::DCWeights::equal;
      if (stu_weights != "equal" && stu_weights != "distance")
        throw maxmix::invalid_input("study: weights must be 'equal' or 'distance'");
      cfg_s.weight_quantile = stu_wquant;
      cfg_s.threads = g.threads;
      cfg_s.seed = g.seed;
      cfg_s.exact_margins = stu_exact;

      const auto rep = maxmix::run_simulation_study(cfg_s, g.out, [](int done, int total) {
        std::cerr << "experiment " << done << "/" << total << " done\n";
      });
      json eff{{"design", stu_model_path.empty() ? stu_design : "custom"},
               {"model", maxmix::spec_to_json(cfg_s.model)},
               {"domain", cfg_s.domain},
               {"k", cfg_s.k},
               {"n", cfg_s.n},
               {"experiments", cfg_s.experiments},
               {"a_grid", cfg_s.a_grid},
               {"bins", cfg_s.bins},
               {"lambdas", cfg_s.nls.lambdas},
               {"lambda_sel", cfg_s.nls.lambda_sel},
               {"grid_n", cfg_s.nls.grid_n},
               {"weights", stu_weights},
               {"weight_quantile", cfg_s.weight_quantile},
               {"exact_margins", cfg_s.exact_margins}};
      std::vector<std::string> outputs{"study_mse.csv", "study_dc_box.csv", "study_ahat.csv"};
      for (int e = 1; e <= cfg_s.experiments; ++e) {
        outputs.push_back("exp_" + std::to_string(e) + "_dc.csv");
        outputs.push_back("exp_" + std::to_string(e) + "_theta.csv");
      }
      write_manifest(g, "study", eff, outputs);
      std::cout << "selection frequency by a:";
      for (size_t i = 0; i < cfg_s.a_grid.size(); ++i)
        std::cout << ' ' << cfg_s.a_grid[i] << ':'
                  << static_cast<double>(rep.selection_count[i]) / cfg_s.experiments;
      std::cout << "\n";
    }

    // ---- ingest ----
    if (ing->parsed()) {
      const json sec = section(g, "ingest");
      apply_global(seed_opt, threads_opt, out_opt, g, sec);
      cfg(ing_sites_opt, ing_sites_path, sec, "sites");
      cfg(ing_data_opt, ing_data_path, sec, "data");
      cfg(static_cast<CLI::Option*>(nullptr), ing_coords, sec, "coords");
      cfg(ing_months_opt, ing_months, sec, "months");
      cfg(ing_tr_opt, ing_transform, sec, "transform");
      if (ing_sites_path.empty() || ing_data_path.empty())
        throw maxmix::invalid_input("ingest: --sites and --data are required");

      int mlo = 0, mhi = 0;
      if (!ing_months.empty()) {
        const auto pos = ing_months.find(':');
        if (pos == std::string::npos)
          throw maxmix::invalid_input("ingest: --months must look like 4:9");
        mlo = std::stoi(ing_months.substr(0, pos));
        mhi = std::stoi(ing_months.substr(pos + 1));
      }
      const auto res = maxmix::ingest_observations(ing_sites_path, ing_data_path,
                                                   coords_from(ing_coords), mlo, mhi);
      std::filesystem::create_directories(g.out);
      const std::string field_path = g.out + "/field.csv";
      maxmix::write_field_csv(field_path, res.table.field, res.table.site_ids);
      json extra;
      extra["rows"] = res.table.field.n;
      extra["months"] = ing_months;
      maxmix::write_field_sidecar(field_path, res.table.field, extra);
      {
        auto f = maxmix::detail::open_out(g.out + "/dates.csv");
        f << "replicate,date\n";
        for (size_t i = 0; i < res.table.dates.size(); ++i)
          f << (i + 1) << ',' << res.table.dates[i] << '\n';
      }
      std::vector<std::string> outputs{"field.csv", "field.csv.meta.json", "dates.csv"};

      if (ing_transform == "gev") {
        std::vector<maxmix::GevParams> fits;
        for (int j = 0; j < res.table.field.k; ++j) {
          std::vector<double> col;
          for (int i = 0; i < res.table.field.n; ++i) col.push_back(res.table.field.at(i, j));
          fits.push_back(maxmix::fit_gev_site(col));
        }
        maxmix::MarginTransformReport mrep;
        const auto fre = maxmix::to_unit_frechet(res.table.field, fits, &mrep);
        maxmix::write_field_csv(g.out + "/frechet.csv", fre, res.table.site_ids);
        json fextra;
        fextra["clipped"] = mrep.clipped;
        maxmix::write_field_sidecar(g.out + "/frechet.csv", fre, fextra);
        auto f = maxmix::detail::open_out(g.out + "/gev_fits.csv");
        f << "id,loc,scale,shape\n";
        for (int j = 0; j < res.table.field.k; ++j)
          f << res.table.site_ids[j] << ',' << maxmix::detail::format_double(fits[j].loc) << ','
            << maxmix::detail::format_double(fits[j].scale) << ','
            << maxmix::detail::format_double(fits[j].shape) << '\n';
        if (mrep.clipped > 0)
          std::cerr << "warning: " << mrep.clipped
                    << " probabilities clipped at the GEV support boundary\n";
        outputs.insert(outputs.end(), {"frechet.csv", "frechet.csv.meta.json", "gev_fits.csv"});
      } else if (ing_transform == "ranks") {
        const auto fre = maxmix::to_unit_frechet_empirical(res.table.field);
        maxmix::write_field_csv(g.out + "/frechet.csv", fre, res.table.site_ids);
        maxmix::write_field_sidecar(g.out + "/frechet.csv", fre);
        outputs.insert(outputs.end(), {"frechet.csv", "frechet.csv.meta.json"});
      } else if (ing_transform != "none") {
        throw maxmix::invalid_input("ingest: transform must be none, gev, or ranks");
      }
      json eff{{"sites", ing_sites_path},
               {"data", ing_data_path},
               {"coords", ing_coords},
               {"months", ing_months},
               {"transform", ing_transform}};
      write_manifest(g, "ingest", eff, outputs);
      std::cout << "ingested " << res.table.field.n << " rows x " << res.table.field.k
                << " sites\n";
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const maxmix::invalid_input& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const maxmix::numeric_failure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
