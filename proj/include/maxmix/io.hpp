#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "maxmix/depmeasures.hpp"
#include "maxmix/errors.hpp"
#include "maxmix/estimate.hpp"
#include "maxmix/field.hpp"
#include "maxmix/models.hpp"
#include "maxmix/predict.hpp"
#include "maxmix/spatial.hpp"

namespace maxmix {

inline constexpr const char* kToolVersion = "0.1.0";

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n'))
    --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

// Empty, NA, and NaN cells mark missing observations; anything else must be
// a complete numeric literal.
inline double parse_cell(const std::string& s, const std::string& context) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan")
    return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw invalid_input("non-numeric value '" + s + "' in " + context);
  return v;
}

// Shortest decimal form that round-trips; missing values become empty cells.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  std::array<char, 40> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw invalid_input("cannot open for writing: " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid_input("cannot open for reading: " + path);
  return f;
}

}  // namespace detail

// ---- sites -----------------------------------------------------------------

// Header `id,c1,c2[,alt]`; the coordinate system (plane coordinates or
// lon/lat degrees) is supplied by the caller, not stored in the file.
inline SiteSet read_sites(const std::string& path, CoordSystem cs) {
  auto f = detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw invalid_input("sites file is empty: " + path);
  auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "id")
    throw invalid_input("sites file must start with header id,c1,c2[,alt]: " + path);
  const bool has_alt = header.size() >= 4;
  SiteSet ss;
  ss.coords = cs;
  std::unordered_map<std::string, int> seen;
  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() < 3)
      throw invalid_input("sites row " + std::to_string(row) + " has fewer than 3 columns");
    Site s;
    s.id = cells[0];
    if (s.id.empty()) throw invalid_input("empty site id at row " + std::to_string(row));
    if (!seen.emplace(s.id, row).second)
      throw invalid_input("duplicate site id '" + s.id + "' at row " + std::to_string(row));
    const std::string ctx = "sites row " + std::to_string(row);
    s.c1 = detail::parse_cell(cells[1], ctx);
    s.c2 = detail::parse_cell(cells[2], ctx);
    if (!std::isfinite(s.c1) || !std::isfinite(s.c2))
      throw invalid_input("missing coordinate in " + ctx);
    if (has_alt && cells.size() >= 4) s.alt = detail::parse_cell(cells[3], ctx);
    ss.sites.push_back(std::move(s));
  }
  if (ss.sites.empty()) throw invalid_input("sites file has no data rows: " + path);
  return ss;
}

inline void write_sites(const std::string& path, const SiteSet& ss) {
  auto f = detail::open_out(path);
  f << "id,c1,c2,alt\n";
  for (const auto& s : ss.sites)
    f << s.id << ',' << detail::format_double(s.c1) << ',' << detail::format_double(s.c2) << ','
      << detail::format_double(s.alt) << '\n';
}

// ---- margins tag -----------------------------------------------------------

inline std::string margins_name(Margins m) {
  switch (m) {
    case Margins::unit_frechet:
      return "unit_frechet";
    case Margins::uniform:
      return "uniform";
    case Margins::raw:
      return "raw";
  }
  return "raw";
}

inline Margins margins_from_name(const std::string& s) {
  if (s == "unit_frechet") return Margins::unit_frechet;
  if (s == "uniform") return Margins::uniform;
  if (s == "raw") return Margins::raw;
  throw invalid_input("unknown margins tag '" + s + "'");
}

// ---- model spec JSON -------------------------------------------------------

inline nlohmann::json spec_to_json(const MaxStableSpec& s) {
  nlohmann::json j;
  j["family"] = family_name(s);
  if (const auto* p = std::get_if<SmithParams>(&s.family)) {
    j["s11"] = p->s11;
    j["s12"] = p->s12;
    j["s22"] = p->s22;
  } else if (const auto* p = std::get_if<TegParams>(&s.family)) {
    j["r"] = p->r;
    j["range"] = p->corr.range;
  } else if (const auto* p = std::get_if<BrownResnickParams>(&s.family)) {
    j["scale"] = p->vario.scale;
    j["exponent"] = p->vario.exponent;
  } else if (const auto* p = std::get_if<ExtremalTParams>(&s.family)) {
    j["dof"] = p->dof;
    j["range"] = p->corr.range;
  }
  return j;
}

inline nlohmann::json spec_to_json(const MaxMixtureSpec& m) {
  nlohmann::json j;
  j["family"] = "max-mixture";
  j["a"] = m.a;
  j["x"] = spec_to_json(m.x);
  j["y"] = spec_to_json(m.y);
  return j;
}

namespace detail {

inline double require_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number())
    throw invalid_input(std::string("model spec missing numeric field '") + key + "'");
  return j[key].get<double>();
}

}  // namespace detail

inline MaxStableSpec max_stable_from_json(const nlohmann::json& j) {
  if (!j.contains("family") || !j["family"].is_string())
    throw invalid_input("model spec missing 'family'");
  const std::string fam = j["family"].get<std::string>();
  MaxStableSpec s;
  if (fam == "smith") {
    SmithParams p;
    p.s11 = detail::require_number(j, "s11");
    p.s12 = detail::require_number(j, "s12");
    p.s22 = detail::require_number(j, "s22");
    s.family = p;
  } else if (fam == "teg") {
    TegParams p;
    p.r = detail::require_number(j, "r");
    p.corr.range = detail::require_number(j, "range");
    s.family = p;
  } else if (fam == "brown-resnick") {
    BrownResnickParams p;
    p.vario.scale = detail::require_number(j, "scale");
    p.vario.exponent = detail::require_number(j, "exponent");
    s.family = p;
  } else if (fam == "extremal-t") {
    ExtremalTParams p;
    p.dof = detail::require_number(j, "dof");
    p.corr.range = detail::require_number(j, "range");
    s.family = p;
  } else {
    throw invalid_input("unknown model family '" + fam + "'");
  }
  validate(s);
  return s;
}

inline MaxMixtureSpec max_mixture_from_json(const nlohmann::json& j) {
  if (!j.contains("family") || j["family"].get<std::string>() != "max-mixture")
    throw invalid_input("expected a max-mixture model spec");
  MaxMixtureSpec m;
  m.a = detail::require_number(j, "a");
  if (!j.contains("x") || !j.contains("y"))
    throw invalid_input("max-mixture spec needs component specs 'x' and 'y'");
  m.x = max_stable_from_json(j["x"]);
  m.y = max_stable_from_json(j["y"]);
  validate(m);
  return m;
}

inline bool is_max_mixture_json(const nlohmann::json& j) {
  return j.contains("family") && j["family"].is_string() &&
         j["family"].get<std::string>() == "max-mixture";
}

// ---- field wide CSV + sidecar ----------------------------------------------

struct FieldFile {
  FieldSample field;
  std::vector<std::string> site_ids;
  nlohmann::json meta;  // sidecar contents, empty object when absent
};

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

inline void write_field_csv(const std::string& path, const FieldSample& field,
                            const std::vector<std::string>& site_ids) {
  if (static_cast<int>(site_ids.size()) != field.k)
    throw invalid_input("write_field_csv: one id per site required");
  auto f = detail::open_out(path);
  f << "replicate";
  for (const auto& id : site_ids) f << ',' << id;
  f << '\n';
  for (int i = 0; i < field.n; ++i) {
    f << (i + 1);
    for (int j = 0; j < field.k; ++j) f << ',' << detail::format_double(field.at(i, j));
    f << '\n';
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  auto f = detail::open_out(path);
  f << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  auto f = detail::open_in(path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw invalid_input("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void write_field_sidecar(const std::string& csv_path, const FieldSample& field,
                                const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j = extra;
  j["margins"] = margins_name(field.margins);
  j["n"] = field.n;
  j["k"] = field.k;
  j["seed"] = field.seed;
  j["seed_label"] = field.seed_label;
  j["version"] = kToolVersion;
  write_json_file(sidecar_path(csv_path), j);
}

inline FieldFile read_field_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw invalid_input("field file is empty: " + path);
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "replicate")
    throw invalid_input("field file must start with header replicate,<site ids>: " + path);
  FieldFile out;
  out.site_ids.assign(header.begin() + 1, header.end());
  const int k = static_cast<int>(out.site_ids.size());
  std::vector<double> values;
  int n = 0, row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != k + 1)
      throw invalid_input("field row " + std::to_string(row) + " has " +
                          std::to_string(cells.size()) + " columns, expected " +
                          std::to_string(k + 1));
    const std::string ctx = "field row " + std::to_string(row);
    for (int j = 0; j < k; ++j) values.push_back(detail::parse_cell(cells[j + 1], ctx));
    ++n;
  }
  if (n == 0) throw invalid_input("field file has no data rows: " + path);
  out.field = FieldSample(n, k, Margins::raw);
  out.field.values = std::move(values);

  std::ifstream side(sidecar_path(path));
  if (side) {
    try {
      side >> out.meta;
    } catch (const nlohmann::json::parse_error& e) {
      throw invalid_input("invalid JSON sidecar for " + path + ": " + e.what());
    }
    if (out.meta.contains("margins"))
      out.field.margins = margins_from_name(out.meta["margins"].get<std::string>());
    if (out.meta.contains("seed")) out.field.seed = out.meta["seed"].get<std::uint64_t>();
    if (out.meta.contains("seed_label"))
      out.field.seed_label = out.meta["seed_label"].get<std::string>();
  } else {
    out.meta = nlohmann::json::object();
  }
  return out;
}

// ---- dated observations ----------------------------------------------------

struct ObservationTable {
  std::vector<std::string> dates;     // one per row, ISO YYYY-MM-DD
  std::vector<std::string> site_ids;  // column order
  FieldSample field;                  // raw margins, rows = days
};

inline int month_of(const std::string& iso_date) {
  // YYYY-MM-DD
  if (iso_date.size() < 7 || iso_date[4] != '-')
    throw invalid_input("date '" + iso_date + "' is not YYYY-MM-DD");
  const char a = iso_date[5], b = iso_date[6];
  if (a < '0' || a > '9' || b < '0' || b > '9')
    throw invalid_input("date '" + iso_date + "' is not YYYY-MM-DD");
  const int m = (a - '0') * 10 + (b - '0');
  if (m < 1 || m > 12) throw invalid_input("date '" + iso_date + "' has month out of range");
  return m;
}

inline ObservationTable read_observations(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw invalid_input("observations file is empty: " + path);
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "date")
    throw invalid_input("observations file must start with header date,<site ids>: " + path);
  ObservationTable t;
  t.site_ids.assign(header.begin() + 1, header.end());
  const int k = static_cast<int>(t.site_ids.size());
  std::vector<double> values;
  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != k + 1)
      throw invalid_input("observations row " + std::to_string(row) + " has " +
                          std::to_string(cells.size()) + " columns, expected " +
                          std::to_string(k + 1));
    t.dates.push_back(cells[0]);
    const std::string ctx = "observations row " + std::to_string(row);
    for (int j = 0; j < k; ++j) values.push_back(detail::parse_cell(cells[j + 1], ctx));
  }
  if (t.dates.empty()) throw invalid_input("observations file has no data rows: " + path);
  t.field = FieldSample(static_cast<int>(t.dates.size()), k, Margins::raw);
  t.field.values = std::move(values);
  return t;
}

// Keep rows whose calendar month lies in [lo, hi] (e.g. 4..9 for an
// April-to-September season).
inline ObservationTable filter_months(const ObservationTable& t, int lo, int hi) {
  if (lo < 1 || hi > 12 || lo > hi) throw invalid_input("filter_months: need 1 <= lo <= hi <= 12");
  ObservationTable out;
  out.site_ids = t.site_ids;
  std::vector<int> keep;
  for (int i = 0; i < static_cast<int>(t.dates.size()); ++i) {
    const int m = month_of(t.dates[i]);
    if (m >= lo && m <= hi) keep.push_back(i);
  }
  if (keep.empty()) throw invalid_input("filter_months: no rows in the requested window");
  out.field = FieldSample(static_cast<int>(keep.size()), t.field.k, Margins::raw);
  for (int r = 0; r < static_cast<int>(keep.size()); ++r) {
    out.dates.push_back(t.dates[keep[r]]);
    for (int j = 0; j < t.field.k; ++j) out.field.at(r, j) = t.field.at(keep[r], j);
  }
  return out;
}

// Reorder observation columns to the site-file order; every data column must
// name a known site and every site must have a column.
inline ObservationTable align_to_sites(const ObservationTable& t, const SiteSet& ss) {
  std::unordered_map<std::string, int> col;
  for (int j = 0; j < static_cast<int>(t.site_ids.size()); ++j) col[t.site_ids[j]] = j;
  for (const auto& id : t.site_ids) {
    bool known = false;
    for (const auto& s : ss.sites)
      if (s.id == id) {
        known = true;
        break;
      }
    if (!known) throw invalid_input("observations column '" + id + "' is not a known site id");
  }
  ObservationTable out;
  out.dates = t.dates;
  out.field = FieldSample(t.field.n, ss.size(), Margins::raw);
  for (const auto& s : ss.sites) {
    const auto it = col.find(s.id);
    if (it == col.end()) throw invalid_input("site '" + s.id + "' has no observations column");
    out.site_ids.push_back(s.id);
  }
  for (int j = 0; j < ss.size(); ++j) {
    const int src = col[ss.sites[j].id];
    for (int i = 0; i < t.field.n; ++i) out.field.at(i, j) = t.field.at(i, src);
  }
  return out;
}

struct IngestResult {
  SiteSet sites;
  ObservationTable table;  // aligned to the site order
};

// Sites file + dated wide observations -> raw field; optional month-window
// filter applied before anything downstream.
inline IngestResult ingest_observations(const std::string& sites_path,
                                        const std::string& data_path, CoordSystem cs,
                                        int month_lo = 0, int month_hi = 0) {
  IngestResult r;
  r.sites = read_sites(sites_path, cs);
  ObservationTable t = read_observations(data_path);
  if (month_lo != 0 || month_hi != 0) t = filter_months(t, month_lo, month_hi);
  r.table = align_to_sites(t, r.sites);
  return r;
}

// ---- result tables ---------------------------------------------------------

// Long format shared by empirical and theoretical curves.
inline void write_madogram_csv(const std::string& path, const std::vector<MadogramCurve>& curves) {
  auto f = detail::open_out(path);
  f << "lambda,h,value,count,kind\n";
  for (const auto& c : curves)
    for (size_t b = 0; b < c.h.size(); ++b)
      f << detail::format_double(c.lambda) << ',' << detail::format_double(c.h[b]) << ','
        << detail::format_double(c.value[b]) << ',' << c.count[b] << ',' << c.kind << '\n';
}

inline std::vector<MadogramCurve> read_madogram_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw invalid_input("madogram file is empty: " + path);
  if (detail::split_csv_line(line) != std::vector<std::string>{"lambda", "h", "value", "count", "kind"})
    throw invalid_input("madogram file header must be lambda,h,value,count,kind: " + path);
  std::vector<MadogramCurve> curves;
  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != 5)
      throw invalid_input("madogram row " + std::to_string(row) + " needs 5 columns");
    const std::string ctx = "madogram row " + std::to_string(row);
    const double lambda = detail::parse_cell(cells[0], ctx);
    const std::string& kind = cells[4];
    MadogramCurve* cur = nullptr;
    for (auto& c : curves)
      if (c.lambda == lambda && c.kind == kind) cur = &c;
    if (!cur) {
      curves.push_back(MadogramCurve{});
      cur = &curves.back();
      cur->lambda = lambda;
      cur->kind = kind;
    }
    cur->h.push_back(detail::parse_cell(cells[1], ctx));
    cur->value.push_back(detail::parse_cell(cells[2], ctx));
    cur->count.push_back(static_cast<long>(detail::parse_cell(cells[3], ctx)));
  }
  return curves;
}

inline void write_chi_csv(const std::string& path, const ChiCurve& c) {
  auto f = detail::open_out(path);
  f << "u,h,chi,chibar,joint_count,defined\n";
  for (size_t b = 0; b < c.h.size(); ++b)
    f << detail::format_double(c.u) << ',' << detail::format_double(c.h[b]) << ','
      << detail::format_double(c.chi[b]) << ',' << detail::format_double(c.chibar[b]) << ','
      << c.joint_count[b] << ',' << (c.defined[b] ? 1 : 0) << '\n';
}

inline void write_theta_csv(const std::string& path, const std::vector<ThetaEstimates>& fits) {
  auto f = detail::open_out(path);
  f << "a,h,theta_x,theta_y,objective,boundary_x,boundary_y\n";
  for (const auto& est : fits)
    for (const auto& b : est.bins)
      f << detail::format_double(est.a) << ',' << detail::format_double(b.h) << ','
        << detail::format_double(b.theta_x) << ',' << detail::format_double(b.theta_y) << ','
        << detail::format_double(b.objective) << ',' << (b.at_boundary_x ? 1 : 0) << ','
        << (b.at_boundary_y ? 1 : 0) << '\n';
}

inline void write_dc_csv(const std::string& path, const DCResult& r) {
  auto f = detail::open_out(path);
  f << "a,dc,excluded_bins\n";
  for (size_t i = 0; i < r.a_grid.size(); ++i)
    f << detail::format_double(r.a_grid[i]) << ',' << detail::format_double(r.dc[i]) << ','
      << r.excluded_bins[i] << '\n';
}

inline void write_pp_csv(const std::string& path, const PPCurve& c) {
  auto f = detail::open_out(path);
  f << "q,z,empirical,model\n";
  for (size_t i = 0; i < c.q.size(); ++i)
    f << detail::format_double(c.q[i]) << ',' << detail::format_double(c.z[i]) << ','
      << detail::format_double(c.empirical[i]) << ',' << detail::format_double(c.model[i]) << '\n';
}

// ---- run manifest ----------------------------------------------------------

// Everything needed to rerun the command and get byte-identical outputs:
// the resolved config, the seed, and the code version.
inline nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                                    std::uint64_t seed, const std::vector<std::string>& outputs,
                                    const nlohmann::json& results = {}) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["outputs"] = outputs;
  j["version"] = kToolVersion;
  if (!results.is_null()) j["results"] = results;
  return j;
}

}  // namespace maxmix
