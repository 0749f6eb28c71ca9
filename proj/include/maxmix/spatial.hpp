#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "maxmix/errors.hpp"

namespace maxmix {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kPi = 3.14159265358979323846;

enum class CoordSystem { euclidean, lonlat };

struct Site {
  std::string id;
  double c1 = 0.0;  // x (euclidean) or longitude in degrees (lonlat)
  double c2 = 0.0;  // y (euclidean) or latitude in degrees (lonlat)
  double alt = std::numeric_limits<double>::quiet_NaN();
};

struct SiteSet {
  std::vector<Site> sites;
  CoordSystem coords = CoordSystem::euclidean;
  int size() const { return static_cast<int>(sites.size()); }
};

struct PairLag {
  int i = 0, j = 0;   // site indices, i < j
  double h = 0.0;     // separation distance (coordinate units, or km for lonlat)
  double azimuth = 0.0;  // radians in (-pi, pi], 0 = northing
};

struct LagBin {
  double lo = 0.0, hi = 0.0;
  double rep = 0.0;             // mean member distance
  std::vector<int> pair_index;  // indices into the PairLag vector
};

struct LagBins {
  std::vector<double> edges;
  std::vector<LagBin> bins;
};

namespace detail {

inline double deg2rad(double d) { return d * (kPi / 180.0); }

inline double haversine_km(const Site& a, const Site& b) {
  const double phi1 = deg2rad(a.c2), phi2 = deg2rad(b.c2);
  const double dphi = phi2 - phi1, dlam = deg2rad(b.c1 - a.c1);
  const double s = std::sin(0.5 * dphi), t = std::sin(0.5 * dlam);
  const double u = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(u)));
}

// Initial great-circle bearing from a to b, mapped to (-pi, pi] with 0 = north.
inline double bearing(const Site& a, const Site& b) {
  const double phi1 = deg2rad(a.c2), phi2 = deg2rad(b.c2);
  const double dlam = deg2rad(b.c1 - a.c1);
  const double y = std::sin(dlam) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlam);
  double az = std::atan2(y, x);
  if (az <= -kPi) az = kPi;
  return az;
}

}  // namespace detail

inline double site_distance(const SiteSet& ss, int i, int j) {
  const Site &a = ss.sites[i], &b = ss.sites[j];
  if (ss.coords == CoordSystem::euclidean) return std::hypot(b.c1 - a.c1, b.c2 - a.c2);
  return detail::haversine_km(a, b);
}

inline std::vector<PairLag> pairwise_lags(const SiteSet& ss) {
  const int k = ss.size();
  if (k < 2) throw invalid_input("pairwise_lags: need at least 2 sites");
  std::vector<PairLag> out;
  out.reserve(static_cast<size_t>(k) * (k - 1) / 2);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const Site &a = ss.sites[i], &b = ss.sites[j];
      PairLag p;
      p.i = i;
      p.j = j;
      if (ss.coords == CoordSystem::euclidean) {
        const double dx = b.c1 - a.c1, dy = b.c2 - a.c2;
        p.h = std::hypot(dx, dy);
        p.azimuth = std::atan2(dx, dy);  // 0 points along +c2 (northing)
        if (p.azimuth <= -kPi) p.azimuth = kPi;
      } else {
        p.h = detail::haversine_km(a, b);
        p.azimuth = detail::bearing(a, b);
      }
      if (p.h <= 0.0)
        throw invalid_input("pairwise_lags: duplicate coordinates for sites '" + a.id + "' and '" +
                            b.id + "'");
      out.push_back(p);
    }
  }
  return out;
}

// Bins of uniform width covering [0, max h]: first bin [0,w], then (lo,hi].
// Empty bins are dropped.
inline LagBins bin_lags(const std::vector<PairLag>& pairs, double width) {
  if (pairs.empty()) throw invalid_input("bin_lags: no pairs");
  if (!(width > 0.0)) throw invalid_input("bin_lags: width must be positive");
  double hmax = 0.0;
  for (const auto& p : pairs) hmax = std::max(hmax, p.h);
  const int nb = std::max(1, static_cast<int>(std::ceil(hmax / width - 1e-12)));
  std::vector<LagBin> bins(nb);
  for (int b = 0; b < nb; ++b) {
    bins[b].lo = b * width;
    bins[b].hi = (b + 1) * width;
  }
  for (int idx = 0; idx < static_cast<int>(pairs.size()); ++idx) {
    const double h = pairs[idx].h;
    int b = static_cast<int>(std::ceil(h / width)) - 1;  // (lo,hi] membership
    b = std::clamp(b, 0, nb - 1);
    bins[b].pair_index.push_back(idx);
  }
  LagBins out;
  for (int b = 0; b <= nb; ++b) out.edges.push_back(b * width);
  for (auto& bin : bins) {
    if (bin.pair_index.empty()) continue;
    double s = 0.0;
    for (int idx : bin.pair_index) s += pairs[idx].h;
    bin.rep = s / bin.pair_index.size();
    out.bins.push_back(std::move(bin));
  }
  return out;
}

// Explicit strictly-increasing edges; pairs outside [edges.front(), edges.back()]
// are dropped. First bin is closed on the left.
inline LagBins bin_lags(const std::vector<PairLag>& pairs, const std::vector<double>& edges) {
  if (pairs.empty()) throw invalid_input("bin_lags: no pairs");
  if (edges.size() < 2) throw invalid_input("bin_lags: need at least two edges");
  for (size_t e = 1; e < edges.size(); ++e)
    if (!(edges[e] > edges[e - 1])) throw invalid_input("bin_lags: edges must strictly increase");
  const int nb = static_cast<int>(edges.size()) - 1;
  std::vector<LagBin> bins(nb);
  for (int b = 0; b < nb; ++b) {
    bins[b].lo = edges[b];
    bins[b].hi = edges[b + 1];
  }
  for (int idx = 0; idx < static_cast<int>(pairs.size()); ++idx) {
    const double h = pairs[idx].h;
    if (h < edges.front() || h > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), h);
    int b = static_cast<int>(it - edges.begin()) - 1;
    b = std::clamp(b, 0, nb - 1);
    bins[b].pair_index.push_back(idx);
  }
  LagBins out;
  out.edges = edges;
  for (auto& bin : bins) {
    if (bin.pair_index.empty()) continue;
    double s = 0.0;
    for (int idx : bin.pair_index) s += pairs[idx].h;
    bin.rep = s / bin.pair_index.size();
    out.bins.push_back(std::move(bin));
  }
  return out;
}

// Four half-plane-folded direction sectors:
//   1: (-pi/8,  pi/8]   N-S
//   2: ( pi/8, 3pi/8]   NE-SW
//   3: (3pi/8, 5pi/8]   E-W
//   4: (5pi/8, 7pi/8]   SE-NW
inline int sector_of(double azimuth) {
  if (!std::isfinite(azimuth)) throw invalid_input("sector_of: azimuth not finite");
  double az = std::fmod(azimuth, kPi);  // antipodal fold
  if (az <= -kPi / 8.0) az += kPi;
  if (az > 7.0 * kPi / 8.0) az -= kPi;
  if (az <= kPi / 8.0) return 1;
  if (az <= 3.0 * kPi / 8.0) return 2;
  if (az <= 5.0 * kPi / 8.0) return 3;
  return 4;
}

}  // namespace maxmix
