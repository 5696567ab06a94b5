// Copyright 2026  The svcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Brute-force reference metrics: every threshold between adjacent distinct
// scores plus both infinities, each evaluated by a full pass over the trials.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "svcal/core_io.hpp"
#include "svcal/metrics.hpp"

namespace svcal::testing {

struct OracleRates {
  double p_miss;
  double p_fa;
};

inline std::vector<double> oracle_thresholds(std::span<const double> scores) {
  std::vector<double> v(scores.begin(), scores.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  std::vector<double> th{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 1; i < v.size(); ++i) th.push_back(0.5 * (v[i - 1] + v[i]));
  th.push_back(std::numeric_limits<double>::infinity());
  return th;
}

inline OracleRates oracle_rates(std::span<const double> scores, std::span<const Label> labels, double th,
                                std::size_t &misses, std::size_t &fas) {
  std::size_t nt = 0, nn = 0;
  misses = fas = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == Label::kTarget) {
      ++nt;
      if (!(scores[i] >= th)) ++misses;
    } else {
      ++nn;
      if (scores[i] >= th) ++fas;
    }
  }
  return {static_cast<double>(misses) / static_cast<double>(nt), static_cast<double>(fas) / static_cast<double>(nn)};
}

inline double oracle_eer(std::span<const double> scores, std::span<const Label> labels) {
  std::vector<OracleRates> pts;
  std::size_t m, f;
  for (double th : oracle_thresholds(scores)) pts.push_back(oracle_rates(scores, labels, th, m, f));
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = pts[i].p_fa - pts[i].p_miss;
    if (d > 0.0) continue;
    if (d == 0.0) return pts[i].p_miss;
    const double d0 = pts[i - 1].p_fa - pts[i - 1].p_miss;
    const double t = d0 / (d0 - d);
    return pts[i - 1].p_miss + t * (pts[i].p_miss - pts[i - 1].p_miss);
  }
  return 1.0;
}

inline double oracle_cost(const OracleRates &r, const DcfParams &p) {
  return p.p_target * p.c_miss * r.p_miss + (1.0 - p.p_target) * p.c_fa * r.p_fa;
}

inline double oracle_norm(const DcfParams &p) { return std::min(p.p_target * p.c_miss, (1.0 - p.p_target) * p.c_fa); }

inline double oracle_min_dcf(std::span<const double> scores, std::span<const Label> labels, const DcfParams &p) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t m, f;
  for (double th : oracle_thresholds(scores)) best = std::min(best, oracle_cost(oracle_rates(scores, labels, th, m, f), p));
  return best / oracle_norm(p);
}

inline double oracle_act_dcf(std::span<const double> llrs, std::span<const Label> labels, const DcfParams &p) {
  const double theta = std::log((1.0 - p.p_target) * p.c_fa / (p.p_target * p.c_miss));
  std::size_t m, f;
  return oracle_cost(oracle_rates(llrs, labels, theta, m, f), p) / oracle_norm(p);
}

inline double oracle_cllr(std::span<const double> llrs, std::span<const Label> labels) {
  double tar = 0, non = 0;
  std::size_t nt = 0, nn = 0;
  for (std::size_t i = 0; i < llrs.size(); ++i) {
    if (labels[i] == Label::kTarget) {
      tar += std::log2(1.0 + std::exp(-llrs[i]));
      ++nt;
    } else {
      non += std::log2(1.0 + std::exp(llrs[i]));
      ++nn;
    }
  }
  return 0.5 * (tar / nt + non / nn);
}

}  // namespace svcal::testing
