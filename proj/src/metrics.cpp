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

#include "svcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "svcal/error.hpp"

namespace svcal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLlrCap = 700.0;

struct ClassCounts {
  std::size_t target = 0;
  std::size_t nontarget = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  ClassCounts n;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw DataError("NaN score at trial " + std::to_string(i));
    (labels[i] == Label::kTarget ? n.target : n.nontarget)++;
  }
  if (n.target == 0 || n.nontarget == 0) throw DataError("metric requires both target and nontarget trials");
  return n;
}

// log2(1 + exp(x)), with the cap applied to x.
double softplus_bits(double x) {
  if (x > kLlrCap) return kInf;
  if (x < -kLlrCap) return 0.0;
  return std::log1p(std::exp(x)) / std::log(2.0);
}

}  // namespace

void DcfParams::validate() const {
  if (!(p_target > 0.0 && p_target < 1.0)) throw ConfigError("p_target must lie in (0, 1)");
  if (!(c_miss > 0.0) || !(c_fa > 0.0)) throw ConfigError("detection costs must be positive");
}

double DcfParams::bayes_threshold() const { return std::log((1.0 - p_target) * c_fa / (p_target * c_miss)); }

double DcfParams::normalizer() const { return std::min(p_target * c_miss, (1.0 - p_target) * c_fa); }

double detection_cost(std::size_t misses, std::size_t n_target, std::size_t false_alarms, std::size_t n_nontarget,
                      const DcfParams &params) {
  const double p_miss = static_cast<double>(misses) / static_cast<double>(n_target);
  const double p_fa = static_cast<double>(false_alarms) / static_cast<double>(n_nontarget);
  return params.p_target * params.c_miss * p_miss + (1.0 - params.p_target) * params.c_fa * p_fa;
}

namespace {

struct CountPoint {
  double threshold;
  std::size_t misses;
  std::size_t false_alarms;
};

std::vector<CountPoint> sweep_counts(std::span<const double> scores, std::span<const Label> labels,
                                     const ClassCounts &n) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::vector<CountPoint> points;
  points.reserve(scores.size() + 2);
  points.push_back({-kInf, 0, n.nontarget});
  // Threshold at each distinct score v: misses are targets strictly below v.
  std::size_t misses = 0;
  std::size_t nontargets_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double v = scores[order[i]];
    if (i > 0) points.push_back({v, misses, n.nontarget - nontargets_below});
    while (i < order.size() && scores[order[i]] == v) {
      (labels[order[i]] == Label::kTarget ? misses : nontargets_below)++;
      ++i;
    }
  }
  points.push_back({kInf, n.target, 0});
  return points;
}

}  // namespace

std::vector<OperatingPoint> sweep(std::span<const double> scores, std::span<const Label> labels) {
  const ClassCounts n = check_inputs(scores, labels);
  const double nt = static_cast<double>(n.target);
  const double nn = static_cast<double>(n.nontarget);
  std::vector<OperatingPoint> out;
  for (const CountPoint &c : sweep_counts(scores, labels, n)) {
    out.push_back({c.threshold, static_cast<double>(c.misses) / nt, static_cast<double>(c.false_alarms) / nn});
  }
  return out;
}

double eer(std::span<const double> scores, std::span<const Label> labels, EerMode mode) {
  const auto points = sweep(scores, labels);
  if (mode == EerMode::kNearestMax) {
    std::size_t best = 0;
    double best_gap = kInf;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double gap = std::abs(points[i].p_fa - points[i].p_miss);
      if (gap < best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    return std::max(points[best].p_fa, points[best].p_miss);
  }
  // p_fa - p_miss is +1 at the first point, -1 at the last, non-increasing.
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = points[i].p_fa - points[i].p_miss;
    if (d > 0.0) continue;
    if (d == 0.0) return points[i].p_miss;
    const double d_prev = points[i - 1].p_fa - points[i - 1].p_miss;
    const double t = d_prev / (d_prev - d);
    return points[i - 1].p_miss + t * (points[i].p_miss - points[i - 1].p_miss);
  }
  return 1.0;  // unreachable: the +inf point always has d = -1
}

double min_dcf(std::span<const double> scores, std::span<const Label> labels, const DcfParams &params) {
  params.validate();
  const ClassCounts n = check_inputs(scores, labels);
  double best = kInf;
  for (const CountPoint &c : sweep_counts(scores, labels, n)) {
    best = std::min(best, detection_cost(c.misses, n.target, c.false_alarms, n.nontarget, params));
  }
  return best / params.normalizer();
}

double act_dcf(std::span<const double> llrs, std::span<const Label> labels, const DcfParams &params) {
  params.validate();
  const ClassCounts n = check_inputs(llrs, labels);
  const double theta = params.bayes_threshold();
  std::size_t misses = 0, fas = 0;
  for (std::size_t i = 0; i < llrs.size(); ++i) {
    const bool accept = llrs[i] >= theta;
    if (labels[i] == Label::kTarget && !accept) ++misses;
    if (labels[i] == Label::kNontarget && accept) ++fas;
  }
  return detection_cost(misses, n.target, fas, n.nontarget, params) / params.normalizer();
}

double cllr(std::span<const double> llrs, std::span<const Label> labels) {
  const ClassCounts n = check_inputs(llrs, labels);
  double tar = 0.0, non = 0.0;
  for (std::size_t i = 0; i < llrs.size(); ++i) {
    if (labels[i] == Label::kTarget) {
      tar += softplus_bits(-llrs[i]);
    } else {
      non += softplus_bits(llrs[i]);
    }
  }
  return 0.5 * (tar / static_cast<double>(n.target) + non / static_cast<double>(n.nontarget));
}

}  // namespace svcal
