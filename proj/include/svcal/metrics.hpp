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

#include <span>
#include <vector>

#include "svcal/core_io.hpp"

namespace svcal {

struct DcfParams {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;

  void validate() const;
  /// log((1 - p) c_fa / (p c_miss)).
  double bayes_threshold() const;
  /// min(p c_miss, (1 - p) c_fa), the cost of the better trivial policy.
  double normalizer() const;
};

/// Rates at one threshold; a trial is accepted iff score >= threshold.
struct OperatingPoint {
  double threshold;
  double p_miss;
  double p_fa;
};

enum class EerMode {
  kInterpolate,  // linear interpolation at the miss/false-alarm crossing
  kNearestMax,   // max of the two rates at the closest swept point
};

/// Operating points from threshold -inf (accept all) through every distinct
/// score to +inf (reject all), in increasing threshold order.
std::vector<OperatingPoint> sweep(std::span<const double> scores, std::span<const Label> labels);

double eer(std::span<const double> scores, std::span<const Label> labels, EerMode mode = EerMode::kInterpolate);

/// Normalized minimum detection cost over the full threshold sweep.
double min_dcf(std::span<const double> scores, std::span<const Label> labels, const DcfParams &params);

/// Normalized detection cost at the Bayes threshold of `params`.
double act_dcf(std::span<const double> llrs, std::span<const Label> labels, const DcfParams &params);

/// Log-likelihood-ratio cost in bits. |llr| > 700 is treated as infinite.
double cllr(std::span<const double> llrs, std::span<const Label> labels);

/// Unnormalized cost p c_miss P_miss + (1 - p) c_fa P_fa from error counts.
double detection_cost(std::size_t misses, std::size_t n_target, std::size_t false_alarms, std::size_t n_nontarget,
                      const DcfParams &params);

}  // namespace svcal
