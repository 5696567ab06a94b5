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

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "svcal/core_io.hpp"
#include "svcal/quality.hpp"

namespace svcal {

/// Linear map l = w_s s + w_q . q + b from a score and its quality vector
/// to a log-likelihood-ratio.
struct CalibrationModel {
  double w_s = 1.0;
  std::vector<double> w_q;
  double b = 0.0;
  /// Absent for score-only calibration.
  std::optional<QmfConfig> qmf_config;
  double effective_prior = 0.05;

  /// Throws DataError if q does not have w_q's length.
  double apply(double s, const QualityVector &q) const;
  double apply(double s) const { return apply(s, QualityVector{}); }
  void validate() const;
};

nlohmann::json to_json(const CalibrationModel &model);
CalibrationModel calibration_model_from_json(const nlohmann::json &j);
void save_calibration_model(const CalibrationModel &model, const std::string &path);
CalibrationModel load_calibration_model(const std::string &path);

struct FitOptions {
  double prior = 0.05;
  /// Penalty 0.5 * l2 * |w|^2 on the non-bias weights; 0 disables it.
  double l2 = 0.0;
  int max_iterations = 10000;
  double gradient_tolerance = 1e-8;
  /// Starting point [w..., b]; zeros when absent.
  std::optional<std::vector<double>> init;
};

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;
};

/// Prior-weighted cross-entropy (nats) of sigmoid(X w + b + logit(prior)):
///   prior/N_tar sum_tar log(1+e^-z) + (1-prior)/N_non sum_non log(1+e^z).
double logistic_objective(const Eigen::MatrixXd &features, std::span<const Label> labels, std::span<const double> weights,
                          double bias, double prior, double l2 = 0.0);

/// Newton iteration with backtracking on the convex objective above. Rows of
/// `features` are trials, columns are inputs; the bias is implicit.
LogisticFit fit_logistic(const Eigen::MatrixXd &features, std::span<const Label> labels, const FitOptions &opts);

/// Fits (w_s, w_q, b). `q` is empty or index-aligned with `scores`.
CalibrationModel fit_calibration(std::span<const double> scores, std::span<const QualityVector> q,
                                 std::span<const Label> labels, const FitOptions &opts,
                                 std::optional<QmfConfig> qmf_config = std::nullopt);

/// Objective of `model` on the given set, for comparisons between models.
double calibration_objective(const CalibrationModel &model, std::span<const double> scores,
                             std::span<const QualityVector> q, std::span<const Label> labels, double prior);

std::vector<double> apply_calibration(const CalibrationModel &model, std::span<const double> scores,
                                      std::span<const QualityVector> q);

struct CalibrationTrialSpec {
  double short_min_s = 2.0;  // short is [short_min_s, boundary_s)
  double boundary_s = 6.0;   // long is [boundary_s, long_max_s]
  double long_max_s = std::numeric_limits<double>::infinity();
  std::size_t trials_per_type = 10000;
  double frames_per_second = 100.0;
};

enum class DurationClass { kShort, kLong, kOutside };
DurationClass classify_duration(std::int64_t n_frames, const CalibrationTrialSpec &spec);

/// short-short, short-long and long-long blocks of spec.trials_per_type
/// trials each, half target (same speaker, distinct utterances) and half
/// nontarget, no pair repeated. Seeded and reproducible.
TrialList build_calibration_trials(const EmbeddingStore &store, const CalibrationTrialSpec &spec, std::uint64_t seed);

/// Weighted average of per-system LLRs; weights non-negative, sum 1 within 1e-9.
double fuse(std::span<const double> llrs, std::span<const double> weights);
std::vector<double> fuse_systems(const std::vector<std::vector<double>> &system_llrs, std::span<const double> weights);

/// Joint logistic fit over all systems' scores: l = sum_k a_k s_k + b.
struct LinearFusion {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> apply(const std::vector<std::vector<double>> &system_scores) const;
};
LinearFusion fit_fusion(const std::vector<std::vector<double>> &system_scores, std::span<const Label> labels,
                        const FitOptions &opts);

}  // namespace svcal
