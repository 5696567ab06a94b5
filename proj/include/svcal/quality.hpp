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
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "svcal/core_io.hpp"

namespace svcal {

/// Declaration order is the canonical feature order.
enum class QmfKind { kDuration = 0, kSpeechDuration = 1, kMagnitude = 2, kImposterMean = 3 };

enum class CombineMode { kMinMax, kMean, kMin };

std::string_view to_string(QmfKind kind);
std::string_view to_string(CombineMode mode);
QmfKind parse_qmf_kind(const std::string &name);
CombineMode parse_combine_mode(const std::string &name);
/// Comma-separated list, e.g. "duration,imposter_mean".
std::set<QmfKind> parse_qmf_list(const std::string &csv);

struct QmfConfig {
  std::set<QmfKind> enabled;
  std::optional<std::int64_t> duration_clip_frames;
  CombineMode combine = CombineMode::kMinMax;
  std::size_t imposter_top_n = 100;
  /// QMFs passed through a natural log before combination. Empty by default.
  std::set<QmfKind> log_transform;

  std::size_t feature_count() const;
  /// Names in vector order, e.g. "duration.min", "duration.max".
  std::vector<std::string> feature_names() const;
  /// Throws ConfigError on an empty enabled set or bad parameters.
  void validate() const;

  bool operator==(const QmfConfig &) const = default;
};

nlohmann::json to_json(const QmfConfig &cfg);
QmfConfig qmf_config_from_json(const nlohmann::json &j);

struct QualityVector {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
  bool operator==(const QualityVector &) const = default;
};

double duration_qmf(const Embedding &u, std::optional<std::int64_t> clip);
/// Throws DataError when n_speech_frames is absent.
double speech_duration_qmf(const Embedding &u, std::optional<std::int64_t> clip);
double magnitude_qmf(const Embedding &u);
/// Mean inner product between u's raw vector and its top_n cohort means,
/// the top_n being selected by inner product.
double imposter_mean_qmf(const Embedding &u, const Cohort &cohort, std::size_t top_n);

/// Number of frames whose energy lies within threshold_db of the loudest
/// frame. All-zero input yields 0.
std::int64_t energy_vad(std::span<const double> frame_energies, double threshold_db_below_max);

/// Fills n_speech_frames from frame energies for utterances lacking it.
EmbeddingStore with_vad_speech_frames(const EmbeddingStore &store,
                                      const std::unordered_map<std::string, std::vector<double>> &energies,
                                      double threshold_db_below_max);

std::vector<double> symmetric_combine(double q_enroll, double q_test, CombineMode mode);

/// Single-utterance measurement of one QMF, after the optional log.
double utterance_qmf(QmfKind kind, const Embedding &u, const Cohort *cohort, const QmfConfig &cfg);

QualityVector assemble_quality_vector(const Trial &trial, const EmbeddingStore &store, const Cohort *cohort,
                                      const QmfConfig &cfg);

/// Vector per trial; per-utterance measurements are computed once.
std::vector<QualityVector> assemble_quality_vectors(const TrialList &trials, const EmbeddingStore &store,
                                                    const Cohort *cohort, const QmfConfig &cfg);

// QMF feature file: `enroll_id test_id q1 ... qK`, optionally preceded by a
// `#qmf <json>` header line recording the configuration.
struct QualityFeatures {
  TrialList trials;
  std::vector<QualityVector> vectors;
  std::optional<QmfConfig> config;
};

void write_quality_features(const QualityFeatures &features, std::ostream &out);
QualityFeatures read_quality_features(std::istream &in, const std::string &name = "<stream>");
void save_quality_features(const QualityFeatures &features, const std::string &path);
QualityFeatures load_quality_features(const std::string &path);

}  // namespace svcal
