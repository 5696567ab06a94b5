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
#include <string>
#include <vector>

#include <json.hpp>

#include "svcal/calibration.hpp"
#include "svcal/core_io.hpp"
#include "svcal/metrics.hpp"
#include "svcal/quality.hpp"
#include "svcal/scoring.hpp"
#include "svcal/simulator.hpp"

namespace svcal {

inline constexpr std::string_view kToolVersion = "svcal 1.0.0";

/// score -> s-norm -> QMF -> calibrate -> evaluate. An empty qmf.enabled
/// set means score-only calibration.
struct PipelineConfig {
  std::string embeddings;
  std::string trials;
  std::string cohort;  // embedding file of cohort-speaker utterances
  /// Labeled trials over `embeddings` used to fit the calibration. When
  /// absent the calibration is fitted on the evaluation trials themselves.
  std::optional<std::string> calibration_trials;
  Similarity scorer = Similarity::kCosine;
  SnormConfig snorm;
  QmfConfig qmf;
  std::vector<DcfParams> dcf = {{0.01, 1.0, 1.0}, {0.05, 1.0, 1.0}};
  double prior = 0.05;
  std::uint64_t seed = 7;
  /// Directory relative paths are resolved against; not part of the hash.
  std::string base_dir;

  /// Throws ConfigError on missing paths or bad parameters.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig &cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json &j, const std::string &base_dir = "");
/// Relative paths in the file resolve against the file's directory.
PipelineConfig load_pipeline_config(const std::string &path);

struct PipelineInputs {
  EmbeddingStore store;
  TrialList trials;
  std::optional<TrialList> calibration_trials;
  EmbeddingStore cohort_store;
};

PipelineInputs load_pipeline_inputs(const PipelineConfig &cfg);

struct StageMetrics {
  std::string stage;
  double eer = 0.0;
  std::vector<double> min_dcf;  // one per DcfParams
  std::vector<double> act_dcf;
  double cllr = 0.0;
};

struct Provenance {
  std::string version;
  std::string config_hash;  // 16 hex digits
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
};

/// 64-bit FNV-1a of the canonical (key-sorted, compact) JSON dump.
std::string config_hash(const nlohmann::json &config);
Provenance version_and_provenance(const nlohmann::json &config,
                                  std::vector<std::pair<std::string, std::uint64_t>> seeds);

struct PipelineReport {
  Provenance provenance;
  std::vector<DcfParams> dcf;
  std::vector<StageMetrics> stages;  // raw, normalized, calibrated
  CalibrationModel model;
  std::size_t n_trials = 0;
  std::size_t n_calibration_trials = 0;
};

/// Errors are rethrown as svcal::Error prefixed with the failing stage.
PipelineReport run_pipeline(const PipelineConfig &cfg, const PipelineInputs &inputs);
PipelineReport run_pipeline(const PipelineConfig &cfg);

StageMetrics evaluate_stage(const std::string &name, std::span<const double> scores, std::span<const Label> labels,
                            const std::vector<DcfParams> &dcf);

void write_report_text(const PipelineReport &report, std::ostream &out);
nlohmann::json to_json(const PipelineReport &report);

/// Evaluation, calibration and cohort material drawn from one simulator
/// configuration with disjoint speaker populations.
struct SimulatedDataset {
  EmbeddingStore store;  // evaluation + calibration utterances
  TrialList trials;
  TrialList calibration_trials;
  EmbeddingStore cohort_store;
};

struct DatasetOptions {
  std::size_t trials_per_type = 1000;
  std::size_t cohort_speakers = 200;
  std::size_t cohort_utterances = 4;
};

SimulatedDataset simulate_dataset(const SimConfig &cfg, const DatasetOptions &opts);
PipelineInputs to_inputs(SimulatedDataset dataset);

/// Writes embeddings.txt, trials.txt, calibration_trials.txt, cohort.txt and
/// a pipeline.json that `run` accepts as-is.
void write_simulated_dataset(const SimulatedDataset &dataset, const PipelineConfig &defaults, const std::string &dir);

}  // namespace svcal
