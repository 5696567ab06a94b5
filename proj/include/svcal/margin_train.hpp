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
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "svcal/core_io.hpp"

namespace svcal {

struct FrameCorpus;

/// Additive angular margin softmax head. Prototype rows are re-normalized
/// on every use, so their stored scale is irrelevant to the loss.
struct AamHead {
  Eigen::MatrixXd prototypes;  // N x D
  double margin = 0.2;
  double scale = 30.0;

  std::size_t n_classes() const { return static_cast<std::size_t>(prototypes.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(prototypes.cols()); }
  void validate() const;
};

/// Mean over the batch of -log softmax at the target class, with the target
/// logit s cos(theta_y + m) and all others s cos(theta_j). When theta_y + m
/// exceeds pi the angle is clamped to pi.
double aam_loss(const Eigen::MatrixXd &embeddings, std::span<const int> labels, const AamHead &head);

struct AamGradient {
  double loss = 0.0;
  Eigen::MatrixXd embeddings;  // d loss / d raw embeddings, n x D
  Eigen::MatrixXd prototypes;  // d loss / d raw prototypes, N x D
};

AamGradient aam_grad(const Eigen::MatrixXd &embeddings, std::span<const int> labels, const AamHead &head);

enum class ClrPolicy { kTriangular2 };

struct ClrSchedule {
  double lr_min = 1e-8;
  double lr_max = 1e-3;
  std::uint64_t cycle_len = 130000;
  ClrPolicy policy = ClrPolicy::kTriangular2;
  void validate() const;
};

/// Triangular wave rising from lr_min at a cycle start to the cycle peak at
/// half cycle; the peak of cycle k is lr_min + (lr_max - lr_min) / 2^k.
double clr_lr(std::uint64_t iteration, const ClrSchedule &sched);

/// Pairwise cosine similarity of the normalized prototypes; exactly
/// symmetric with a unit diagonal.
Eigen::MatrixXd similarity_matrix(const AamHead &head);

struct HpmConfig {
  std::size_t speakers_per_batch = 16;      // S
  std::size_t utterances_per_speaker = 1;   // U
  std::size_t similar_speakers = 8;         // I, counting the seed itself
  std::size_t batch_size() const { return speakers_per_batch * utterances_per_speaker * similar_speakers; }
  void validate() const;
};

struct HpmBatch {
  std::vector<std::size_t> utterances;  // indices into the caller's utterance table
  std::vector<std::size_t> speakers;    // class of each utterance
  std::vector<std::size_t> seeds;       // seed speakers visited by this batch
  /// Extra seeds that pad the final batch of a pass when S does not divide
  /// N; each is a speaker already seeded earlier in the same pass.
  std::vector<std::size_t> filler_seeds;
};

/// Hard prototype mining sampler. A pass visits the N speakers in random
/// order, S seeds per batch; each seed contributes U random utterances from
/// each of its I most similar speakers (itself first, then by prototype
/// cosine, ties to the lower class index). The similarity matrix is
/// recomputed only between passes.
class HpmSampler {
 public:
  HpmSampler(HpmConfig cfg, std::vector<std::vector<std::size_t>> utterances_by_speaker);

  /// Recomputes the similarity matrix from `head`.
  void refresh(const AamHead &head);
  bool stale() const { return stale_; }
  /// Throws ConfigError when the sampler is stale.
  std::vector<HpmBatch> next_pass(std::mt19937_64 &rng);
  /// The I most similar speakers of `seed`, seed first.
  std::vector<std::size_t> neighbours(std::size_t seed) const;

 private:
  HpmConfig cfg_;
  std::vector<std::vector<std::size_t>> utts_;
  Eigen::MatrixXd similarity_;
  bool stale_ = true;
};

/// One HPM pass over string utterance ids; batches are lists of utt ids.
std::vector<std::vector<std::string>> hpm_pass(const AamHead &head,
                                               const std::vector<std::vector<std::string>> &utterances_by_speaker,
                                               const HpmConfig &cfg, std::uint64_t seed);

/// Mean-pool over frames, then tanh(W x + b).
struct ToyExtractor {
  Eigen::MatrixXd weight;  // D x F
  Eigen::VectorXd bias;    // D

  Eigen::VectorXd embed_pooled(const Eigen::VectorXd &pooled) const;
  /// Pools all T frames of a row-major T x F buffer.
  Eigen::VectorXd embed_frames(std::span<const double> frames, std::size_t n_frames) const;
};

enum class SamplerKind { kRandom, kHpm };

struct TrainStage {
  double margin = 0.2;
  std::size_t crop_frames = 200;
  ClrSchedule schedule;
  SamplerKind sampler = SamplerKind::kRandom;
  std::size_t n_cycles = 1;
  /// Time and feature-band masking on crops.
  bool augment = false;
};

struct TrainPlan {
  std::vector<TrainStage> stages;
  std::size_t embedding_dim = 32;
  double scale = 30.0;
  std::size_t batch_size = 128;  // random sampler
  HpmConfig hpm;
  double weight_decay_extractor = 2e-5;
  double weight_decay_head = 2e-4;

  void validate() const;
};

/// Stage 1 with margin 0.2 and random batches, then a fine-tuning stage with
/// margin 0.5, 3x crops, a 100x lower peak rate, a shorter cycle, HPM
/// batches and no augmentation.
TrainPlan default_train_plan(std::size_t base_crop_frames, std::uint64_t base_cycle_len, double base_lr_max,
                             std::size_t base_cycles = 3);

/// Plan file: either a JSON array of stage objects or an object with a
/// "stages" array plus global settings.
TrainPlan train_plan_from_json(const nlohmann::json &j);
nlohmann::json to_json(const TrainPlan &plan);

struct TrainLogEntry {
  std::size_t stage;
  std::uint64_t iteration;  // global, across stages
  double lr;
  double loss;
};

struct ToyModel {
  ToyExtractor extractor;
  AamHead head;
  std::vector<TrainLogEntry> log;
};

/// Trains stage by stage from a fresh seeded initialization. Every parameter
/// stays trainable in every stage. Throws ConvergenceError naming the stage
/// and iteration if the loss becomes non-finite.
ToyModel train_toy(const TrainPlan &plan, const FrameCorpus &corpus, std::uint64_t seed);

/// Continues training an existing model with additional stages.
ToyModel continue_training(ToyModel model, const TrainPlan &plan, const FrameCorpus &corpus, std::uint64_t seed);

/// Embeds every utterance of the corpus over its full length.
EmbeddingStore embed_corpus(const ToyExtractor &extractor, const FrameCorpus &corpus);

void write_train_log(const std::vector<TrainLogEntry> &log, std::ostream &out);
nlohmann::json to_json(const ToyModel &model);
void save_toy_model(const ToyModel &model, const std::string &dir);

}  // namespace svcal
