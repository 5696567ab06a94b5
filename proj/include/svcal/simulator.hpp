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
#include <random>
#include <string>
#include <vector>

#include "svcal/calibration.hpp"
#include <Eigen/Dense>

#include "svcal/core_io.hpp"

namespace svcal {

/// Synthetic speaker population whose embedding noise shrinks with duration:
/// per-coordinate std = noise_base / duration_s^noise_duration_exponent.
struct SimConfig {
  std::size_t n_speakers = 200;
  std::size_t dim = 64;
  double frames_per_second = 100.0;
  double short_min_s = 2.0;
  double short_max_s = 6.0;  // short is [short_min_s, short_max_s)
  double long_max_s = 20.0;  // long is [short_max_s, long_max_s]
  double long_fraction = 0.5;
  std::size_t utterances_per_speaker = 10;
  double noise_base = 0.3;
  double noise_duration_exponent = 0.5;
  std::uint64_t seed = 7;
  std::string id_prefix = "spk";

  void validate() const;
  double noise_std(double duration_s) const;
};

/// Unit vectors drawn uniformly on the hypersphere.
std::vector<std::vector<double>> generate_population(const SimConfig &cfg);

/// speaker_mean plus duration-dependent Gaussian noise; n_frames is
/// round(fps * duration), n_speech_frames a uniform fraction in [0.6, 1] of it.
Embedding generate_utterance(std::span<const double> speaker_mean, double duration_s, const SimConfig &cfg,
                             std::mt19937_64 &rng);

/// Every speaker of the population with cfg.utterances_per_speaker
/// utterances, durations drawn from the short/long mixture.
EmbeddingStore generate_store(const SimConfig &cfg);

struct SimulatedTrials {
  EmbeddingStore store;
  TrialList trials;
};

/// Store from cfg, then stratified balanced trials over it.
SimulatedTrials generate_trialset(const SimConfig &cfg, const CalibrationTrialSpec &spec, std::uint64_t seed);

/// Frame-level corpus for toy extractor training. Each frame is
/// speaker_scale * speaker_mean + utterance channel offset (in a fixed
/// low-rank subspace) + white frame noise, so the pooled mean recovers the
/// speaker direction in expectation.
struct FrameCorpusConfig {
  std::size_t n_speakers = 64;
  std::size_t utterances_per_speaker = 8;
  std::size_t frame_dim = 24;
  std::size_t min_frames = 200;
  std::size_t max_frames = 400;
  double speaker_scale = 1.0;
  double frame_noise = 2.0;
  std::size_t channel_rank = 4;
  double channel_noise = 0.6;
  std::uint64_t seed = 7;
  std::string id_prefix = "tspk";
};

struct FrameUtterance {
  std::string utt_id;
  std::size_t speaker = 0;   // index into FrameCorpus::speaker_ids
  std::size_t n_frames = 0;
  std::vector<double> frames;  // row-major n_frames x frame_dim
};

struct FrameCorpus {
  std::size_t frame_dim = 0;
  std::vector<std::string> speaker_ids;
  std::vector<FrameUtterance> utterances;

  std::vector<std::vector<std::size_t>> utterances_by_speaker() const;
  /// Speakers [0, n) and [n, N) as two corpora with re-based indices.
  std::pair<FrameCorpus, FrameCorpus> split_speakers(std::size_t n) const;
  void validate() const;
};

FrameCorpus generate_frame_corpus(const FrameCorpusConfig &cfg);

// Frame-feature file: `utt_id speaker_id T F f_1 ... f_{T*F}` (row-major).
void save_frame_corpus(const FrameCorpus &corpus, const std::string &path);
FrameCorpus load_frame_corpus(const std::string &path);
void write_frame_corpus(const FrameCorpus &corpus, std::ostream &out);
FrameCorpus read_frame_corpus(std::istream &in, const std::string &name = "<stream>");

/// Seeded balanced trials over a store: each target pairs two distinct
/// utterances of one speaker, each nontarget two speakers.
TrialList random_balanced_trials(const EmbeddingStore &store, std::size_t n_trials, std::uint64_t seed);

/// Stream seed for item `index` derived from `seed` (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace svcal
