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

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "svcal/calibration.hpp"
#include "svcal/metrics.hpp"
#include "svcal/scoring.hpp"
#include "svcal/simulator.hpp"
#include "test_util.hpp"

using namespace svcal;

TEST_SUITE("simulator") {

TEST_CASE("population") {
  SimConfig cfg;
  cfg.n_speakers = 4;
  cfg.dim = 2;
  const auto pop = generate_population(cfg);
  CHECK(pop == generate_population(cfg));
  REQUIRE(pop.size() == 4);
  std::vector<double> cosines;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::hypot(pop[i][0], pop[i][1]) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = i + 1; j < 4; ++j) cosines.push_back(cosine_score(pop[i], pop[j]));
  }
  bool all_equal = true;
  for (double c : cosines) all_equal = all_equal && std::abs(c - cosines[0]) < 1e-9;
  CHECK_FALSE(all_equal);
}

TEST_CASE("duration-dependent noise") {
  SimConfig cfg;
  CHECK(cfg.noise_std(4.0) / cfg.noise_std(16.0) == doctest::Approx(2.0).epsilon(1e-14));
  cfg.noise_duration_exponent = 0.0;
  CHECK(cfg.noise_std(3.0) == cfg.noise_base);
  CHECK(cfg.noise_std(17.0) == cfg.noise_base);

  std::mt19937_64 rng(1);
  const std::vector<double> mean(8, 0.0);
  const Embedding e = generate_utterance(mean, 6.0, SimConfig{}, rng);
  CHECK(e.n_frames == 600);
  REQUIRE(e.n_speech_frames.has_value());
  CHECK(*e.n_speech_frames >= 360);
  CHECK(*e.n_speech_frames <= 600);
}

TEST_CASE("trial sets") {
  SimConfig cfg;
  cfg.n_speakers = 100;
  CalibrationTrialSpec spec;
  spec.trials_per_type = 1000;
  spec.long_max_s = cfg.long_max_s;
  const SimulatedTrials a = generate_trialset(cfg, spec, 3);
  CHECK(a.trials.size() == 3000);
  const auto lab = a.trials.labels();
  CHECK(std::count(lab.begin(), lab.end(), Label::kTarget) == 1500);
  const SimulatedTrials b = generate_trialset(cfg, spec, 3);
  CHECK(a.store == b.store);
  CHECK(a.trials.labels() == b.trials.labels());
  for (std::size_t i = 0; i < a.trials.size(); ++i) CHECK(a.trials[i].enroll_id == b.trials[i].enroll_id);

  const ScoreSet s = score_trials(a.trials, a.store, Similarity::kCosine);
  CHECK(eer(s.raw(), lab) < 0.5);

  double ss = 0, ll = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    if (lab[i] == Label::kTarget) ss += s.rows[i].raw;
    if (lab[2000 + i] == Label::kTarget) ll += s.rows[2000 + i].raw;
  }
  CHECK(ll > ss);
}

TEST_CASE("frame corpus file round trip") {
  FrameCorpusConfig fc;
  fc.n_speakers = 3;
  fc.utterances_per_speaker = 2;
  fc.frame_dim = 4;
  fc.min_frames = 5;
  fc.max_frames = 9;
  const FrameCorpus c = generate_frame_corpus(fc);
  std::ostringstream out;
  write_frame_corpus(c, out);
  std::istringstream in(out.str());
  const FrameCorpus back = read_frame_corpus(in);
  std::ostringstream again;
  write_frame_corpus(back, again);
  CHECK(out.str() == again.str());
  CHECK(back.utterances.size() == 6);
  const auto [first, second] = c.split_speakers(2);
  CHECK(first.speaker_ids.size() == 2);
  CHECK(second.speaker_ids.size() == 1);
  CHECK(second.utterances.front().speaker == 0);
}

TEST_CASE("balanced random trials") {
  SimConfig cfg;
  cfg.n_speakers = 10;
  const EmbeddingStore store = generate_store(cfg);
  const TrialList t = random_balanced_trials(store, 100, 4);
  CHECK(t.size() == 100);
  for (const Trial &tr : t) {
    const bool same = store.at(tr.enroll_id).speaker_id == store.at(tr.test_id).speaker_id;
    CHECK(same == (tr.label == Label::kTarget));
    CHECK(tr.enroll_id != tr.test_id);
  }
}

TEST_CASE("derived seeds differ") {
  CHECK(derive_seed(7, 0) != derive_seed(7, 1));
  CHECK(derive_seed(7, 0) != derive_seed(8, 0));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

}
