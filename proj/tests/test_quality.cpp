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
#include <sstream>

#include "svcal/error.hpp"
#include "svcal/quality.hpp"
#include "svcal/scoring.hpp"
#include "test_util.hpp"

using namespace svcal;
using svcal::testing::make_embedding;

TEST_SUITE("quality") {

TEST_CASE("duration measures") {
  Embedding u = make_embedding("u", {3, 4}, 600);
  CHECK(duration_qmf(u, std::nullopt) == 600.0);
  CHECK(duration_qmf(u, 500) == 500.0);
  CHECK(duration_qmf(make_embedding("z", {1}, 0), std::nullopt) == 0.0);

  u.n_speech_frames = 480;
  CHECK(speech_duration_qmf(u, std::nullopt) == 480.0);
  CHECK(speech_duration_qmf(u, 400) == 400.0);
  u.n_speech_frames.reset();
  CHECK_THROWS_AS(speech_duration_qmf(u, std::nullopt), DataError);
}

TEST_CASE("duration measure is monotone and flat above the clip") {
  double prev = -1;
  for (std::int64_t n = 0; n < 1000; n += 37) {
    const double q = duration_qmf(make_embedding("u", {1}, n), 500);
    CHECK(q >= prev);
    if (n >= 500) CHECK(q == 500.0);
    prev = q;
  }
}

TEST_CASE("energy VAD") {
  CHECK(energy_vad(std::vector<double>{2, 2, 2, 2}, 10.0) == 4);
  CHECK(energy_vad(std::vector<double>{1.0, 1e-9}, 30.0) == 1);
  CHECK(energy_vad(std::vector<double>{0, 0, 0}, 30.0) == 0);
  CHECK(energy_vad(std::vector<double>{1.0, 1e-3}, 30.0) == 2);
}

TEST_CASE("VAD fills speech frame counts") {
  const EmbeddingStore s({make_embedding("a", {1, 0}, 3), make_embedding("b", {0, 1}, 2)});
  const std::unordered_map<std::string, std::vector<double>> e{{"a", {1, 1, 1e-9}}, {"b", {5, 5}}};
  const EmbeddingStore out = with_vad_speech_frames(s, e, 30.0);
  CHECK(*out.at("a").n_speech_frames == 2);
  CHECK(*out.at("b").n_speech_frames == 2);
  const std::unordered_map<std::string, std::vector<double>> partial{{"a", {1, 1, 1}}};
  CHECK_FALSE(with_vad_speech_frames(s, partial, 30.0).at("b").n_speech_frames.has_value());
}

TEST_CASE("magnitude") {
  CHECK(magnitude_qmf(make_embedding("u", {3, 4})) == 5.0);
  CHECK(magnitude_qmf(make_embedding("u", {0, 0})) == 0.0);
  CHECK(magnitude_qmf(make_embedding("u", {0, 1})) == 1.0);
}

TEST_CASE("imposter mean") {
  const Cohort c{{"a", "b"}, {{1, 0}, {0, 1}}};
  CHECK(imposter_mean_qmf(make_embedding("u", {1, 0}), c, 1) == 1.0);
  CHECK(imposter_mean_qmf(make_embedding("u", {1, 0}), c, 2) == 0.5);
  const Cohort self{{"a"}, {{0.6, 0.8}}};
  CHECK(imposter_mean_qmf(make_embedding("u", {3, 4}), self, 1) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK_THROWS(imposter_mean_qmf(make_embedding("u", {1, 0}), c, 3));
}

TEST_CASE("symmetric combination") {
  CHECK(symmetric_combine(3, 7, CombineMode::kMinMax) == std::vector<double>{3, 7});
  CHECK(symmetric_combine(7, 3, CombineMode::kMinMax) == std::vector<double>{3, 7});
  CHECK(symmetric_combine(3, 7, CombineMode::kMean) == std::vector<double>{5});
  CHECK(symmetric_combine(7, 3, CombineMode::kMin) == std::vector<double>{3});
}

TEST_CASE("quality vector assembly") {
  Embedding e = make_embedding("e", {3, 4}, 200);
  Embedding t = make_embedding("t", {1, 0}, 600);
  const EmbeddingStore store({e, t});
  const Trial trial{"e", "t", std::nullopt};
  QmfConfig cfg;
  cfg.enabled = {QmfKind::kDuration};
  CHECK(assemble_quality_vector(trial, store, nullptr, cfg).values == std::vector<double>{200, 600});

  cfg.enabled = {QmfKind::kMagnitude, QmfKind::kDuration};
  CHECK(cfg.feature_names() ==
        std::vector<std::string>{"duration.min", "duration.max", "magnitude.min", "magnitude.max"});
  CHECK(assemble_quality_vector(trial, store, nullptr, cfg).values == std::vector<double>{200, 600, 1, 5});

  cfg.enabled = {QmfKind::kImposterMean};
  CHECK_THROWS(assemble_quality_vector(trial, store, nullptr, cfg));

  cfg.enabled.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("log transform") {
  const EmbeddingStore store({make_embedding("e", {1, 0}, 100), make_embedding("t", {1, 0}, 0)});
  QmfConfig cfg;
  cfg.enabled = {QmfKind::kDuration};
  cfg.log_transform = {QmfKind::kDuration};
  const Trial ok{"e", "e", std::nullopt};
  CHECK(assemble_quality_vector(ok, store, nullptr, cfg).values[0] == doctest::Approx(std::log(100.0)));
  CHECK_THROWS_AS(assemble_quality_vector(Trial{"e", "t", std::nullopt}, store, nullptr, cfg), DataError);
}

TEST_CASE("configuration json and feature file") {
  QmfConfig cfg;
  cfg.enabled = {QmfKind::kDuration, QmfKind::kImposterMean};
  cfg.duration_clip_frames = 2000;
  cfg.imposter_top_n = 50;
  CHECK(qmf_config_from_json(to_json(cfg)) == cfg);
  CHECK(parse_qmf_list("imposter_mean,duration") == cfg.enabled);
  CHECK_THROWS(parse_qmf_list("duration,loudness"));

  QualityFeatures f{TrialList({{"a", "b", std::nullopt}, {"c", "d", std::nullopt}}),
                    {QualityVector{{1, 2, 0.1, 0.3}}, QualityVector{{3, 4, -0.5, 1e-17}}},
                    cfg};
  std::ostringstream out;
  write_quality_features(f, out);
  std::istringstream in(out.str());
  const QualityFeatures back = read_quality_features(in);
  CHECK(back.config == cfg);
  CHECK(back.vectors[1].values == f.vectors[1].values);

  std::istringstream ragged("a b 1 2\nc d 1\n");
  CHECK_THROWS(read_quality_features(ragged));
}

}
