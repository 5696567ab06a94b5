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
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "svcal/core_io.hpp"
#include "svcal/error.hpp"
#include "test_util.hpp"

using namespace svcal;
using svcal::testing::make_embedding;

TEST_SUITE("core_io") {

TEST_CASE("embedding file with two records") {
  std::istringstream in("a spk1 100 80 3 1 2 3\n# comment\n\nb - 200 - 3 4 5 6\n");
  const EmbeddingStore store = read_embeddings(in);
  CHECK(store.size() == 2);
  CHECK(store.dim() == 3);
  CHECK(*store.at("a").speaker_id == "spk1");
  CHECK(*store.at("a").n_speech_frames == 80);
  CHECK_FALSE(store.at("b").speaker_id.has_value());
  CHECK_FALSE(store.at("b").n_speech_frames.has_value());
  CHECK(store.at("b").vector == std::vector<double>{4, 5, 6});
  CHECK(store.find("zz") == nullptr);
  CHECK_THROWS_AS(store.at("zz"), DataError);
}

TEST_CASE("embedding file errors") {
  SUBCASE("duplicate id") {
    std::istringstream in("a - 1 - 2 1 2\na - 1 - 2 3 4\n");
    CHECK_THROWS_AS(read_embeddings(in), DataError);
  }
  SUBCASE("nan value") {
    std::istringstream in("a - 1 - 2 1 nan\n");
    CHECK_THROWS(read_embeddings(in));
  }
  SUBCASE("dimension mismatch") {
    std::istringstream in("a - 1 - 2 1 2\nb - 1 - 3 3 4 5\n");
    CHECK_THROWS(read_embeddings(in));
  }
  SUBCASE("bad frame count carries the line") {
    std::istringstream in("a - 1 - 2 1 2\nb - x - 2 3 4\n");
    try {
      read_embeddings(in, "emb.txt");
      FAIL("expected a parse error");
    } catch (const ParseError &e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("emb.txt") != std::string::npos);
    }
  }
  SUBCASE("declared dimension disagrees") {
    std::istringstream in("a - 1 - 3 1 2\n");
    CHECK_THROWS_AS(read_embeddings(in), ParseError);
  }
  SUBCASE("speech frames above frames") {
    std::istringstream in("a - 10 11 2 1 2\n");
    CHECK_THROWS(read_embeddings(in));
  }
}

TEST_CASE("trial lists") {
  std::istringstream labeled("a b target\nc d nontarget\n");
  const TrialList t = read_trials(labeled);
  CHECK(t.size() == 2);
  CHECK(t.labeled());
  CHECK(t.labels() == std::vector<Label>{Label::kTarget, Label::kNontarget});

  std::istringstream unlabeled("a b\nc d\n");
  const TrialList u = read_trials(unlabeled);
  CHECK(u.size() == 2);
  CHECK_FALSE(u.labeled());
  CHECK_THROWS(u.labels());

  std::istringstream mixed("a b target\nc d\n");
  CHECK_THROWS_AS(read_trials(mixed), Error);

  std::istringstream bad_label("a b maybe\n");
  CHECK_THROWS_AS(read_trials(bad_label), ParseError);
}

TEST_CASE("score files") {
  const TrialList trials({{"a", "b", std::nullopt}, {"c", "d", std::nullopt}});
  SUBCASE("raw only") {
    ScoreSet s;
    s.rows = {{0.25, std::nullopt, std::nullopt}, {-1.5, std::nullopt, std::nullopt}};
    std::ostringstream out;
    write_scores(s, trials, out);
    CHECK(out.str() == "a b 0.25\nc d -1.5\n");
  }
  SUBCASE("llr column emitted") {
    ScoreSet s;
    s.rows = {{0.25, std::nullopt, 2.0}, {-1.5, 0.5, -3.0}};
    std::ostringstream out;
    write_scores(s, trials, out);
    CHECK(out.str() == "a b 0.25 - 2\nc d -1.5 0.5 -3\n");
    std::istringstream in(out.str());
    const ScoredTrials back = read_scores(in);
    CHECK(back.scores.rows[0].llr == 2.0);
    CHECK_FALSE(back.scores.rows[0].normalized.has_value());
    CHECK(back.scores.rows[1].normalized == 0.5);
  }
  SUBCASE("empty set gives an empty file") {
    auto dir = svcal::testing::scratch_dir("empty_scores");
    save_scores(ScoreSet{}, TrialList{}, (dir / "s.txt").string());
    CHECK(std::filesystem::file_size(dir / "s.txt") == 0);
    CHECK(load_scores((dir / "s.txt").string()).scores.empty());
  }
}

TEST_CASE("real formatting round-trips") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 2000) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    const auto back = parse_real(format_real(v));
    REQUIRE(back.has_value());
    CHECK(std::memcmp(&*back, &v, sizeof v) == 0);
    ++checked;
  }
  CHECK(format_real(0.96) == "0.96");
  CHECK_FALSE(parse_real("1.0x").has_value());
  CHECK_FALSE(parse_real("").has_value());
  CHECK(parse_real("+2") == 2.0);
}

TEST_CASE("frame energies") {
  auto dir = svcal::testing::scratch_dir("energies");
  std::ofstream(dir / "e.txt") << "u1 1 0.5 1e-9\nu2 0 0\n";
  const auto e = load_frame_energies((dir / "e.txt").string());
  CHECK(e.at("u1").size() == 3);
  CHECK(e.at("u2") == std::vector<double>{0, 0});
}

TEST_CASE("pair alignment check") {
  const TrialList a({{"a", "b", std::nullopt}});
  const TrialList b({{"a", "b", Label::kTarget}});
  const TrialList c({{"a", "c", Label::kTarget}});
  CHECK_NOTHROW(require_same_pairs(a, b));
  CHECK_THROWS_AS(require_same_pairs(a, c), DataError);
}

TEST_CASE("cohort validation") {
  Cohort c{{"x", "y"}, {{1.0, 0.0}, {0.0, 1.0}}};
  CHECK_NOTHROW(c.validate());
  Cohort bad{{"x"}, {{2.0, 0.0}}};
  CHECK_THROWS(bad.validate());
}

}
