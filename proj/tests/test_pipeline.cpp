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

#include <fstream>
#include <sstream>

#include "svcal/error.hpp"
#include "svcal/parallel.hpp"
#include "svcal/pipeline.hpp"
#include "test_util.hpp"

using namespace svcal;

namespace {

SimulatedDataset small_dataset(std::uint64_t seed) {
  SimConfig sim;
  sim.n_speakers = 60;
  sim.seed = seed;
  DatasetOptions opts;
  opts.trials_per_type = 200;
  opts.cohort_speakers = 120;
  return simulate_dataset(sim, opts);
}

std::string report_text(const PipelineConfig &cfg) {
  std::ostringstream out;
  write_report_text(run_pipeline(cfg), out);
  return out.str();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("in-memory run reports three stages") {
  PipelineConfig cfg;
  cfg.embeddings = cfg.trials = cfg.cohort = "unused";
  const PipelineReport r = run_pipeline(cfg, to_inputs(small_dataset(7)));
  REQUIRE(r.stages.size() == 3);
  CHECK(r.stages[0].stage == "raw");
  CHECK(r.stages[1].stage == "normalized");
  CHECK(r.stages[2].stage == "calibrated");
  CHECK(r.stages[2].min_dcf.size() == 2);
  CHECK(r.stages[2].eer == r.stages[1].eer);
  CHECK(r.stages[2].cllr < 1.0);
  const nlohmann::json j = to_json(r);
  CHECK(j["stages"].size() == 3);
  CHECK(j["calibration_model"]["w_s"].get<double>() > 0);
}

TEST_CASE("files on disk, determinism and provenance") {
  const auto dir = svcal::testing::scratch_dir("pipeline");
  PipelineConfig defaults;
  write_simulated_dataset(small_dataset(11), defaults, dir.string());
  const std::string path = (dir / "pipeline.json").string();
  PipelineConfig cfg = load_pipeline_config(path);
  cfg.qmf.enabled = {QmfKind::kDuration, QmfKind::kImposterMean};

  const std::string a = report_text(cfg);
  const std::string b = report_text(cfg);
  CHECK(a == b);
  CHECK(a.find(std::string(kToolVersion)) != std::string::npos);
  CHECK(a.find("config_hash") != std::string::npos);
  CHECK(a.find("calibrated") != std::string::npos);

  const std::string h = config_hash(to_json(cfg));
  CHECK(h.size() == 16);
  PipelineConfig copy = cfg;
  CHECK(config_hash(to_json(copy)) == h);
  PipelineConfig reseeded = cfg;
  reseeded.seed = cfg.seed + 1;
  CHECK(config_hash(to_json(reseeded)) != h);
}

TEST_CASE("configuration errors") {
  nlohmann::json j = {{"trials", "t.txt"}, {"cohort", "c.txt"}};
  CHECK_THROWS_AS(pipeline_config_from_json(j), ConfigError);
  j["embeddings"] = "e.txt";
  CHECK_NOTHROW(pipeline_config_from_json(j));
  j["snorm"] = {{"top_n", 1}};
  CHECK_THROWS_AS(pipeline_config_from_json(j), ConfigError);
  CHECK_THROWS_AS(load_pipeline_config("/nonexistent/pipeline.json"), ConfigError);
}

TEST_CASE("stage errors name the stage") {
  PipelineConfig cfg;
  cfg.embeddings = "/nonexistent/e.txt";
  cfg.trials = "/nonexistent/t.txt";
  cfg.cohort = "/nonexistent/c.txt";
  try {
    run_pipeline(cfg);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("load") != std::string::npos);
  }
  const PipelineInputs in = to_inputs(small_dataset(3));
  cfg.embeddings = cfg.trials = cfg.cohort = "unused";
  cfg.snorm.cohort_top_n = 500;
  try {
    run_pipeline(cfg, in);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("snorm") != std::string::npos);
  }
}

}

TEST_SUITE("pipeline") {

TEST_CASE("results do not depend on the worker count") {
  PipelineConfig cfg;
  cfg.embeddings = cfg.trials = cfg.cohort = "unused";
  cfg.qmf.enabled = {QmfKind::kDuration, QmfKind::kImposterMean};
  std::vector<std::string> reports;
  for (std::size_t threads : {1, 4}) {
    set_thread_count(threads);
    std::ostringstream out;
    const PipelineReport r = run_pipeline(cfg, to_inputs(small_dataset(5)));
    out << to_json(r).dump();
    reports.push_back(out.str());
  }
  set_thread_count(1);
  CHECK(reports[0] == reports[1]);
}

}
