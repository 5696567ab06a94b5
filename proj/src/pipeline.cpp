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

#include "svcal/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "svcal/error.hpp"

namespace svcal {

namespace {

std::string resolve(const std::string &base, const std::string &path) {
  if (base.empty() || path.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base) / path).string();
}

template <typename Fn>
auto stage(const std::string &name, Fn &&fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception &e) {
    throw Error("stage '" + name + "' failed: " + e.what());
  }
}

std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

void PipelineConfig::validate() const {
  if (embeddings.empty()) throw ConfigError("pipeline configuration is missing the embeddings path");
  if (trials.empty()) throw ConfigError("pipeline configuration is missing the trials path");
  if (cohort.empty()) throw ConfigError("pipeline configuration is missing the cohort path");
  if (snorm.cohort_top_n < 2) throw ConfigError("s-norm top-n must be at least 2");
  if (!qmf.enabled.empty()) qmf.validate();
  if (dcf.empty()) throw ConfigError("pipeline needs at least one DCF operating point");
  for (const DcfParams &p : dcf) p.validate();
  if (!(prior > 0.0 && prior < 1.0)) throw ConfigError("calibration prior must lie in (0, 1)");
}

nlohmann::json to_json(const PipelineConfig &cfg) {
  nlohmann::json dcf = nlohmann::json::array();
  for (const DcfParams &p : cfg.dcf) dcf.push_back({{"p_target", p.p_target}, {"c_miss", p.c_miss}, {"c_fa", p.c_fa}});
  return {{"embeddings", cfg.embeddings},
          {"trials", cfg.trials},
          {"cohort", cfg.cohort},
          {"calibration_trials", cfg.calibration_trials ? nlohmann::json(*cfg.calibration_trials) : nlohmann::json()},
          {"scorer", std::string(to_string(cfg.scorer))},
          {"snorm",
           {{"top_n", cfg.snorm.cohort_top_n}, {"rank_similarity", std::string(to_string(cfg.snorm.rank_similarity))}}},
          {"qmf", to_json(cfg.qmf)},
          {"dcf", dcf},
          {"prior", cfg.prior},
          {"seed", cfg.seed}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json &j, const std::string &base_dir) {
  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  try {
    auto path = [&](const char *key) { return j.contains(key) && !j[key].is_null() ? j[key].get<std::string>() : ""; };
    cfg.embeddings = path("embeddings");
    cfg.trials = path("trials");
    cfg.cohort = path("cohort");
    if (!path("calibration_trials").empty()) cfg.calibration_trials = path("calibration_trials");
    if (j.contains("scorer")) cfg.scorer = parse_similarity(j["scorer"].get<std::string>());
    if (j.contains("snorm")) {
      const auto &s = j["snorm"];
      if (s.contains("top_n")) cfg.snorm.cohort_top_n = s["top_n"].get<std::size_t>();
      if (s.contains("rank_similarity")) cfg.snorm.rank_similarity = parse_similarity(s["rank_similarity"].get<std::string>());
    }
    if (j.contains("qmf")) cfg.qmf = qmf_config_from_json(j["qmf"]);
    if (j.contains("dcf")) {
      cfg.dcf.clear();
      for (const auto &d : j["dcf"]) {
        cfg.dcf.push_back({d.at("p_target").get<double>(), d.value("c_miss", 1.0), d.value("c_fa", 1.0)});
      }
    }
    if (j.contains("prior")) cfg.prior = j["prior"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed pipeline configuration: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pipeline configuration '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(path + ": " + e.what());
  }
  return pipeline_config_from_json(j, std::filesystem::path(path).parent_path().string());
}

PipelineInputs load_pipeline_inputs(const PipelineConfig &cfg) {
  cfg.validate();
  PipelineInputs in;
  stage("load", [&] {
    in.store = load_embeddings(resolve(cfg.base_dir, cfg.embeddings));
    in.trials = load_trials(resolve(cfg.base_dir, cfg.trials));
    if (cfg.calibration_trials) in.calibration_trials = load_trials(resolve(cfg.base_dir, *cfg.calibration_trials));
    in.cohort_store = load_embeddings(resolve(cfg.base_dir, cfg.cohort));
    return 0;
  });
  return in;
}

// ---------------------------------------------------------------------------

std::string config_hash(const nlohmann::json &config) {
  const std::string text = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Provenance version_and_provenance(const nlohmann::json &config,
                                  std::vector<std::pair<std::string, std::uint64_t>> seeds) {
  return Provenance{std::string(kToolVersion), config_hash(config), std::move(seeds)};
}

StageMetrics evaluate_stage(const std::string &name, std::span<const double> scores, std::span<const Label> labels,
                            const std::vector<DcfParams> &dcf) {
  StageMetrics m;
  m.stage = name;
  m.eer = eer(scores, labels);
  for (const DcfParams &p : dcf) {
    m.min_dcf.push_back(min_dcf(scores, labels, p));
    m.act_dcf.push_back(act_dcf(scores, labels, p));
  }
  m.cllr = cllr(scores, labels);
  return m;
}

namespace {

struct Scored {
  std::vector<double> normalized;
  std::vector<QualityVector> quality;
};

Scored score_and_normalize(const PipelineConfig &cfg, const TrialList &trials, const EmbeddingStore &store,
                           const Cohort &cohort, const std::string &what, std::vector<double> *raw_out) {
  Scored out;
  const ScoreSet raw = stage("score " + what, [&] { return score_trials(trials, store, cfg.scorer); });
  if (raw_out) *raw_out = raw.raw();
  const ScoreSet norm =
      stage("snorm " + what, [&] { return adaptive_snorm(trials, raw, store, cohort, cfg.snorm, cfg.scorer); });
  out.normalized = norm.normalized();
  if (!cfg.qmf.enabled.empty()) {
    out.quality = stage("qmf " + what, [&] { return assemble_quality_vectors(trials, store, &cohort, cfg.qmf); });
  }
  return out;
}

}  // namespace

PipelineReport run_pipeline(const PipelineConfig &cfg, const PipelineInputs &inputs) {
  cfg.validate();
  PipelineReport report;
  report.provenance = version_and_provenance(to_json(cfg), {{"seed", cfg.seed}});
  report.dcf = cfg.dcf;
  const std::vector<Label> labels = stage("load", [&] { return inputs.trials.labels(); });
  const Cohort cohort = stage("cohort", [&] { return build_cohort(inputs.cohort_store); });

  std::vector<double> raw;
  const Scored eval = score_and_normalize(cfg, inputs.trials, inputs.store, cohort, "evaluation", &raw);
  report.n_trials = inputs.trials.size();

  const std::optional<QmfConfig> qcfg = cfg.qmf.enabled.empty() ? std::nullopt : std::optional<QmfConfig>(cfg.qmf);
  FitOptions opts;
  opts.prior = cfg.prior;
  if (inputs.calibration_trials) {
    const Scored cal = score_and_normalize(cfg, *inputs.calibration_trials, inputs.store, cohort, "calibration", nullptr);
    const std::vector<Label> cal_labels = stage("calibrate", [&] { return inputs.calibration_trials->labels(); });
    report.model = stage("calibrate", [&] { return fit_calibration(cal.normalized, cal.quality, cal_labels, opts, qcfg); });
    report.n_calibration_trials = inputs.calibration_trials->size();
  } else {
    report.model = stage("calibrate", [&] { return fit_calibration(eval.normalized, eval.quality, labels, opts, qcfg); });
    report.n_calibration_trials = inputs.trials.size();
  }
  const std::vector<double> llr =
      stage("calibrate", [&] { return apply_calibration(report.model, eval.normalized, eval.quality); });

  stage("evaluate", [&] {
    report.stages.push_back(evaluate_stage("raw", raw, labels, cfg.dcf));
    report.stages.push_back(evaluate_stage("normalized", eval.normalized, labels, cfg.dcf));
    report.stages.push_back(evaluate_stage("calibrated", llr, labels, cfg.dcf));
    return 0;
  });
  return report;
}

PipelineReport run_pipeline(const PipelineConfig &cfg) { return run_pipeline(cfg, load_pipeline_inputs(cfg)); }

void write_report_text(const PipelineReport &report, std::ostream &out) {
  out << "# " << report.provenance.version << '\n';
  out << "# config_hash " << report.provenance.config_hash << '\n';
  for (const auto &[name, value] : report.provenance.seeds) out << "# " << name << ' ' << value << '\n';
  out << "# trials " << report.n_trials << " calibration_trials " << report.n_calibration_trials << '\n';

  std::vector<std::string> header{"stage", "EER(%)"};
  for (const DcfParams &p : report.dcf) {
    std::ostringstream tag;
    tag << "@" << format_real(p.p_target);
    header.push_back("minDCF" + tag.str());
    header.push_back("actDCF" + tag.str());
  }
  header.push_back("Cllr");
  std::vector<std::vector<std::string>> rows{header};
  for (const StageMetrics &m : report.stages) {
    std::vector<std::string> r{m.stage, fixed4(100.0 * m.eer)};
    for (std::size_t k = 0; k < m.min_dcf.size(); ++k) {
      r.push_back(fixed4(m.min_dcf[k]));
      r.push_back(fixed4(m.act_dcf[k]));
    }
    r.push_back(fixed4(m.cllr));
    rows.push_back(std::move(r));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto &r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  for (const auto &r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[c])) << r[c];
      }
    }
    out << '\n';
  }
  out << std::right;
}

nlohmann::json to_json(const PipelineReport &report) {
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto &[name, value] : report.provenance.seeds) seeds[name] = value;
  nlohmann::json stages = nlohmann::json::array();
  for (const StageMetrics &m : report.stages) {
    nlohmann::json dcf = nlohmann::json::array();
    for (std::size_t k = 0; k < m.min_dcf.size(); ++k) {
      dcf.push_back({{"p_target", report.dcf[k].p_target}, {"min_dcf", m.min_dcf[k]}, {"act_dcf", m.act_dcf[k]}});
    }
    stages.push_back({{"stage", m.stage}, {"eer", m.eer}, {"dcf", dcf}, {"cllr", m.cllr}});
  }
  return {{"version", report.provenance.version},
          {"config_hash", report.provenance.config_hash},
          {"seeds", seeds},
          {"n_trials", report.n_trials},
          {"n_calibration_trials", report.n_calibration_trials},
          {"stages", stages},
          {"calibration_model", to_json(report.model)}};
}

// ---------------------------------------------------------------------------

SimulatedDataset simulate_dataset(const SimConfig &cfg, const DatasetOptions &opts) {
  cfg.validate();
  CalibrationTrialSpec spec;
  spec.short_min_s = cfg.short_min_s;
  spec.boundary_s = cfg.short_max_s;
  spec.long_max_s = cfg.long_max_s;
  spec.frames_per_second = cfg.frames_per_second;
  spec.trials_per_type = opts.trials_per_type;

  SimConfig eval_cfg = cfg;
  eval_cfg.id_prefix = "eval";
  SimConfig cal_cfg = cfg;
  cal_cfg.id_prefix = "cal";
  cal_cfg.seed = derive_seed(cfg.seed, 101);
  SimConfig coh_cfg = cfg;
  coh_cfg.id_prefix = "coh";
  coh_cfg.seed = derive_seed(cfg.seed, 202);
  coh_cfg.n_speakers = opts.cohort_speakers;
  coh_cfg.utterances_per_speaker = opts.cohort_utterances;

  const EmbeddingStore eval_store = generate_store(eval_cfg);
  const EmbeddingStore cal_store = generate_store(cal_cfg);
  SimulatedDataset ds;
  ds.trials = build_calibration_trials(eval_store, spec, derive_seed(cfg.seed, 303));
  ds.calibration_trials = build_calibration_trials(cal_store, spec, derive_seed(cfg.seed, 404));
  std::vector<Embedding> merged = eval_store.items();
  merged.insert(merged.end(), cal_store.begin(), cal_store.end());
  ds.store = EmbeddingStore(std::move(merged));
  ds.cohort_store = generate_store(coh_cfg);
  return ds;
}

PipelineInputs to_inputs(SimulatedDataset dataset) {
  PipelineInputs in;
  in.store = std::move(dataset.store);
  in.trials = std::move(dataset.trials);
  in.calibration_trials = std::move(dataset.calibration_trials);
  in.cohort_store = std::move(dataset.cohort_store);
  return in;
}

void write_simulated_dataset(const SimulatedDataset &dataset, const PipelineConfig &defaults, const std::string &dir) {
  std::filesystem::create_directories(dir);
  save_embeddings(dataset.store, dir + "/embeddings.txt");
  save_trials(dataset.trials, dir + "/trials.txt");
  save_trials(dataset.calibration_trials, dir + "/calibration_trials.txt");
  save_embeddings(dataset.cohort_store, dir + "/cohort.txt");
  PipelineConfig cfg = defaults;
  cfg.embeddings = "embeddings.txt";
  cfg.trials = "trials.txt";
  cfg.calibration_trials = "calibration_trials.txt";
  cfg.cohort = "cohort.txt";
  std::ofstream out(dir + "/pipeline.json", std::ios::trunc);
  if (!out) throw Error("cannot write '" + dir + "/pipeline.json'");
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace svcal
