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

// svcal: command-line front end for the speaker-verification back end.

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "svcal/calibration.hpp"
#include "svcal/core_io.hpp"
#include "svcal/error.hpp"
#include "svcal/margin_train.hpp"
#include "svcal/metrics.hpp"
#include "svcal/parallel.hpp"
#include "svcal/pipeline.hpp"
#include "svcal/quality.hpp"
#include "svcal/scoring.hpp"
#include "svcal/simulator.hpp"

namespace {

using namespace svcal;

struct Globals {
  std::uint64_t seed = 7;
  bool seed_given = false;
  std::size_t threads = 1;
  std::string report_json;
};

void write_scores_out(const ScoreSet &scores, const TrialList &trials, const std::string &path) {
  if (path.empty() || path == "-") {
    write_scores(scores, trials, std::cout);
  } else {
    save_scores(scores, trials, path);
  }
}

void write_report(const Globals &g, const nlohmann::json &j) {
  if (g.report_json.empty()) return;
  std::ofstream out(g.report_json, std::ios::trunc);
  if (!out) throw Error("cannot write report '" + g.report_json + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json header(const Globals &g, const std::string &command) {
  return {{"version", std::string(kToolVersion)}, {"command", command}, {"seed", g.seed}};
}

std::vector<double> parse_weight_list(const std::string &csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto v = parse_real(tok);
    if (!v) throw ConfigError("bad weight '" + tok + "'");
    out.push_back(*v);
  }
  return out;
}

std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Speaker verification scoring, normalization, calibration and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto *seed_opt = app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_option("--report-json", g.report_json, "Write a machine-readable report here");
  std::function<void()> action;

  // score
  struct {
    std::string embeddings, trials, scorer = "cosine", out;
  } sc;
  auto *score = app.add_subcommand("score", "Score trials from embeddings");
  score->add_option("--embeddings", sc.embeddings)->required();
  score->add_option("--trials", sc.trials)->required();
  score->add_option("--scorer", sc.scorer)->check(CLI::IsMember({"cosine", "inner"}));
  score->add_option("-o,--output", sc.out);
  score->callback([&] {
    action = [&] {
      const EmbeddingStore store = load_embeddings(sc.embeddings);
      const TrialList trials = load_trials(sc.trials);
      const ScoreSet scores = score_trials(trials, store, parse_similarity(sc.scorer));
      write_scores_out(scores, trials, sc.out);
      nlohmann::json j = header(g, "score");
      j["n_trials"] = trials.size();
      write_report(g, j);
    };
  });

  // snorm
  struct {
    std::string embeddings, scores, cohort, rank_sim = "cosine", scorer = "cosine", out;
    std::size_t top_n = 100;
  } sn;
  auto *snorm = app.add_subcommand("snorm", "Adaptive s-norm of raw scores");
  snorm->add_option("--embeddings", sn.embeddings)->required();
  snorm->add_option("--scores", sn.scores)->required();
  snorm->add_option("--cohort", sn.cohort, "Embedding file of cohort utterances")->required();
  snorm->add_option("--top-n", sn.top_n);
  snorm->add_option("--rank-sim", sn.rank_sim)->check(CLI::IsMember({"cosine", "inner"}));
  snorm->add_option("--scorer", sn.scorer)->check(CLI::IsMember({"cosine", "inner"}));
  snorm->add_option("-o,--output", sn.out);
  snorm->callback([&] {
    action = [&] {
      const EmbeddingStore store = load_embeddings(sn.embeddings);
      const ScoredTrials in = load_scores(sn.scores);
      const Cohort cohort = build_cohort(load_embeddings(sn.cohort));
      SnormConfig cfg;
      cfg.cohort_top_n = sn.top_n;
      cfg.rank_similarity = parse_similarity(sn.rank_sim);
      const ScoreSet out = adaptive_snorm(in.trials, in.scores, store, cohort, cfg, parse_similarity(sn.scorer));
      write_scores_out(out, in.trials, sn.out);
      nlohmann::json j = header(g, "snorm");
      j["n_trials"] = in.trials.size();
      j["cohort_size"] = cohort.size();
      write_report(g, j);
    };
  });

  // qmf
  struct {
    std::string embeddings, trials, enable = "duration", combine = "min_max", cohort, energies, log_list, out;
    std::optional<std::int64_t> clip;
    std::size_t imposter_top_n = 100;
    double vad_db = 30.0;
  } qm;
  auto *qmf = app.add_subcommand("qmf", "Compute quality measure features per trial");
  qmf->add_option("--embeddings", qm.embeddings)->required();
  qmf->add_option("--trials", qm.trials)->required();
  qmf->add_option("--enable", qm.enable, "Comma-separated QMF list");
  qmf->add_option("--combine", qm.combine)->check(CLI::IsMember({"min_max", "mean", "min"}));
  qmf->add_option("--clip", qm.clip, "Clip duration QMFs at this many frames");
  qmf->add_option("--cohort", qm.cohort, "Embedding file of cohort utterances (imposter_mean)");
  qmf->add_option("--imposter-top-n", qm.imposter_top_n);
  qmf->add_option("--log", qm.log_list, "Comma-separated QMFs to log-transform");
  qmf->add_option("--frame-energies", qm.energies, "Per-utterance frame energies for speech-frame counts");
  qmf->add_option("--vad-threshold-db", qm.vad_db);
  qmf->add_option("-o,--output", qm.out);
  qmf->callback([&] {
    action = [&] {
      QmfConfig cfg;
      cfg.enabled = parse_qmf_list(qm.enable);
      cfg.combine = parse_combine_mode(qm.combine);
      cfg.duration_clip_frames = qm.clip;
      cfg.imposter_top_n = qm.imposter_top_n;
      if (!qm.log_list.empty()) cfg.log_transform = parse_qmf_list(qm.log_list);
      cfg.validate();
      EmbeddingStore store = load_embeddings(qm.embeddings);
      if (!qm.energies.empty()) store = with_vad_speech_frames(store, load_frame_energies(qm.energies), qm.vad_db);
      const TrialList trials = load_trials(qm.trials);
      std::optional<Cohort> cohort;
      if (!qm.cohort.empty()) cohort = build_cohort(load_embeddings(qm.cohort));
      QualityFeatures features{trials, assemble_quality_vectors(trials, store, cohort ? &*cohort : nullptr, cfg), cfg};
      if (qm.out.empty() || qm.out == "-") {
        write_quality_features(features, std::cout);
      } else {
        save_quality_features(features, qm.out);
      }
      nlohmann::json j = header(g, "qmf");
      j["n_trials"] = trials.size();
      j["qmf_config"] = to_json(cfg);
      write_report(g, j);
    };
  });

  // calibrate-fit
  struct {
    std::string scores, qmf, trials, out;
    double prior = 0.05, l2 = 0.0;
  } cf;
  auto *cfit = app.add_subcommand("calibrate-fit", "Fit a (quality-aware) logistic calibration model");
  cfit->add_option("--scores", cf.scores)->required();
  cfit->add_option("--qmf", cf.qmf, "QMF feature file; omit for score-only calibration");
  cfit->add_option("--labels-from-trials", cf.trials)->required();
  cfit->add_option("--prior", cf.prior);
  cfit->add_option("--l2", cf.l2);
  cfit->add_option("-o,--output", cf.out)->required();
  cfit->callback([&] {
    action = [&] {
      const ScoredTrials in = load_scores(cf.scores);
      const TrialList labeled = load_trials(cf.trials);
      require_same_pairs(in.trials, labeled);
      std::vector<QualityVector> q;
      std::optional<QmfConfig> qcfg;
      if (!cf.qmf.empty()) {
        QualityFeatures f = load_quality_features(cf.qmf);
        require_same_pairs(f.trials, labeled);
        q = std::move(f.vectors);
        qcfg = f.config;
      }
      FitOptions opts;
      opts.prior = cf.prior;
      opts.l2 = cf.l2;
      const std::vector<double> s = in.scores.best_available();
      const std::vector<Label> labels = labeled.labels();
      const CalibrationModel model = fit_calibration(s, q, labels, opts, qcfg);
      save_calibration_model(model, cf.out);
      nlohmann::json j = header(g, "calibrate-fit");
      j["model"] = to_json(model);
      j["objective"] = calibration_objective(model, s, q, labels, cf.prior);
      write_report(g, j);
    };
  });

  // calibrate-apply
  struct {
    std::string model, scores, qmf, out;
  } ca;
  auto *capply = app.add_subcommand("calibrate-apply", "Map scores to calibrated LLRs");
  capply->add_option("--model", ca.model)->required();
  capply->add_option("--scores", ca.scores)->required();
  capply->add_option("--qmf", ca.qmf);
  capply->add_option("-o,--output", ca.out);
  capply->callback([&] {
    action = [&] {
      const CalibrationModel model = load_calibration_model(ca.model);
      ScoredTrials in = load_scores(ca.scores);
      std::vector<QualityVector> q;
      if (!ca.qmf.empty()) {
        QualityFeatures f = load_quality_features(ca.qmf);
        require_same_pairs(f.trials, in.trials);
        q = std::move(f.vectors);
      }
      const std::vector<double> llr = apply_calibration(model, in.scores.best_available(), q);
      for (std::size_t i = 0; i < llr.size(); ++i) in.scores.rows[i].llr = llr[i];
      write_scores_out(in.scores, in.trials, ca.out);
      nlohmann::json j = header(g, "calibrate-apply");
      j["n_trials"] = in.trials.size();
      write_report(g, j);
    };
  });

  // fuse
  struct {
    std::vector<std::string> inputs;
    std::string weights, fit_trials, out;
    double prior = 0.05;
  } fu;
  auto *fuse_cmd = app.add_subcommand("fuse", "Linear fusion of several systems' LLRs");
  fuse_cmd->add_option("inputs", fu.inputs, "Score files, one per system")->required();
  auto *wopt = fuse_cmd->add_option("--weights", fu.weights, "Comma-separated non-negative weights summing to 1");
  auto *fopt = fuse_cmd->add_option("--fit-trials", fu.fit_trials, "Labeled trials to fit fusion weights on");
  wopt->excludes(fopt);
  fuse_cmd->add_option("--prior", fu.prior);
  fuse_cmd->add_option("-o,--output", fu.out);
  fuse_cmd->callback([&] {
    action = [&] {
      std::vector<ScoredTrials> systems;
      for (const std::string &path : fu.inputs) systems.push_back(load_scores(path));
      std::vector<std::vector<double>> llrs;
      for (const ScoredTrials &s : systems) {
        require_same_pairs(systems.front().trials, s.trials);
        const bool has_llr = !s.scores.rows.empty() && s.scores.rows.front().llr.has_value();
        llrs.push_back(has_llr ? s.scores.llr() : s.scores.best_available());
      }
      nlohmann::json j = header(g, "fuse");
      std::vector<double> fused;
      if (!fu.fit_trials.empty()) {
        const TrialList labeled = load_trials(fu.fit_trials);
        require_same_pairs(systems.front().trials, labeled);
        FitOptions opts;
        opts.prior = fu.prior;
        const LinearFusion f = fit_fusion(llrs, labeled.labels(), opts);
        fused = f.apply(llrs);
        j["weights"] = f.weights;
        j["bias"] = f.bias;
      } else {
        std::vector<double> w = fu.weights.empty() ? std::vector<double>(llrs.size(), 1.0 / llrs.size())
                                                   : parse_weight_list(fu.weights);
        fused = fuse_systems(llrs, w);
        j["weights"] = w;
      }
      ScoreSet out;
      for (double v : fused) out.rows.push_back(Score{v, std::nullopt, v});
      write_scores_out(out, systems.front().trials, fu.out);
      write_report(g, j);
    };
  });

  // evaluate
  struct {
    std::string scores, trials;
    double p_target = 0.01, c_miss = 1.0, c_fa = 1.0;
    bool use_llr = false;
  } ev;
  auto *evaluate = app.add_subcommand("evaluate", "EER, MinDCF, and for LLRs ActDCF and Cllr");
  evaluate->add_option("--scores", ev.scores)->required();
  evaluate->add_option("--trials", ev.trials)->required();
  evaluate->add_option("--p-target", ev.p_target);
  evaluate->add_option("--c-miss", ev.c_miss);
  evaluate->add_option("--c-fa", ev.c_fa);
  evaluate->add_flag("--use-llr", ev.use_llr, "Evaluate the llr column and add ActDCF and Cllr");
  evaluate->callback([&] {
    action = [&] {
      const ScoredTrials in = load_scores(ev.scores);
      const TrialList labeled = load_trials(ev.trials);
      require_same_pairs(in.trials, labeled);
      const DcfParams params{ev.p_target, ev.c_miss, ev.c_fa};
      params.validate();
      const std::vector<double> s = ev.use_llr ? in.scores.llr() : in.scores.best_available();
      const std::vector<Label> labels = labeled.labels();
      const double e = eer(s, labels);
      const double md = min_dcf(s, labels, params);
      nlohmann::json j = header(g, "evaluate");
      j["eer"] = e;
      j["min_dcf"] = md;
      std::vector<std::pair<std::string, double>> cols{{"EER(%)", 100.0 * e}, {"minDCF", md}};
      if (ev.use_llr) {
        const double ad = act_dcf(s, labels, params);
        const double c = cllr(s, labels);
        cols.push_back({"actDCF", ad});
        cols.push_back({"Cllr", c});
        j["act_dcf"] = ad;
        j["cllr"] = c;
      }
      for (std::size_t k = 0; k < cols.size(); ++k) std::cout << (k ? " " : "") << std::setw(8) << cols[k].first;
      std::cout << '\n';
      for (std::size_t k = 0; k < cols.size(); ++k) std::cout << (k ? " " : "") << std::setw(8) << fixed4(cols[k].second);
      std::cout << '\n';
      write_report(g, j);
    };
  });

  // simulate
  SimConfig sim;
  DatasetOptions dsopt;
  struct {
    std::string out;
    bool no_frames = false;
    std::size_t frame_speakers = 32;
  } si;
  auto *simulate = app.add_subcommand("simulate", "Write a synthetic dataset");
  simulate->add_option("--speakers", sim.n_speakers);
  simulate->add_option("--dim", sim.dim);
  simulate->add_option("--utterances-per-speaker", sim.utterances_per_speaker);
  simulate->add_option("--noise-base", sim.noise_base);
  simulate->add_option("--exponent", sim.noise_duration_exponent);
  simulate->add_option("--long-fraction", sim.long_fraction);
  simulate->add_option("--trials-per-type", dsopt.trials_per_type);
  simulate->add_option("--cohort-speakers", dsopt.cohort_speakers);
  simulate->add_option("--frame-speakers", si.frame_speakers, "Speakers in the frame-feature corpus");
  simulate->add_flag("--no-frames", si.no_frames, "Skip the frame-feature corpus");
  simulate->add_option("-o,--output", si.out, "Output directory")->required();
  simulate->callback([&] {
    action = [&] {
      sim.seed = g.seed;
      const SimulatedDataset ds = simulate_dataset(sim, dsopt);
      PipelineConfig defaults;
      defaults.seed = g.seed;
      write_simulated_dataset(ds, defaults, si.out);
      if (!si.no_frames) {
        FrameCorpusConfig fc;
        fc.n_speakers = si.frame_speakers;
        fc.seed = derive_seed(g.seed, 505);
        save_frame_corpus(generate_frame_corpus(fc), si.out + "/frames.txt");
      }
      nlohmann::json j = header(g, "simulate");
      j["n_utterances"] = ds.store.size();
      j["n_trials"] = ds.trials.size();
      j["n_calibration_trials"] = ds.calibration_trials.size();
      j["cohort_utterances"] = ds.cohort_store.size();
      write_report(g, j);
    };
  });

  // train-toy
  struct {
    std::string plan, data, out;
  } tt;
  auto *train = app.add_subcommand("train-toy", "Train the toy extractor with AAM-softmax");
  train->add_option("--plan", tt.plan, "Training plan JSON")->required();
  train->add_option("--data", tt.data, "Frame-feature file")->required();
  train->add_option("-o,--output", tt.out, "Model directory")->required();
  train->callback([&] {
    action = [&] {
      std::ifstream in(tt.plan);
      if (!in) throw ConfigError("cannot open training plan '" + tt.plan + "'");
      nlohmann::json pj;
      try {
        pj = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception &e) {
        throw ConfigError(tt.plan + ": " + e.what());
      }
      const TrainPlan plan = train_plan_from_json(pj);
      const FrameCorpus corpus = load_frame_corpus(tt.data);
      const ToyModel model = train_toy(plan, corpus, g.seed);
      save_toy_model(model, tt.out);
      nlohmann::json j = header(g, "train-toy");
      j["iterations"] = model.log.size();
      if (!model.log.empty()) j["final_loss"] = model.log.back().loss;
      write_report(g, j);
    };
  });

  // run
  std::string config_path;
  auto *run = app.add_subcommand("run", "Score, normalize, calibrate and evaluate from a config file");
  run->add_option("--config", config_path)->required();
  run->callback([&] {
    action = [&] {
      PipelineConfig cfg = load_pipeline_config(config_path);
      if (g.seed_given) cfg.seed = g.seed;
      const PipelineReport report = run_pipeline(cfg);
      write_report_text(report, std::cout);
      write_report(g, to_json(report));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }
  try {
    g.seed_given = seed_opt->count() > 0;
    set_thread_count(g.threads);
    if (action) action();
  } catch (const std::exception &e) {
    std::cerr << "svcal: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
