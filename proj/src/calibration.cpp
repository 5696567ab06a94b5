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

#include "svcal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <map>
#include <set>

#include "svcal/error.hpp"

namespace svcal {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct ClassWeights {
  double target;
  double nontarget;
};

ClassWeights class_weights(std::span<const Label> labels, double prior) {
  std::size_t nt = 0;
  for (Label l : labels) nt += l == Label::kTarget;
  const std::size_t nn = labels.size() - nt;
  if (nt == 0 || nn == 0) throw DataError("calibration needs both target and nontarget trials");
  return {prior / static_cast<double>(nt), (1.0 - prior) / static_cast<double>(nn)};
}

void check_prior(double prior) {
  if (!(prior > 0.0 && prior < 1.0)) throw ConfigError("prior must lie in (0, 1)");
}

}  // namespace

// ---------------------------------------------------------------------------

double CalibrationModel::apply(double s, const QualityVector &q) const {
  if (q.size() != w_q.size()) {
    throw DataError("quality vector has " + std::to_string(q.size()) + " features, model expects " +
                    std::to_string(w_q.size()));
  }
  double l = w_s * s + b;
  for (std::size_t k = 0; k < w_q.size(); ++k) l += w_q[k] * q.values[k];
  return l;
}

void CalibrationModel::validate() const {
  if (!std::isfinite(w_s) || !std::isfinite(b)) throw DataError("calibration model has non-finite parameters");
  for (double w : w_q) {
    if (!std::isfinite(w)) throw DataError("calibration model has non-finite parameters");
  }
  const std::size_t k = qmf_config ? qmf_config->feature_count() : 0;
  if (k != w_q.size()) {
    throw DataError("calibration model has " + std::to_string(w_q.size()) + " QMF weights but its configuration defines " +
                    std::to_string(k) + " features");
  }
  check_prior(effective_prior);
}

nlohmann::json to_json(const CalibrationModel &model) {
  nlohmann::json j;
  j["w_s"] = model.w_s;
  j["w_q"] = model.w_q;
  j["b"] = model.b;
  j["qmf_config"] = model.qmf_config ? to_json(*model.qmf_config) : nlohmann::json();
  j["effective_prior"] = model.effective_prior;
  j["snorm_stddev"] = "population";
  return j;
}

CalibrationModel calibration_model_from_json(const nlohmann::json &j) {
  CalibrationModel m;
  try {
    m.w_s = j.at("w_s").get<double>();
    m.w_q = j.at("w_q").get<std::vector<double>>();
    m.b = j.at("b").get<double>();
    if (j.contains("qmf_config") && !j["qmf_config"].is_null()) m.qmf_config = qmf_config_from_json(j["qmf_config"]);
    if (j.contains("effective_prior")) m.effective_prior = j["effective_prior"].get<double>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed calibration model: ") + e.what());
  }
  m.validate();
  return m;
}

void save_calibration_model(const CalibrationModel &model, const std::string &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << to_json(model).dump(2) << '\n';
  out.flush();
  if (!out) throw Error("write failure on '" + path + "'");
}

CalibrationModel load_calibration_model(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(path + ": " + e.what());
  }
  return calibration_model_from_json(j);
}

// ---------------------------------------------------------------------------

double logistic_objective(const Eigen::MatrixXd &features, std::span<const Label> labels, std::span<const double> weights,
                          double bias, double prior, double l2) {
  check_prior(prior);
  if (static_cast<std::size_t>(features.rows()) != labels.size()) throw DataError("features and labels differ in length");
  if (static_cast<std::size_t>(features.cols()) != weights.size()) throw DataError("weight vector has the wrong length");
  const ClassWeights cw = class_weights(labels, prior);
  const double offset = std::log(prior / (1.0 - prior));
  double f = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    double z = bias + offset;
    for (Eigen::Index k = 0; k < features.cols(); ++k) z += weights[k] * features(i, k);
    f += labels[i] == Label::kTarget ? cw.target * softplus(-z) : cw.nontarget * softplus(z);
  }
  double pen = 0.0;
  for (double w : weights) pen += w * w;
  return f + 0.5 * l2 * pen;
}

LogisticFit fit_logistic(const Eigen::MatrixXd &features, std::span<const Label> labels, const FitOptions &opts) {
  check_prior(opts.prior);
  const Eigen::Index n = features.rows();
  const Eigen::Index k = features.cols();
  if (static_cast<std::size_t>(n) != labels.size()) throw DataError("features and labels differ in length");
  if (n < 2) throw DataError("calibration needs at least two trials");
  if (!features.allFinite()) throw DataError("calibration features contain non-finite values");
  if (opts.l2 < 0.0) throw ConfigError("l2 penalty must be non-negative");
  const ClassWeights cw = class_weights(labels, opts.prior);
  const double offset = std::log(opts.prior / (1.0 - opts.prior));

  // Newton runs on standardized columns and convergence is judged on the
  // gradient there, so feature units do not matter. Constant columns get weight 0,
  // their contribution being indistinguishable from the bias.
  Eigen::VectorXd mu = features.colwise().mean().transpose();
  Eigen::VectorXd sd(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    sd(c) = std::sqrt((features.col(c).array() - mu(c)).square().mean());
  }
  Eigen::MatrixXd x(n, k + 1);
  for (Eigen::Index c = 0; c < k; ++c) {
    if (sd(c) > 0.0) {
      x.col(c) = (features.col(c).array() - mu(c)) / sd(c);
    } else {
      x.col(c).setZero();
    }
  }
  x.col(k).setOnes();

  Eigen::VectorXd y(n), wt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool tar = labels[i] == Label::kTarget;
    y(i) = tar ? 1.0 : 0.0;
    wt(i) = tar ? cw.target : cw.nontarget;
  }
  // Penalty 0.5 l2 sum (theta_s/sd)^2 in standardized coordinates.
  Eigen::VectorXd pen = Eigen::VectorXd::Zero(k + 1);
  for (Eigen::Index c = 0; c < k; ++c) {
    if (sd(c) > 0.0) pen(c) = opts.l2 / (sd(c) * sd(c));
  }

  auto to_original = [&](const Eigen::VectorXd &theta, Eigen::VectorXd &w, double &b) {
    w.resize(k);
    b = theta(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      w(c) = sd(c) > 0.0 ? theta(c) / sd(c) : 0.0;
      b -= w(c) * mu(c);
    }
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(k + 1);
  if (opts.init) {
    if (opts.init->size() != static_cast<std::size_t>(k + 1)) throw ConfigError("initial point has the wrong length");
    theta(k) = (*opts.init)[k];
    for (Eigen::Index c = 0; c < k; ++c) {
      theta(c) = (*opts.init)[c] * sd(c);
      theta(k) += (*opts.init)[c] * mu(c);
    }
  }

  auto objective = [&](const Eigen::VectorXd &t) {
    const Eigen::VectorXd z = (x * t).array() + offset;
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) f += wt(i) * (y(i) > 0.5 ? softplus(-z(i)) : softplus(z(i)));
    return f + 0.5 * (pen.array() * t.array().square()).sum();
  };

  LogisticFit fit;
  double f = objective(theta);
  Eigen::VectorXd w_orig;
  double b_orig = 0.0;
  for (int iter = 0;; ++iter) {
    const Eigen::VectorXd z = (x * theta).array() + offset;
    Eigen::VectorXd p(n), resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(z(i));
      resid(i) = wt(i) * (p(i) - y(i));
    }
    const Eigen::VectorXd g = x.transpose() * resid + (pen.array() * theta.array()).matrix();
    fit.gradient_norm = g.norm();
    fit.iterations = iter;
    if (fit.gradient_norm <= opts.gradient_tolerance) break;
    if (iter >= opts.max_iterations) {
      throw ConvergenceError("calibration did not converge in " + std::to_string(opts.max_iterations) +
                             " iterations (gradient norm " + format_real(fit.gradient_norm) + ")");
    }

    const Eigen::VectorXd h = (wt.array() * p.array() * (1.0 - p.array())).matrix();
    Eigen::MatrixXd hess = x.transpose() * h.asDiagonal() * x;
    hess.diagonal() += pen;
    const Eigen::VectorXd step = -hess.completeOrthogonalDecomposition().solve(g);

    double t = 1.0;
    const double slope = g.dot(step);
    Eigen::VectorXd next = theta + step;
    double f_next = objective(next);
    while (!(f_next <= f + 1e-4 * t * slope) && t > 1e-10) {
      t *= 0.5;
      next = theta + t * step;
      f_next = objective(next);
    }
    if (!(f_next <= f) || next == theta) {
      // No representable decrease left: the predicted gain is at rounding level.
      if (-slope <= 1e-12 * (1.0 + std::abs(f))) break;
      throw ConvergenceError("calibration stalled at iteration " + std::to_string(iter) + " (gradient norm " +
                             format_real(fit.gradient_norm) + ")");
    }
    theta = next;
    f = f_next;
  }
  to_original(theta, w_orig, b_orig);
  fit.weights.assign(w_orig.data(), w_orig.data() + k);
  fit.bias = b_orig;
  fit.objective = logistic_objective(features, labels, fit.weights, fit.bias, opts.prior, opts.l2);
  return fit;
}

namespace {

Eigen::MatrixXd calibration_features(std::span<const double> scores, std::span<const QualityVector> q) {
  if (!q.empty() && q.size() != scores.size()) throw DataError("quality vectors are not aligned with the scores");
  const std::size_t k = q.empty() ? 0 : q.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(scores.size()), static_cast<Eigen::Index>(k + 1));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    x(i, 0) = scores[i];
    if (q.empty()) continue;
    if (q[i].size() != k) throw DataError("quality vectors differ in length");
    for (std::size_t c = 0; c < k; ++c) x(i, c + 1) = q[i].values[c];
  }
  return x;
}

}  // namespace

CalibrationModel fit_calibration(std::span<const double> scores, std::span<const QualityVector> q,
                                 std::span<const Label> labels, const FitOptions &opts,
                                 std::optional<QmfConfig> qmf_config) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  const Eigen::MatrixXd x = calibration_features(scores, q);
  const std::size_t k = static_cast<std::size_t>(x.cols()) - 1;
  if (qmf_config && qmf_config->feature_count() != k) {
    throw ConfigError("QMF configuration defines " + std::to_string(qmf_config->feature_count()) +
                      " features but the quality vectors have " + std::to_string(k));
  }
  if (!qmf_config && k > 0) {
    throw ConfigError("quality vectors supplied without a QMF configuration");
  }
  const LogisticFit fit = fit_logistic(x, labels, opts);
  CalibrationModel model;
  model.w_s = fit.weights[0];
  model.w_q.assign(fit.weights.begin() + 1, fit.weights.end());
  model.b = fit.bias;
  model.qmf_config = std::move(qmf_config);
  model.effective_prior = opts.prior;
  return model;
}

double calibration_objective(const CalibrationModel &model, std::span<const double> scores,
                             std::span<const QualityVector> q, std::span<const Label> labels, double prior) {
  const Eigen::MatrixXd x = calibration_features(scores, q);
  std::vector<double> w{model.w_s};
  w.insert(w.end(), model.w_q.begin(), model.w_q.end());
  return logistic_objective(x, labels, w, model.b, prior);
}

std::vector<double> apply_calibration(const CalibrationModel &model, std::span<const double> scores,
                                      std::span<const QualityVector> q) {
  if (!q.empty() && q.size() != scores.size()) throw DataError("quality vectors are not aligned with the scores");
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = q.empty() ? model.apply(scores[i]) : model.apply(scores[i], q[i]);
  return out;
}

// ---------------------------------------------------------------------------

DurationClass classify_duration(std::int64_t n_frames, const CalibrationTrialSpec &spec) {
  const double secs = static_cast<double>(n_frames) / spec.frames_per_second;
  if (secs >= spec.short_min_s && secs < spec.boundary_s) return DurationClass::kShort;
  if (secs >= spec.boundary_s && secs <= spec.long_max_s) return DurationClass::kLong;
  return DurationClass::kOutside;
}

namespace {

struct Pools {
  // per speaker, utterance indices by duration class
  std::vector<std::vector<std::size_t>> by_class[2];
  std::vector<std::size_t> all[2];
  std::vector<std::size_t> speaker_of;  // per store index
};

std::string_view type_name(int a, int b) {
  if (a == 0 && b == 0) return "short-short";
  if (a == 0) return "short-long";
  return "long-long";
}

void sample_block(const EmbeddingStore &store, const Pools &pools, int a, int b, std::size_t count, std::mt19937_64 &rng,
                  std::vector<Trial> &out) {
  const std::size_t n_target = count / 2;
  const std::size_t n_nontarget = count - n_target;
  const std::size_t n_spk = pools.by_class[0].size();

  // Capacity checks before sampling so that an impossible request fails fast.
  std::vector<std::size_t> eligible;
  double target_capacity = 0.0;
  for (std::size_t s = 0; s < n_spk; ++s) {
    const double na = static_cast<double>(pools.by_class[a][s].size());
    const double nb = static_cast<double>(pools.by_class[b][s].size());
    const double pairs = a == b ? na * (na - 1.0) / 2.0 : na * nb;
    if (pairs > 0.0) eligible.push_back(s);
    target_capacity += pairs;
  }
  double same_speaker = 0.0;
  for (std::size_t s = 0; s < n_spk; ++s) {
    same_speaker += static_cast<double>(pools.by_class[a][s].size()) * static_cast<double>(pools.by_class[b][s].size());
  }
  double nontarget_capacity =
      static_cast<double>(pools.all[a].size()) * static_cast<double>(pools.all[b].size()) - same_speaker;
  if (a == b) nontarget_capacity /= 2.0;
  const std::string name(type_name(a, b));
  if (target_capacity < static_cast<double>(n_target) || nontarget_capacity < static_cast<double>(n_nontarget)) {
    throw DataError("insufficient utterances for " + std::to_string(count) + " " + name + " calibration trials");
  }

  auto key = [](std::size_t x, std::size_t y) { return std::make_pair(std::min(x, y), std::max(x, y)); };
  std::set<std::pair<std::size_t, std::size_t>> used;
  const std::size_t max_attempts = 1000 * count + 10000;
  std::vector<Trial> block;
  block.reserve(count);
  auto pick = [&](const std::vector<std::size_t> &v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  std::size_t attempts = 0;
  while (block.size() < n_target) {
    if (++attempts > max_attempts) throw DataError("could not draw enough distinct " + name + " target trials");
    const std::size_t s = pick(eligible);
    const std::size_t e = pick(pools.by_class[a][s]);
    const std::size_t t = pick(pools.by_class[b][s]);
    if (e == t || !used.insert(key(e, t)).second) continue;
    block.push_back(Trial{store[e].utt_id, store[t].utt_id, Label::kTarget});
  }
  attempts = 0;
  while (block.size() < count) {
    if (++attempts > max_attempts) throw DataError("could not draw enough distinct " + name + " nontarget trials");
    const std::size_t e = pick(pools.all[a]);
    const std::size_t t = pick(pools.all[b]);
    if (pools.speaker_of[e] == pools.speaker_of[t] || !used.insert(key(e, t)).second) continue;
    block.push_back(Trial{store[e].utt_id, store[t].utt_id, Label::kNontarget});
  }
  std::shuffle(block.begin(), block.end(), rng);
  out.insert(out.end(), block.begin(), block.end());
}

}  // namespace

TrialList build_calibration_trials(const EmbeddingStore &store, const CalibrationTrialSpec &spec, std::uint64_t seed) {
  if (spec.trials_per_type == 0) throw ConfigError("trials_per_type must be positive");
  if (!(spec.short_min_s < spec.boundary_s && spec.boundary_s <= spec.long_max_s)) {
    throw ConfigError("calibration duration ranges are inconsistent");
  }
  std::map<std::string, std::size_t> speaker_index;
  for (const Embedding &e : store) {
    if (!e.speaker_id) throw DataError("utterance '" + e.utt_id + "' has no speaker id");
    speaker_index.emplace(*e.speaker_id, 0);
  }
  std::size_t next = 0;
  for (auto &[spk, idx] : speaker_index) idx = next++;

  Pools pools;
  for (auto &v : pools.by_class) v.resize(speaker_index.size());
  pools.speaker_of.resize(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::size_t s = speaker_index.at(*store[i].speaker_id);
    pools.speaker_of[i] = s;
    const DurationClass c = classify_duration(store[i].n_frames, spec);
    if (c == DurationClass::kOutside) continue;
    const int ci = c == DurationClass::kShort ? 0 : 1;
    pools.by_class[ci][s].push_back(i);
    pools.all[ci].push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<Trial> trials;
  trials.reserve(3 * spec.trials_per_type);
  sample_block(store, pools, 0, 0, spec.trials_per_type, rng, trials);
  sample_block(store, pools, 0, 1, spec.trials_per_type, rng, trials);
  sample_block(store, pools, 1, 1, spec.trials_per_type, rng, trials);
  return TrialList(std::move(trials));
}

// ---------------------------------------------------------------------------

double fuse(std::span<const double> llrs, std::span<const double> weights) {
  if (llrs.empty()) throw ConfigError("fusion needs at least one system");
  if (llrs.size() != weights.size()) throw ConfigError("fusion weights do not match the number of systems");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("fusion weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("fusion weights must sum to 1 (got " + format_real(sum) + ")");
  double acc = 0.0;
  for (std::size_t k = 0; k < llrs.size(); ++k) acc += weights[k] * llrs[k];
  return acc;
}

std::vector<double> fuse_systems(const std::vector<std::vector<double>> &system_llrs, std::span<const double> weights) {
  if (system_llrs.empty()) throw ConfigError("fusion needs at least one system");
  const std::size_t n = system_llrs.front().size();
  for (const auto &s : system_llrs) {
    if (s.size() != n) throw DataError("fused systems differ in trial count");
  }
  std::vector<double> out(n), row(system_llrs.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < system_llrs.size(); ++k) row[k] = system_llrs[k][i];
    out[i] = fuse(row, weights);
  }
  return out;
}

std::vector<double> LinearFusion::apply(const std::vector<std::vector<double>> &system_scores) const {
  if (system_scores.size() != weights.size()) throw DataError("fusion model does not match the number of systems");
  const std::size_t n = system_scores.empty() ? 0 : system_scores.front().size();
  std::vector<double> out(n, bias);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (system_scores[k].size() != n) throw DataError("fused systems differ in trial count");
    for (std::size_t i = 0; i < n; ++i) out[i] += weights[k] * system_scores[k][i];
  }
  return out;
}

LinearFusion fit_fusion(const std::vector<std::vector<double>> &system_scores, std::span<const Label> labels,
                        const FitOptions &opts) {
  if (system_scores.empty()) throw ConfigError("fusion needs at least one system");
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(system_scores.size()));
  for (std::size_t k = 0; k < system_scores.size(); ++k) {
    if (system_scores[k].size() != labels.size()) throw DataError("fused systems differ in trial count");
    for (Eigen::Index i = 0; i < n; ++i) x(i, static_cast<Eigen::Index>(k)) = system_scores[k][i];
  }
  const LogisticFit fit = fit_logistic(x, labels, opts);
  return LinearFusion{fit.weights, fit.bias};
}

}  // namespace svcal
