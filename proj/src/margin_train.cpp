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

#include "svcal/margin_train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "svcal/error.hpp"
#include "svcal/simulator.hpp"

namespace svcal {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Rows scaled to unit norm; throws on a zero row.
Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd &m, Eigen::VectorXd &norms, const char *what) {
  norms = m.rowwise().norm();
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!(norms(i) > 0.0) || !std::isfinite(norms(i))) {
      throw DataError(std::string("zero or non-finite ") + what + " at row " + std::to_string(i));
    }
    out.row(i) = m.row(i) / norms(i);
  }
  return out;
}

struct MarginedCosine {
  double value;
  double derivative;  // d value / d cos
};

// cos(theta + m) as a function of c = cos(theta), clamped at theta + m = pi.
MarginedCosine margined(double c, double m) {
  if (m == 0.0) return {c, 1.0};
  c = std::clamp(c, -1.0, 1.0);
  if (c < -std::cos(m)) return {-1.0, 0.0};
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double value = c * std::cos(m) - sin_theta * std::sin(m);
  const double derivative = std::cos(m) + c * std::sin(m) / std::max(sin_theta, 1e-300);
  return {value, derivative};
}

struct AamForward {
  Eigen::MatrixXd x_hat, w_hat;
  Eigen::VectorXd x_norm, w_norm;
  Eigen::MatrixXd probs;       // n x N softmax
  Eigen::VectorXd target_slope;  // d cos(theta_y + m) / d cos(theta_y)
  double loss = 0.0;
};

AamForward aam_forward(const Eigen::MatrixXd &embeddings, std::span<const int> labels, const AamHead &head) {
  head.validate();
  const Eigen::Index n = embeddings.rows();
  const auto n_cls = static_cast<int>(head.n_classes());
  if (static_cast<std::size_t>(n) != labels.size()) throw DataError("embeddings and labels differ in length");
  if (n == 0) throw DataError("empty batch");
  if (embeddings.cols() != head.prototypes.cols()) throw DataError("embedding and prototype dimensions differ");
  for (int y : labels) {
    if (y < 0 || y >= n_cls) throw DataError("label " + std::to_string(y) + " out of range");
  }
  AamForward f;
  f.x_hat = normalized_rows(embeddings, f.x_norm, "embedding");
  f.w_hat = normalized_rows(head.prototypes, f.w_norm, "prototype");
  Eigen::MatrixXd logits = head.scale * (f.x_hat * f.w_hat.transpose());
  f.target_slope.resize(n);
  f.probs.resize(n, n_cls);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    const MarginedCosine mc = margined(logits(i, y) / head.scale, head.margin);
    logits(i, y) = head.scale * mc.value;
    f.target_slope(i) = mc.derivative;
    const double top = logits.row(i).maxCoeff();
    const Eigen::ArrayXd ex = (logits.row(i).array() - top).exp();
    const double z = ex.sum();
    f.probs.row(i) = ex / z;
    total += top + std::log(z) - logits(i, y);
  }
  f.loss = total / static_cast<double>(n);
  return f;
}

}  // namespace

void AamHead::validate() const {
  if (prototypes.rows() < 2) throw ConfigError("AAM head needs at least 2 classes");
  if (!(margin >= 0.0 && margin < kPi / 2)) throw ConfigError("AAM margin must lie in [0, pi/2)");
  if (!(scale > 0.0)) throw ConfigError("AAM scale must be positive");
}

double aam_loss(const Eigen::MatrixXd &embeddings, std::span<const int> labels, const AamHead &head) {
  return aam_forward(embeddings, labels, head).loss;
}

AamGradient aam_grad(const Eigen::MatrixXd &embeddings, std::span<const int> labels, const AamHead &head) {
  const AamForward f = aam_forward(embeddings, labels, head);
  const Eigen::Index n = embeddings.rows();
  // d loss / d cos, n x N.
  Eigen::MatrixXd g = f.probs;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    g(i, y) = (g(i, y) - 1.0) * f.target_slope(i);
  }
  g *= head.scale / static_cast<double>(n);

  AamGradient out;
  out.loss = f.loss;
  const Eigen::MatrixXd gx_hat = g * f.w_hat;
  const Eigen::MatrixXd gw_hat = g.transpose() * f.x_hat;
  out.embeddings.resize(embeddings.rows(), embeddings.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double proj = f.x_hat.row(i).dot(gx_hat.row(i));
    out.embeddings.row(i) = (gx_hat.row(i) - proj * f.x_hat.row(i)) / f.x_norm(i);
  }
  out.prototypes.resize(head.prototypes.rows(), head.prototypes.cols());
  for (Eigen::Index j = 0; j < head.prototypes.rows(); ++j) {
    const double proj = f.w_hat.row(j).dot(gw_hat.row(j));
    out.prototypes.row(j) = (gw_hat.row(j) - proj * f.w_hat.row(j)) / f.w_norm(j);
  }
  return out;
}

// ---------------------------------------------------------------------------

void ClrSchedule::validate() const {
  if (!(lr_min > 0.0) || !(lr_max >= lr_min)) throw ConfigError("CLR needs 0 < lr_min <= lr_max");
  if (cycle_len == 0) throw ConfigError("CLR cycle length must be positive");
}

double clr_lr(std::uint64_t iteration, const ClrSchedule &sched) {
  sched.validate();
  const std::uint64_t cycle = iteration / sched.cycle_len;
  const double pos = static_cast<double>(iteration % sched.cycle_len) / static_cast<double>(sched.cycle_len);
  const double height = 1.0 - std::abs(2.0 * pos - 1.0);
  return sched.lr_min + (sched.lr_max - sched.lr_min) * height / std::ldexp(1.0, static_cast<int>(std::min<std::uint64_t>(cycle, 1000)));
}

Eigen::MatrixXd similarity_matrix(const AamHead &head) {
  if (head.prototypes.rows() < 2) throw ConfigError("similarity matrix needs at least 2 prototypes");
  Eigen::VectorXd norms;
  const Eigen::MatrixXd w = normalized_rows(head.prototypes, norms, "prototype");
  const Eigen::Index n = w.rows();
  Eigen::MatrixXd sim(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sim(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) sim(i, j) = sim(j, i) = w.row(i).dot(w.row(j));
  }
  return sim;
}

// ---------------------------------------------------------------------------

void HpmConfig::validate() const {
  if (speakers_per_batch == 0 || utterances_per_speaker == 0 || similar_speakers == 0) {
    throw ConfigError("HPM parameters S, U and I must be positive");
  }
}

HpmSampler::HpmSampler(HpmConfig cfg, std::vector<std::vector<std::size_t>> utterances_by_speaker)
    : cfg_(cfg), utts_(std::move(utterances_by_speaker)) {
  cfg_.validate();
  if (cfg_.similar_speakers > utts_.size()) {
    throw ConfigError("HPM similar speakers I=" + std::to_string(cfg_.similar_speakers) + " exceeds N=" +
                      std::to_string(utts_.size()));
  }
  for (std::size_t s = 0; s < utts_.size(); ++s) {
    if (utts_[s].size() < cfg_.utterances_per_speaker) {
      throw DataError("speaker " + std::to_string(s) + " has fewer than U=" +
                      std::to_string(cfg_.utterances_per_speaker) + " utterances");
    }
  }
}

void HpmSampler::refresh(const AamHead &head) {
  if (head.n_classes() != utts_.size()) throw DataError("AAM head and sampler disagree on the number of speakers");
  similarity_ = similarity_matrix(head);
  stale_ = false;
}

std::vector<std::size_t> HpmSampler::neighbours(std::size_t seed) const {
  if (similarity_.rows() == 0) throw ConfigError("HPM sampler has no similarity matrix");
  std::vector<std::size_t> order;
  order.reserve(utts_.size() - 1);
  for (std::size_t j = 0; j < utts_.size(); ++j) {
    if (j != seed) order.push_back(j);
  }
  const auto row = similarity_.row(static_cast<Eigen::Index>(seed));
  const std::size_t k = cfg_.similar_speakers - 1;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = row(static_cast<Eigen::Index>(a));
                      const double sb = row(static_cast<Eigen::Index>(b));
                      return sa != sb ? sa > sb : a < b;
                    });
  std::vector<std::size_t> out{seed};
  out.insert(out.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

std::vector<HpmBatch> HpmSampler::next_pass(std::mt19937_64 &rng) {
  if (stale_) throw ConfigError("HPM similarity matrix is stale; refresh before starting a pass");
  const std::size_t n = utts_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<HpmBatch> batches;
  const std::size_t per = cfg_.speakers_per_batch;
  for (std::size_t start = 0; start < n; start += per) {
    HpmBatch batch;
    batch.seeds.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + per)));
    std::vector<std::size_t> seeds = batch.seeds;
    if (seeds.size() < per) {
      // Pad with speakers already seeded earlier in this pass.
      std::vector<std::size_t> earlier(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(start));
      if (earlier.empty()) earlier = batch.seeds;
      while (seeds.size() < per) {
        const std::size_t pick = earlier[std::uniform_int_distribution<std::size_t>(0, earlier.size() - 1)(rng)];
        batch.filler_seeds.push_back(pick);
        seeds.push_back(pick);
      }
    }
    for (std::size_t seed : seeds) {
      for (std::size_t spk : neighbours(seed)) {
        std::vector<std::size_t> pool = utts_[spk];
        std::shuffle(pool.begin(), pool.end(), rng);
        for (std::size_t u = 0; u < cfg_.utterances_per_speaker; ++u) {
          batch.utterances.push_back(pool[u]);
          batch.speakers.push_back(spk);
        }
      }
    }
    batches.push_back(std::move(batch));
  }
  stale_ = true;
  return batches;
}

std::vector<std::vector<std::string>> hpm_pass(const AamHead &head,
                                               const std::vector<std::vector<std::string>> &utterances_by_speaker,
                                               const HpmConfig &cfg, std::uint64_t seed) {
  std::vector<std::string> flat;
  std::vector<std::vector<std::size_t>> index(utterances_by_speaker.size());
  for (std::size_t s = 0; s < utterances_by_speaker.size(); ++s) {
    for (const std::string &id : utterances_by_speaker[s]) {
      index[s].push_back(flat.size());
      flat.push_back(id);
    }
  }
  HpmSampler sampler(cfg, std::move(index));
  sampler.refresh(head);
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::string>> out;
  for (const HpmBatch &b : sampler.next_pass(rng)) {
    std::vector<std::string> ids;
    ids.reserve(b.utterances.size());
    for (std::size_t u : b.utterances) ids.push_back(flat[u]);
    out.push_back(std::move(ids));
  }
  return out;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd ToyExtractor::embed_pooled(const Eigen::VectorXd &pooled) const {
  return (weight * pooled + bias).array().tanh().matrix();
}

Eigen::VectorXd ToyExtractor::embed_frames(std::span<const double> frames, std::size_t n_frames) const {
  const auto f = weight.cols();
  if (n_frames == 0 || frames.size() != n_frames * static_cast<std::size_t>(f)) {
    throw DataError("frame buffer does not match the extractor input dimension");
  }
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(f);
  for (std::size_t t = 0; t < n_frames; ++t) {
    pooled += Eigen::Map<const Eigen::VectorXd>(frames.data() + t * f, f);
  }
  return embed_pooled(pooled / static_cast<double>(n_frames));
}

void TrainPlan::validate() const {
  if (stages.empty()) throw ConfigError("training plan has no stages");
  if (embedding_dim == 0 || batch_size == 0) throw ConfigError("embedding_dim and batch_size must be positive");
  if (!(scale > 0.0)) throw ConfigError("AAM scale must be positive");
  hpm.validate();
  for (const TrainStage &s : stages) {
    s.schedule.validate();
    if (s.crop_frames == 0 || s.n_cycles == 0) throw ConfigError("stage crop_frames and cycles must be positive");
    if (!(s.margin >= 0.0 && s.margin < kPi / 2)) throw ConfigError("stage margin must lie in [0, pi/2)");
  }
}

TrainPlan default_train_plan(std::size_t base_crop_frames, std::uint64_t base_cycle_len, double base_lr_max,
                             std::size_t base_cycles) {
  TrainPlan plan;
  TrainStage warm;
  warm.margin = 0.2;
  warm.crop_frames = base_crop_frames;
  warm.schedule = ClrSchedule{1e-8, base_lr_max, base_cycle_len, ClrPolicy::kTriangular2};
  warm.sampler = SamplerKind::kRandom;
  warm.n_cycles = base_cycles;
  warm.augment = true;

  TrainStage fine;
  fine.margin = 0.5;
  fine.crop_frames = 3 * base_crop_frames;
  // 130k -> 60k iterations per cycle in the full-scale recipe.
  fine.schedule = ClrSchedule{1e-8, base_lr_max / 100.0, std::max<std::uint64_t>(1, base_cycle_len * 6 / 13),
                              ClrPolicy::kTriangular2};
  fine.sampler = SamplerKind::kHpm;
  fine.n_cycles = 1;
  fine.augment = false;
  plan.stages = {warm, fine};
  return plan;
}

namespace {

TrainStage stage_from_json(const nlohmann::json &j) {
  TrainStage s;
  s.margin = j.at("margin").get<double>();
  s.crop_frames = j.at("crop_frames").get<std::size_t>();
  s.schedule.lr_min = j.at("lr_min").get<double>();
  s.schedule.lr_max = j.at("lr_max").get<double>();
  s.schedule.cycle_len = j.at("cycle_len").get<std::uint64_t>();
  s.n_cycles = j.at("cycles").get<std::size_t>();
  const std::string sampler = j.at("sampler").get<std::string>();
  if (sampler == "random") {
    s.sampler = SamplerKind::kRandom;
  } else if (sampler == "hpm") {
    s.sampler = SamplerKind::kHpm;
  } else {
    throw ConfigError("unknown sampler '" + sampler + "' (expected random or hpm)");
  }
  if (j.contains("augment")) s.augment = j["augment"].get<bool>();
  return s;
}

}  // namespace

TrainPlan train_plan_from_json(const nlohmann::json &j) {
  TrainPlan plan;
  try {
    const nlohmann::json &stages = j.is_array() ? j : j.at("stages");
    for (const auto &s : stages) plan.stages.push_back(stage_from_json(s));
    if (j.is_object()) {
      if (j.contains("embedding_dim")) plan.embedding_dim = j["embedding_dim"].get<std::size_t>();
      if (j.contains("scale")) plan.scale = j["scale"].get<double>();
      if (j.contains("batch_size")) plan.batch_size = j["batch_size"].get<std::size_t>();
      if (j.contains("hpm")) {
        const auto &h = j["hpm"];
        plan.hpm.speakers_per_batch = h.at("S").get<std::size_t>();
        plan.hpm.utterances_per_speaker = h.at("U").get<std::size_t>();
        plan.hpm.similar_speakers = h.at("I").get<std::size_t>();
      }
      if (j.contains("weight_decay")) {
        plan.weight_decay_extractor = j["weight_decay"].at("extractor").get<double>();
        plan.weight_decay_head = j["weight_decay"].at("head").get<double>();
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed training plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

nlohmann::json to_json(const TrainPlan &plan) {
  nlohmann::json stages = nlohmann::json::array();
  for (const TrainStage &s : plan.stages) {
    stages.push_back({{"margin", s.margin},
                      {"crop_frames", s.crop_frames},
                      {"lr_min", s.schedule.lr_min},
                      {"lr_max", s.schedule.lr_max},
                      {"cycle_len", s.schedule.cycle_len},
                      {"cycles", s.n_cycles},
                      {"sampler", s.sampler == SamplerKind::kHpm ? "hpm" : "random"},
                      {"augment", s.augment}});
  }
  return {{"stages", stages},
          {"embedding_dim", plan.embedding_dim},
          {"scale", plan.scale},
          {"batch_size", plan.batch_size},
          {"hpm",
           {{"S", plan.hpm.speakers_per_batch},
            {"U", plan.hpm.utterances_per_speaker},
            {"I", plan.hpm.similar_speakers}}},
          {"weight_decay", {{"extractor", plan.weight_decay_extractor}, {"head", plan.weight_decay_head}}}};
}

// ---------------------------------------------------------------------------

namespace {

// Adam with decoupled weight decay.
struct AdamState {
  Eigen::MatrixXd m, v;
  std::uint64_t t = 0;
};

void adam_step(Eigen::MatrixXd &param, const Eigen::MatrixXd &grad, AdamState &st, double lr, double decay) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (st.m.size() == 0) {
    st.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    st.v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
  }
  ++st.t;
  st.m = kBeta1 * st.m + (1.0 - kBeta1) * grad;
  st.v = kBeta2 * st.v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.t));
  param -= lr * ((st.m / c1).array() / ((st.v / c2).array().sqrt() + kEps)).matrix() + lr * decay * param;
}

// Mean of a random crop, with optional time and band masking.
Eigen::VectorXd pooled_crop(const FrameUtterance &u, std::size_t frame_dim, std::size_t crop, bool augment,
                            std::mt19937_64 &rng) {
  const std::size_t len = std::min(crop, u.n_frames);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, u.n_frames - len)(rng);
  std::size_t mask_from = 0, mask_len = 0;
  std::size_t band_from = 0, band_len = 0;
  if (augment) {
    mask_len = std::min<std::size_t>(std::uniform_int_distribution<std::size_t>(0, 5)(rng), len - 1);
    mask_from = std::uniform_int_distribution<std::size_t>(0, len - mask_len)(rng);
    band_len = std::uniform_int_distribution<std::size_t>(0, frame_dim / 10)(rng);
    band_from = std::uniform_int_distribution<std::size_t>(0, frame_dim - band_len)(rng);
  }
  const auto f = static_cast<Eigen::Index>(frame_dim);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(f);
  std::size_t used = 0;
  for (std::size_t t = 0; t < len; ++t) {
    if (t >= mask_from && t < mask_from + mask_len) continue;
    acc += Eigen::Map<const Eigen::VectorXd>(u.frames.data() + (start + t) * frame_dim, f);
    ++used;
  }
  acc /= static_cast<double>(used);
  if (band_len > 0) acc.segment(static_cast<Eigen::Index>(band_from), static_cast<Eigen::Index>(band_len)).setZero();
  return acc;
}

}  // namespace

ToyModel train_toy(const TrainPlan &plan, const FrameCorpus &corpus, std::uint64_t seed) {
  plan.validate();
  corpus.validate();
  if (corpus.speaker_ids.size() < 2) throw DataError("toy training needs at least 2 speakers");
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(plan.embedding_dim);
  const auto f = static_cast<Eigen::Index>(corpus.frame_dim);
  ToyModel model;
  model.extractor.weight.resize(d, f);
  const double init_scale = std::sqrt(1.0 / static_cast<double>(f));
  for (Eigen::Index i = 0; i < model.extractor.weight.size(); ++i) {
    model.extractor.weight.data()[i] = init_scale * gauss(rng);
  }
  model.extractor.bias = Eigen::VectorXd::Zero(d);
  model.head.prototypes.resize(static_cast<Eigen::Index>(corpus.speaker_ids.size()), d);
  for (Eigen::Index i = 0; i < model.head.prototypes.size(); ++i) model.head.prototypes.data()[i] = gauss(rng);
  model.head.scale = plan.scale;
  return continue_training(std::move(model), plan, corpus, seed);
}

ToyModel continue_training(ToyModel model, const TrainPlan &plan, const FrameCorpus &corpus, std::uint64_t seed) {
  plan.validate();
  corpus.validate();
  if (model.head.n_classes() != corpus.speaker_ids.size()) {
    throw DataError("model head and corpus disagree on the number of speakers");
  }
  const auto by_speaker = corpus.utterances_by_speaker();
  std::uint64_t global_iter = model.log.empty() ? 0 : model.log.back().iteration + 1;
  const std::size_t stage_offset = model.log.empty() ? 0 : model.log.back().stage + 1;

  for (std::size_t si = 0; si < plan.stages.size(); ++si) {
    const TrainStage &stage = plan.stages[si];
    const std::size_t stage_index = stage_offset + si;
    std::mt19937_64 rng(derive_seed(seed, 1 + stage_index));
    model.head.margin = stage.margin;
    model.head.scale = plan.scale;
    AdamState adam_w, adam_b, adam_p;

    std::optional<HpmSampler> hpm;
    if (stage.sampler == SamplerKind::kHpm) hpm.emplace(plan.hpm, by_speaker);
    std::vector<std::size_t> shuffled(corpus.utterances.size());
    std::iota(shuffled.begin(), shuffled.end(), 0);
    std::size_t cursor = shuffled.size();
    std::vector<HpmBatch> pass;
    std::size_t pass_pos = 0;

    auto next_batch = [&]() -> std::vector<std::size_t> {
      if (hpm) {
        if (pass_pos == pass.size()) {
          hpm->refresh(model.head);
          pass = hpm->next_pass(rng);
          pass_pos = 0;
        }
        return pass[pass_pos++].utterances;
      }
      const std::size_t n = std::min(plan.batch_size, shuffled.size());
      std::vector<std::size_t> batch;
      batch.reserve(n);
      while (batch.size() < n) {
        if (cursor == shuffled.size()) {
          std::shuffle(shuffled.begin(), shuffled.end(), rng);
          cursor = 0;
        }
        batch.push_back(shuffled[cursor++]);
      }
      return batch;
    };

    const std::uint64_t total = stage.schedule.cycle_len * stage.n_cycles;
    for (std::uint64_t it = 0; it < total; ++it, ++global_iter) {
      const double lr = clr_lr(it, stage.schedule);
      const auto batch = next_batch();
      const auto n = static_cast<Eigen::Index>(batch.size());
      Eigen::MatrixXd pooled(n, static_cast<Eigen::Index>(corpus.frame_dim));
      std::vector<int> labels(batch.size());
      for (Eigen::Index i = 0; i < n; ++i) {
        const FrameUtterance &u = corpus.utterances[batch[i]];
        pooled.row(i) = pooled_crop(u, corpus.frame_dim, stage.crop_frames, stage.augment, rng).transpose();
        labels[i] = static_cast<int>(u.speaker);
      }
      const Eigen::MatrixXd pre = (pooled * model.extractor.weight.transpose()).rowwise() +
                                  model.extractor.bias.transpose();
      const Eigen::MatrixXd emb = pre.array().tanh().matrix();
      AamGradient g;
      try {
        g = aam_grad(emb, labels, model.head);
      } catch (const DataError &e) {
        throw ConvergenceError("stage " + std::to_string(stage_index) + " iteration " + std::to_string(it) + ": " + e.what());
      }
      if (!std::isfinite(g.loss)) {
        throw ConvergenceError("training diverged at stage " + std::to_string(stage_index) + " iteration " + std::to_string(it));
      }
      const Eigen::MatrixXd g_pre = g.embeddings.cwiseProduct((1.0 - emb.array().square()).matrix());
      const Eigen::MatrixXd g_w = g_pre.transpose() * pooled;
      const Eigen::MatrixXd g_b = g_pre.colwise().sum().transpose();
      Eigen::MatrixXd bias = model.extractor.bias;
      adam_step(model.extractor.weight, g_w, adam_w, lr, plan.weight_decay_extractor);
      adam_step(bias, g_b, adam_b, lr, plan.weight_decay_extractor);
      model.extractor.bias = bias;
      adam_step(model.head.prototypes, g.prototypes, adam_p, lr, plan.weight_decay_head);
      model.log.push_back(TrainLogEntry{stage_index, global_iter, lr, g.loss});
    }
  }
  return model;
}

EmbeddingStore embed_corpus(const ToyExtractor &extractor, const FrameCorpus &corpus) {
  std::vector<Embedding> items;
  items.reserve(corpus.utterances.size());
  for (const FrameUtterance &u : corpus.utterances) {
    Embedding e;
    e.utt_id = u.utt_id;
    e.speaker_id = corpus.speaker_ids[u.speaker];
    const Eigen::VectorXd v = extractor.embed_frames(u.frames, u.n_frames);
    e.vector.assign(v.data(), v.data() + v.size());
    e.n_frames = static_cast<std::int64_t>(u.n_frames);
    items.push_back(std::move(e));
  }
  return EmbeddingStore(std::move(items));
}

void write_train_log(const std::vector<TrainLogEntry> &log, std::ostream &out) {
  for (const TrainLogEntry &e : log) out << e.iteration << ' ' << format_real(e.lr) << ' ' << format_real(e.loss) << '\n';
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd &m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const ToyModel &model) {
  std::vector<double> bias(model.extractor.bias.data(), model.extractor.bias.data() + model.extractor.bias.size());
  return {{"extractor", {{"weight", matrix_json(model.extractor.weight)}, {"bias", bias}}},
          {"head",
           {{"prototypes", matrix_json(model.head.prototypes)},
            {"margin", model.head.margin},
            {"scale", model.head.scale}}}};
}

void save_toy_model(const ToyModel &model, const std::string &dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/model.json", std::ios::trunc);
    if (!out) throw Error("cannot write '" + dir + "/model.json'");
    out << to_json(model).dump() << '\n';
  }
  std::ofstream log(dir + "/train.log", std::ios::trunc);
  if (!log) throw Error("cannot write '" + dir + "/train.log'");
  write_train_log(model.log, log);
}

}  // namespace svcal
