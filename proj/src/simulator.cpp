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

#include "svcal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "svcal/error.hpp"
#include "svcal/parallel.hpp"

namespace svcal {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::vector<double> random_unit(std::size_t dim, std::mt19937_64 &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double &x : v) {
      x = gauss(rng);
      sq += x * x;
    }
  } while (sq == 0.0);
  const double n = std::sqrt(sq);
  for (double &x : v) x /= n;
  return v;
}

std::string numbered(const std::string &prefix, std::size_t i, int width) {
  std::string digits = std::to_string(i);
  if (digits.size() < static_cast<std::size_t>(width)) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

void SimConfig::validate() const {
  if (n_speakers < 2) throw ConfigError("simulator needs at least 2 speakers");
  if (dim == 0) throw ConfigError("simulator dimension must be positive");
  if (!(frames_per_second > 0.0)) throw ConfigError("frames_per_second must be positive");
  if (!(short_min_s >= 2.0 && short_min_s < short_max_s && short_max_s <= long_max_s)) {
    throw ConfigError("simulator duration ranges must satisfy 2 <= short_min < boundary <= long_max");
  }
  if (!(long_fraction >= 0.0 && long_fraction <= 1.0)) throw ConfigError("long_fraction must lie in [0, 1]");
  if (utterances_per_speaker == 0) throw ConfigError("utterances_per_speaker must be positive");
  if (!(noise_base > 0.0)) throw ConfigError("noise_base must be positive");
  if (!(noise_duration_exponent >= 0.0)) throw ConfigError("noise exponent must be non-negative");
}

double SimConfig::noise_std(double duration_s) const {
  return noise_base / std::pow(duration_s, noise_duration_exponent);
}

std::vector<std::vector<double>> generate_population(const SimConfig &cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  std::vector<std::vector<double>> means;
  means.reserve(cfg.n_speakers);
  for (std::size_t s = 0; s < cfg.n_speakers; ++s) means.push_back(random_unit(cfg.dim, rng));
  return means;
}

Embedding generate_utterance(std::span<const double> speaker_mean, double duration_s, const SimConfig &cfg,
                             std::mt19937_64 &rng) {
  if (!(duration_s >= 2.0)) throw ConfigError("simulated utterances must last at least 2 s");
  std::normal_distribution<double> noise(0.0, cfg.noise_std(duration_s));
  Embedding e;
  e.vector.resize(speaker_mean.size());
  for (std::size_t k = 0; k < speaker_mean.size(); ++k) e.vector[k] = speaker_mean[k] + noise(rng);
  e.n_frames = std::llround(cfg.frames_per_second * duration_s);
  std::uniform_real_distribution<double> frac(0.6, 1.0);
  e.n_speech_frames = std::llround(frac(rng) * static_cast<double>(e.n_frames));
  return e;
}

EmbeddingStore generate_store(const SimConfig &cfg) {
  const auto means = generate_population(cfg);
  std::vector<std::vector<Embedding>> per_speaker(cfg.n_speakers);
  parallel_for(cfg.n_speakers, [&](std::size_t s) {
    std::mt19937_64 rng(derive_seed(cfg.seed, s + 1));
    std::bernoulli_distribution is_long(cfg.long_fraction);
    std::uniform_real_distribution<double> short_dur(cfg.short_min_s, cfg.short_max_s);
    std::uniform_real_distribution<double> long_dur(cfg.short_max_s, cfg.long_max_s);
    const std::string spk = numbered(cfg.id_prefix, s, 4);
    for (std::size_t u = 0; u < cfg.utterances_per_speaker; ++u) {
      const double d = is_long(rng) ? long_dur(rng) : short_dur(rng);
      Embedding e = generate_utterance(means[s], d, cfg, rng);
      e.utt_id = spk + "-u" + std::to_string(u);
      e.speaker_id = spk;
      per_speaker[s].push_back(std::move(e));
    }
  });
  std::vector<Embedding> all;
  all.reserve(cfg.n_speakers * cfg.utterances_per_speaker);
  for (auto &v : per_speaker) {
    for (auto &e : v) all.push_back(std::move(e));
  }
  return EmbeddingStore(std::move(all));
}

SimulatedTrials generate_trialset(const SimConfig &cfg, const CalibrationTrialSpec &spec, std::uint64_t seed) {
  SimulatedTrials out;
  out.store = generate_store(cfg);
  out.trials = build_calibration_trials(out.store, spec, seed);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> FrameCorpus::utterances_by_speaker() const {
  std::vector<std::vector<std::size_t>> out(speaker_ids.size());
  for (std::size_t i = 0; i < utterances.size(); ++i) out[utterances[i].speaker].push_back(i);
  return out;
}

std::pair<FrameCorpus, FrameCorpus> FrameCorpus::split_speakers(std::size_t n) const {
  if (n > speaker_ids.size()) throw ConfigError("split point beyond the number of speakers");
  FrameCorpus a, b;
  a.frame_dim = b.frame_dim = frame_dim;
  a.speaker_ids.assign(speaker_ids.begin(), speaker_ids.begin() + static_cast<std::ptrdiff_t>(n));
  b.speaker_ids.assign(speaker_ids.begin() + static_cast<std::ptrdiff_t>(n), speaker_ids.end());
  for (const FrameUtterance &u : utterances) {
    if (u.speaker < n) {
      a.utterances.push_back(u);
    } else {
      b.utterances.push_back(u);
      b.utterances.back().speaker -= n;
    }
  }
  return {std::move(a), std::move(b)};
}

void FrameCorpus::validate() const {
  if (frame_dim == 0) throw DataError("frame corpus has zero frame dimension");
  std::set<std::string> ids;
  for (const FrameUtterance &u : utterances) {
    if (u.speaker >= speaker_ids.size()) throw DataError("utterance '" + u.utt_id + "' has an unknown speaker");
    if (u.n_frames == 0 || u.frames.size() != u.n_frames * frame_dim) {
      throw DataError("utterance '" + u.utt_id + "' has an inconsistent frame buffer");
    }
    if (!ids.insert(u.utt_id).second) throw DataError("duplicate utterance '" + u.utt_id + "'");
  }
}

FrameCorpus generate_frame_corpus(const FrameCorpusConfig &cfg) {
  if (cfg.n_speakers < 2 || cfg.frame_dim == 0 || cfg.utterances_per_speaker == 0 || cfg.min_frames == 0 ||
      cfg.min_frames > cfg.max_frames || cfg.channel_rank > cfg.frame_dim) {
    throw ConfigError("invalid frame corpus configuration");
  }
  std::mt19937_64 world(derive_seed(cfg.seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> means;
  for (std::size_t s = 0; s < cfg.n_speakers; ++s) means.push_back(random_unit(cfg.frame_dim, world));
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(cfg.frame_dim), static_cast<Eigen::Index>(cfg.channel_rank));
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    for (Eigen::Index r = 0; r < basis.rows(); ++r) basis(r, c) = gauss(world);
  }
  if (cfg.channel_rank > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
    basis = qr.householderQ() * Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
  }

  FrameCorpus corpus;
  corpus.frame_dim = cfg.frame_dim;
  for (std::size_t s = 0; s < cfg.n_speakers; ++s) corpus.speaker_ids.push_back(numbered(cfg.id_prefix, s, 4));
  std::vector<std::vector<FrameUtterance>> per_speaker(cfg.n_speakers);
  parallel_for(cfg.n_speakers, [&](std::size_t s) {
    std::mt19937_64 rng(derive_seed(cfg.seed, s + 1));
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> len(cfg.min_frames, cfg.max_frames);
    for (std::size_t u = 0; u < cfg.utterances_per_speaker; ++u) {
      FrameUtterance utt;
      utt.utt_id = corpus.speaker_ids[s] + "-u" + std::to_string(u);
      utt.speaker = s;
      utt.n_frames = len(rng);
      Eigen::VectorXd coeff(static_cast<Eigen::Index>(cfg.channel_rank));
      for (Eigen::Index c = 0; c < coeff.size(); ++c) coeff(c) = cfg.channel_noise * g(rng);
      const Eigen::VectorXd channel = basis * coeff;
      utt.frames.resize(utt.n_frames * cfg.frame_dim);
      for (std::size_t t = 0; t < utt.n_frames; ++t) {
        for (std::size_t k = 0; k < cfg.frame_dim; ++k) {
          utt.frames[t * cfg.frame_dim + k] = cfg.speaker_scale * means[s][k] +
                                              (cfg.channel_rank ? channel(static_cast<Eigen::Index>(k)) : 0.0) +
                                              cfg.frame_noise * g(rng);
        }
      }
      per_speaker[s].push_back(std::move(utt));
    }
  });
  for (auto &v : per_speaker) {
    for (auto &u : v) corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

void write_frame_corpus(const FrameCorpus &corpus, std::ostream &out) {
  for (const FrameUtterance &u : corpus.utterances) {
    out << u.utt_id << ' ' << corpus.speaker_ids[u.speaker] << ' ' << u.n_frames << ' ' << corpus.frame_dim;
    for (double v : u.frames) out << ' ' << format_real(v);
    out << '\n';
  }
}

FrameCorpus read_frame_corpus(std::istream &in, const std::string &name) {
  FrameCorpus corpus;
  std::map<std::string, std::size_t> speakers;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = split_fields(line);
    if (f.empty() || f.front().front() == '#') continue;
    if (f.size() < 4) throw ParseError(name, lineno, "expected utt_id speaker_id T F values...");
    auto t = parse_int(f[2]);
    auto d = parse_int(f[3]);
    if (!t || !d || *t <= 0 || *d <= 0) throw ParseError(name, lineno, "bad frame count or dimension");
    if (corpus.frame_dim == 0) corpus.frame_dim = static_cast<std::size_t>(*d);
    if (static_cast<std::size_t>(*d) != corpus.frame_dim) throw ParseError(name, lineno, "inconsistent frame dimension");
    const std::size_t n = static_cast<std::size_t>(*t) * corpus.frame_dim;
    if (f.size() != 4 + n) throw ParseError(name, lineno, "expected " + std::to_string(n) + " frame values");
    FrameUtterance u;
    u.utt_id = std::string(f[0]);
    auto [it, inserted] = speakers.emplace(std::string(f[1]), corpus.speaker_ids.size());
    if (inserted) corpus.speaker_ids.push_back(it->first);
    u.speaker = it->second;
    u.n_frames = static_cast<std::size_t>(*t);
    u.frames.reserve(n);
    for (std::size_t k = 4; k < f.size(); ++k) {
      auto v = parse_real(f[k]);
      if (!v || !std::isfinite(*v)) throw ParseError(name, lineno, "bad frame value '" + std::string(f[k]) + "'");
      u.frames.push_back(*v);
    }
    corpus.utterances.push_back(std::move(u));
  }
  corpus.validate();
  return corpus;
}

void save_frame_corpus(const FrameCorpus &corpus, const std::string &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_frame_corpus(corpus, out);
  out.flush();
  if (!out) throw Error("write failure on '" + path + "'");
}

FrameCorpus load_frame_corpus(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return read_frame_corpus(in, path);
}

TrialList random_balanced_trials(const EmbeddingStore &store, std::size_t n_trials, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!store[i].speaker_id) throw DataError("utterance '" + store[i].utt_id + "' has no speaker id");
    by_speaker[*store[i].speaker_id].push_back(i);
  }
  std::vector<const std::vector<std::size_t> *> multi;
  for (const auto &[spk, v] : by_speaker) {
    if (v.size() >= 2) multi.push_back(&v);
  }
  if (multi.empty() || by_speaker.size() < 2) throw DataError("store cannot support target and nontarget trials");
  std::mt19937_64 rng(seed);
  auto below = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::vector<Trial> trials;
  trials.reserve(n_trials);
  const std::size_t n_target = n_trials / 2;
  while (trials.size() < n_target) {
    const auto &v = *multi[below(multi.size())];
    const std::size_t a = v[below(v.size())];
    const std::size_t b = v[below(v.size())];
    if (a == b) continue;
    trials.push_back(Trial{store[a].utt_id, store[b].utt_id, Label::kTarget});
  }
  while (trials.size() < n_trials) {
    const std::size_t a = below(store.size());
    const std::size_t b = below(store.size());
    if (*store[a].speaker_id == *store[b].speaker_id) continue;
    trials.push_back(Trial{store[a].utt_id, store[b].utt_id, Label::kNontarget});
  }
  std::shuffle(trials.begin(), trials.end(), rng);
  return TrialList(std::move(trials));
}

}  // namespace svcal
