#pragma once

// Offline comparator oracles and regret accounting.
//
// The mixed regret notion compares the learner's prequential losses against
// a comparator sequence that may switch its representation per environment
// but keeps a single fixed classifier: one semantic encoder per environment
// plus a shared classifier, trained offline on the whole stream with full
// knowledge.  Static regret uses the same oracle collapsed to a single
// shared encoder.  Training is full-batch Adam on cross-entropy plus an l1
// reconstruction term through a per-environment auxiliary decoder (the
// decoder is discarded afterwards; it only shapes the representation).

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "fairdolce/autodiff.hpp"
#include "fairdolce/core.hpp"
#include "fairdolce/losses.hpp"
#include "fairdolce/nn.hpp"

namespace fairdolce {

struct OfflineOracleConfig {
  int steps = 500;
  double lr = 0.01;
  double recon_weight = 1.0;
  int semantic_dim = 4;
  int hidden_layers = 0;
  int hidden_width = 16;
  std::uint64_t seed = 7;
};

namespace detail {

struct OfflineModel {
  std::vector<DenseBlock> encoders;
  std::vector<DenseBlock> decoders;
  DenseBlock classifier;
};

// Full-batch training of per-group encoders (+aux decoders) with a shared
// classifier; each point contributes 1/N to the objective regardless of its
// group's size.
inline OfflineModel fit_offline(const std::vector<std::vector<const DataPoint*>>& groups,
                                int feature_dim, const OfflineOracleConfig& cfg) {
  size_t total = 0;
  for (const auto& g : groups) total += g.size();
  if (groups.empty() || total == 0)
    throw std::invalid_argument("fit_offline: no points");

  ModelOptions opt;
  opt.hidden_layers = cfg.hidden_layers;
  opt.hidden_width = cfg.hidden_width;
  Rng rng(mix_seed(cfg.seed, 0x0FF11E));
  const int n = static_cast<int>(groups.size());

  OfflineModel model;
  for (int k = 0; k < n; ++k) {
    model.encoders.push_back(
        make_block(feature_dim, cfg.semantic_dim, Act::LeakyRelu, opt, rng));
    model.decoders.push_back(
        make_block(cfg.semantic_dim, feature_dim, Act::LeakyRelu, opt, rng));
  }
  model.classifier = make_block(cfg.semantic_dim, 1, Act::Sigmoid, opt, rng);

  std::vector<BlockAdam> enc_adam, dec_adam;
  for (int k = 0; k < n; ++k) {
    enc_adam.push_back(BlockAdam::zeros_like(model.encoders[k]));
    dec_adam.push_back(BlockAdam::zeros_like(model.decoders[k]));
  }
  BlockAdam cls_adam = BlockAdam::zeros_like(model.classifier);

  // Sink layout: [0, n) encoders, [n, 2n) decoders, 2n classifier.
  for (int step = 0; step < cfg.steps; ++step) {
    Tape tape;
    std::vector<Tape::Id> terms;
    terms.reserve(total);
    for (int k = 0; k < n; ++k) {
      for (const DataPoint* p : groups[k]) {
        const Tape::Id x = tape.input(p->features);
        const Tape::Id s = tape.block(model.encoders[k], x, k);
        const Tape::Id score = tape.block(model.classifier, s, 2 * n);
        const Tape::Id ce = tape.cross_entropy_of(score, p->label);
        const Tape::Id xhat = tape.block(model.decoders[k], s, n + k);
        terms.push_back(tape.affine_combo(
            0.0, {{1.0, ce}, {cfg.recon_weight, tape.l1_dist(x, xhat)}}));
      }
    }
    const Tape::Id root = tape.mean_of(terms);

    std::vector<BlockGrad> ge, gd;
    for (int k = 0; k < n; ++k) {
      ge.push_back(BlockGrad::zeros_like(model.encoders[k]));
      gd.push_back(BlockGrad::zeros_like(model.decoders[k]));
    }
    BlockGrad gc = BlockGrad::zeros_like(model.classifier);
    Tape::Sinks sinks;
    for (int k = 0; k < n; ++k) sinks.push_back(&ge[k]);
    for (int k = 0; k < n; ++k) sinks.push_back(&gd[k]);
    sinks.push_back(&gc);
    tape.backward(root, sinks);

    for (int k = 0; k < n; ++k) {
      adam_step(model.encoders[k], enc_adam[k], ge[k], cfg.lr);
      adam_step(model.decoders[k], dec_adam[k], gd[k], cfg.lr);
    }
    adam_step(model.classifier, cls_adam, gc, cfg.lr);
  }
  return model;
}

inline Vec flatten_blocks(const DenseBlock& a, const DenseBlock& b) {
  Vec out;
  for (const DenseBlock* blk : {&a, &b})
    for (const DenseLayer& l : blk->layers) {
      out.insert(out.end(), l.w.a.begin(), l.w.a.end());
      out.insert(out.end(), l.b.begin(), l.b.end());
    }
  return out;
}

inline double mean_ce_under(const DenseBlock& encoder, const DenseBlock& classifier,
                            const Task& task) {
  double s = 0.0;
  for (const DataPoint& p : task.points) {
    const double score = classifier.forward(encoder.forward(p.features))[0];
    s += cross_entropy(score, p.label);
  }
  return s / static_cast<double>(task.points.size());
}

}  // namespace detail

// Per-environment comparator sequence with a shared fixed classifier.
struct ComparatorSequence {
  std::map<int, DenseBlock> encoders;
  DenseBlock classifier;
  std::vector<Vec> u;                 // flattened comparator per timestep
  std::vector<double> per_task_loss;  // mean cross-entropy per task
};

inline ComparatorSequence fit_comparators(const TaskStream& stream, int feature_dim,
                                          const OfflineOracleConfig& cfg) {
  if (stream.empty()) throw std::invalid_argument("fit_comparators: empty stream");
  std::map<int, std::vector<const DataPoint*>> by_env;
  for (const Task& t : stream)
    for (const DataPoint& p : t.points) by_env[t.environment].push_back(&p);

  std::vector<std::vector<const DataPoint*>> groups;
  std::vector<int> env_ids;
  for (auto& [env, pts] : by_env) {
    env_ids.push_back(env);
    groups.push_back(std::move(pts));
  }

  const detail::OfflineModel model = detail::fit_offline(groups, feature_dim, cfg);

  ComparatorSequence seq;
  std::map<int, int> env_index;
  for (size_t k = 0; k < env_ids.size(); ++k) {
    env_index[env_ids[k]] = static_cast<int>(k);
    seq.encoders[env_ids[k]] = model.encoders[k];
  }
  seq.classifier = model.classifier;
  seq.u.reserve(stream.size());
  seq.per_task_loss.reserve(stream.size());
  for (const Task& t : stream) {
    const DenseBlock& enc = model.encoders[env_index.at(t.environment)];
    seq.u.push_back(detail::flatten_blocks(enc, model.classifier));
    seq.per_task_loss.push_back(detail::mean_ce_under(enc, model.classifier, t));
  }
  return seq;
}

// Same oracle restricted to one shared encoder: the best fixed model.
struct StaticComparator {
  DenseBlock encoder;
  DenseBlock classifier;
  std::vector<double> per_task_loss;
};

inline StaticComparator fit_static_comparator(const TaskStream& stream, int feature_dim,
                                              const OfflineOracleConfig& cfg) {
  if (stream.empty())
    throw std::invalid_argument("fit_static_comparator: empty stream");
  std::vector<const DataPoint*> pooled;
  for (const Task& t : stream)
    for (const DataPoint& p : t.points) pooled.push_back(&p);

  const detail::OfflineModel model =
      detail::fit_offline({pooled}, feature_dim, cfg);

  StaticComparator out;
  out.encoder = model.encoders[0];
  out.classifier = model.classifier;
  out.per_task_loss.reserve(stream.size());
  for (const Task& t : stream)
    out.per_task_loss.push_back(
        detail::mean_ce_under(out.encoder, out.classifier, t));
  return out;
}

// Total l2 travel of the comparator sequence across consecutive timesteps.
inline double path_length(const std::vector<Vec>& u) {
  double s = 0.0;
  for (size_t t = 0; t + 1 < u.size(); ++t) s += l2_dist(u[t], u[t + 1]);
  return s;
}

struct RegretReport {
  double fair_sdr = 0.0;        // against the switching comparator
  double static_regret = 0.0;   // against the best fixed model
  double cumulative_violation = 0.0;
  double path_length = 0.0;
  std::vector<double> fair_sdr_curve;   // prefix regret / t
  std::vector<double> violation_curve;  // prefix violation / t
};

inline RegretReport regret_report(const std::vector<double>& learner_losses,
                                  const std::vector<double>& comparator_losses,
                                  const std::vector<double>& static_losses,
                                  const std::vector<double>& g_values,
                                  double path_len) {
  const size_t T = learner_losses.size();
  if (comparator_losses.size() != T || static_losses.size() != T ||
      g_values.size() != T || T == 0)
    throw std::invalid_argument("regret_report: series length mismatch");
  RegretReport rep;
  rep.path_length = path_len;
  rep.fair_sdr_curve.reserve(T);
  rep.violation_curve.reserve(T);
  double reg = 0.0, sreg = 0.0, viol = 0.0;
  for (size_t t = 0; t < T; ++t) {
    reg += learner_losses[t] - comparator_losses[t];
    sreg += learner_losses[t] - static_losses[t];
    viol += g_values[t] > 0.0 ? g_values[t] : 0.0;
    rep.fair_sdr_curve.push_back(reg / static_cast<double>(t + 1));
    rep.violation_curve.push_back(viol / static_cast<double>(t + 1));
  }
  rep.fair_sdr = reg;
  rep.static_regret = sreg;
  rep.cumulative_violation = viol;
  return rep;
}

}  // namespace fairdolce
