#pragma once

// Online primal-dual learner.
//
// Each arriving task is first scored prequentially with the parameters
// carried over from the previous step, then its environment is registered,
// then a fixed number of inner optimization steps run against the replay
// buffers, and only afterwards do the task's points join the pool.
//
// Every inner step draws a batch (quartets across two environments when
// the environment set allows it and the pool can supply them, otherwise
// single-environment doublets with the invariance loss pinned to zero),
// takes one Adam step per parameter block against that block's objective,
// and finishes with projected dual ascent on the three multipliers:
//
//   semantic encoder   <- full Lagrangian
//   variation encoder  <- l2 * recon + l3 * inv
//   decoder            <- l2 * recon + l3 * inv
//   classifier         <- cls + l1 * fair + l3 * inv
//   lambda_i           <- max(lambda_i + eta2 * (loss_i - margin_i), 0)
//
// lambda3 only moves while the environment set has at least two members.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fairdolce/core.hpp"
#include "fairdolce/losses.hpp"
#include "fairdolce/metrics.hpp"
#include "fairdolce/nn.hpp"
#include "fairdolce/rng.hpp"
#include "fairdolce/sampler.hpp"

namespace fairdolce {

enum class Schedule { theory, constant };

enum class Ablation {
  full,
  no_disentangle,         // drop variation encoder, decoder, recon and inv
  no_fairness,            // drop the fairness term; lambda1 frozen
  no_variation_encoder,   // decoder reconstructs from semantics alone
};

struct LearnerConfig {
  int quartets = 16;      // Q: tuples drawn per inner step
  int inner_steps = 20;
  double eta1 = 0.01;     // base primal rate
  double eta2 = 0.01;     // base dual rate
  Schedule schedule = Schedule::theory;
  double lambda_init = 0.01;
  Margins margins = {0.05, 0.05, 0.05};
  FairnessMode fairness = FairnessMode::ddp;
  Ablation ablation = Ablation::full;
  int semantic_dim = 4;
  int variation_dim = 4;
  int hidden_layers = 0;
  int hidden_width = 16;
  std::uint64_t seed = 1;
};

struct Rates {
  double eta1 = 0.0;
  double eta2 = 0.0;
};

// Horizon-aware rates.  The theory schedule fixes eta1 = eta1_0 / sqrt(T)
// and eta2 = eta2_0 / sqrt(eta1) for the whole run; the constant schedule
// uses the base rates as-is.
inline Rates lr_schedule(const LearnerConfig& cfg, int horizon) {
  if (cfg.eta1 <= 0.0 || cfg.eta2 <= 0.0)
    throw std::invalid_argument("lr_schedule: rates must be positive");
  if (cfg.schedule == Schedule::constant) return {cfg.eta1, cfg.eta2};
  if (horizon < 1)
    throw std::invalid_argument("lr_schedule: theory schedule requires a known horizon");
  const double eta1 = cfg.eta1 / std::sqrt(static_cast<double>(horizon));
  const double eta2 = cfg.eta2 / std::sqrt(eta1);
  return {eta1, eta2};
}

// Projected dual ascent on one multiplier.
inline double dual_update(double lambda, double loss, double margin, double eta2) {
  return std::max(lambda + eta2 * (loss - margin), 0.0);
}

// Frozen-parameter evaluation of one task (no state touched anywhere).
struct TaskEval {
  double accuracy = 0.0;
  std::optional<double> dp, eo, md;
  double g = 0.0;
  bool g_degenerate = false;
  double mean_ce = 0.0;
};

inline TaskEval evaluate_task(const ModelParams& params, const Task& task,
                              FairnessMode mode) {
  if (task.points.empty())
    throw std::invalid_argument("evaluate_task: empty task");
  const size_t n = task.points.size();
  std::vector<double> scores(n);
  std::vector<int> preds(n), labels(n), zs(n);
  double ce_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const DataPoint& pt = task.points[i];
    scores[i] = classify_point(params, pt.features);
    preds[i] = predict_label(scores[i]);
    labels[i] = pt.label;
    zs[i] = pt.sensitive;
    ce_sum += cross_entropy(scores[i], pt.label);
  }
  TaskEval ev;
  ev.accuracy = accuracy(preds, labels);
  ev.dp = demographic_parity(preds, zs);
  ev.eo = equalized_odds(preds, labels, zs);
  ev.md = mean_difference(preds, zs);
  const FairnessValue fv = fairness_value(task.points, scores, mode);
  ev.g = fv.value;
  ev.g_degenerate = fv.degenerate;
  ev.mean_ce = ce_sum / static_cast<double>(n);
  return ev;
}

struct InnerStepInfo {
  double recon = 0.0, inv = 0.0, cls = 0.0, fair = 0.0, total = 0.0;
  bool fair_degenerate = false;
  bool used_quartets = false;
};

class OnlineLearner {
 public:
  OnlineLearner(int feature_dim, const LearnerConfig& cfg, int horizon)
      : cfg_(cfg),
        rates_(lr_schedule(cfg, horizon)),
        rng_(mix_seed(cfg.seed, 0x5A9B1E)) {
    ModelOptions opt;
    opt.hidden_layers = cfg.hidden_layers;
    opt.hidden_width = cfg.hidden_width;
    opt.with_variation = cfg.ablation == Ablation::full ||
                         cfg.ablation == Ablation::no_fairness;
    opt.with_decoder = cfg.ablation != Ablation::no_disentangle;
    params_ = init_params(feature_dim, cfg.semantic_dim, cfg.variation_dim,
                          cfg.seed, opt);
    duals_.lambda1 = cfg.lambda_init;
    duals_.lambda2 = cfg.lambda_init;
    duals_.lambda3 = cfg.lambda_init;
  }

  // One full online step; returns the prequential record for this task.
  MetricsRecord online_step(const Task& task) {
    const TaskEval ev = evaluate_task(params_, task, cfg_.fairness);
    cum_violation_ += std::max(ev.g, 0.0);

    buffers_.register_environment(task.environment);

    std::optional<InnerStepInfo> last;
    if (!buffers_.empty())
      for (int k = 0; k < cfg_.inner_steps; ++k) last = inner_update();

    buffers_.append_task(task);

    MetricsRecord rec;
    rec.timestep = task.timestep;
    rec.environment = task.environment;
    rec.accuracy = ev.accuracy;
    rec.dp = ev.dp;
    rec.eo = ev.eo;
    rec.md = ev.md;
    rec.g = ev.g;
    rec.g_degenerate = ev.g_degenerate;
    rec.preq_loss = ev.mean_ce;
    if (last) {
      rec.recon = last->recon;
      rec.inv = last->inv;
      rec.cls = last->cls;
      rec.fair = last->fair;
      rec.total = last->total;
    }
    rec.lambda1 = duals_.lambda1;
    rec.lambda2 = duals_.lambda2;
    rec.lambda3 = duals_.lambda3;
    rec.cum_violation = cum_violation_;
    return rec;
  }

  // One inner step against the replay buffers.
  InnerStepInfo inner_update() {
    if (buffers_.empty())
      throw std::logic_error("inner_update: task pool is empty");
    Tape tape;
    LossRoots roots;
    bool used_quartets = false;
    if (buffers_.environment_count() != 1) {
      if (auto qb = buffers_.sample_quartet_batch(cfg_.quartets, rng_)) {
        roots = record_quartet_losses(tape, params_, qb->quartets, cfg_.fairness);
        used_quartets = true;
      }
    }
    if (!used_quartets) {
      const DoubletBatch db = buffers_.sample_doublet_batch(cfg_.quartets, rng_);
      roots = record_doublet_losses(tape, params_, db.doublets, cfg_.fairness);
    }
    return apply_step(tape, roots, used_quartets);
  }

  // Fixed-batch variants used by tests to pin down the update rule.
  InnerStepInfo inner_update_on(const std::vector<Quartet>& quartets) {
    Tape tape;
    LossRoots roots = record_quartet_losses(tape, params_, quartets, cfg_.fairness);
    return apply_step(tape, roots, true);
  }

  InnerStepInfo inner_update_on(const std::vector<Doublet>& doublets) {
    Tape tape;
    LossRoots roots = record_doublet_losses(tape, params_, doublets, cfg_.fairness);
    return apply_step(tape, roots, false);
  }

  const ModelParams& params() const { return params_; }
  const DualState& duals() const { return duals_; }
  const Buffers& buffers() const { return buffers_; }
  const Rates& rates() const { return rates_; }
  const LearnerConfig& config() const { return cfg_; }
  double cumulative_violation() const { return cum_violation_; }

 private:
  InnerStepInfo apply_step(Tape& tape, const LossRoots& roots, bool used_quartets) {
    const bool fair_on = cfg_.ablation != Ablation::no_fairness;
    const bool disentangle_on = cfg_.ablation != Ablation::no_disentangle;

    InnerStepInfo info;
    info.used_quartets = used_quartets;
    info.recon = roots.recon_value(tape);
    info.inv = roots.inv_value(tape);
    info.cls = roots.cls_value(tape);
    info.fair = roots.fair_value(tape);
    info.fair_degenerate = roots.fair_degenerate;

    ModelGrads g_recon = ModelGrads::zeros_like(params_);
    ModelGrads g_inv = ModelGrads::zeros_like(params_);
    ModelGrads g_cls = ModelGrads::zeros_like(params_);
    ModelGrads g_fair = ModelGrads::zeros_like(params_);
    if (roots.recon >= 0) tape.backward(roots.recon, g_recon.sinks());
    if (roots.inv >= 0) tape.backward(roots.inv, g_inv.sinks());
    tape.backward(roots.cls, g_cls.sinks());
    if (fair_on && roots.fair >= 0) tape.backward(roots.fair, g_fair.sinks());

    const double l1 = duals_.lambda1;
    const double l2 = duals_.lambda2;
    const double l3 = duals_.lambda3;

    info.total = info.cls + (fair_on ? l1 * (info.fair - cfg_.margins[0]) : 0.0) +
                 (disentangle_on
                      ? l2 * (info.recon - cfg_.margins[1]) +
                            l3 * (info.inv - cfg_.margins[2])
                      : 0.0);

    // Primal: one Adam step per block against its own objective.
    BlockGrad gs = g_cls.semantic;
    if (fair_on) gs.scale_accumulate(l1, g_fair.semantic);
    gs.scale_accumulate(l2, g_recon.semantic);
    gs.scale_accumulate(l3, g_inv.semantic);
    adam_step(params_.semantic, params_.adam_semantic, gs, rates_.eta1);

    if (params_.has_variation()) {
      BlockGrad gv = BlockGrad::zeros_like(params_.variation);
      gv.scale_accumulate(l2, g_recon.variation);
      gv.scale_accumulate(l3, g_inv.variation);
      adam_step(params_.variation, params_.adam_variation, gv, rates_.eta1);
    }

    if (params_.has_decoder()) {
      BlockGrad gd = BlockGrad::zeros_like(params_.decoder);
      gd.scale_accumulate(l2, g_recon.decoder);
      gd.scale_accumulate(l3, g_inv.decoder);
      adam_step(params_.decoder, params_.adam_decoder, gd, rates_.eta1);
    }

    BlockGrad gc = g_cls.classifier;
    if (fair_on) gc.scale_accumulate(l1, g_fair.classifier);
    gc.scale_accumulate(l3, g_inv.classifier);
    adam_step(params_.classifier, params_.adam_classifier, gc, rates_.eta1);

    // Dual: projected ascent with the losses measured before the primal
    // step.  lambda3 is gated on the environment set, not on whether this
    // particular step fell back to doublets.
    if (fair_on)
      duals_.lambda1 = dual_update(duals_.lambda1, info.fair, cfg_.margins[0], rates_.eta2);
    if (disentangle_on) {
      duals_.lambda2 = dual_update(duals_.lambda2, info.recon, cfg_.margins[1], rates_.eta2);
      if (buffers_.environment_count() != 1)
        duals_.lambda3 = dual_update(duals_.lambda3, info.inv, cfg_.margins[2], rates_.eta2);
    }
    duals_.steps += 1;
    return info;
  }

  LearnerConfig cfg_;
  Rates rates_;
  Rng rng_;
  ModelParams params_;
  DualState duals_;
  Buffers buffers_;
  double cum_violation_ = 0.0;
};

struct RunResult {
  std::vector<MetricsRecord> records;
  ModelParams final_params;
  DualState final_duals;
};

// Drives a whole stream through the learner.
inline RunResult run_stream(const TaskStream& stream, int feature_dim,
                            const LearnerConfig& cfg) {
  if (stream.empty()) throw std::invalid_argument("run_stream: empty stream");
  OnlineLearner learner(feature_dim, cfg, static_cast<int>(stream.size()));
  RunResult out;
  out.records.reserve(stream.size());
  for (const Task& task : stream) out.records.push_back(learner.online_step(task));
  out.final_params = learner.params();
  out.final_duals = learner.duals();
  return out;
}

}  // namespace fairdolce
