// Acceptance gate.
//
// Each criterion below prints exactly one PASS/FAIL line with a short
// detail, and the process exits with the number of failures.  Thresholds
// are fixed in this file on purpose: the gate is not configurable.
//
//   1 gradient exactness      taped gradients vs central finite differences
//   2 metric oracles          group metrics vs independent counting oracles
//   3 dual feasibility        multipliers nonnegative, invariance gating
//   4 regret decay            normalized regret/violation shrink with T
//   5 fairness effect         constraint lifts DP at bounded accuracy cost
//   6 ablation ordering       component removals degrade the right metric
//   7 comparator sanity       offline oracles beat the online learner
//   8 determinism             byte-identical metrics for identical config
//   9 sampler properties      batch patterns hold, infeasibility reported

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fairdolce/fairdolce.hpp"
#include "oracles.hpp"

using namespace fairdolce;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

// ---------------------------------------------------------------------------
// 1: gradients of all four losses and their combination match central
//    finite differences to relative error < 1e-4.
// ---------------------------------------------------------------------------

Quartet gradient_check_quartet(int d, Rng& rng) {
  Quartet q;
  const int y = static_cast<int>(rng.below(2));
  const int labels[4] = {y, 1 - y, y, 1 - y};
  const int envs[4] = {0, 0, 1, 1};
  for (int i = 0; i < 4; ++i) {
    q[i].environment = envs[i];
    q[i].label = labels[i];
    q[i].sensitive = i % 2 ? -1 : 1;  // mixed groups keep the statistic alive
    q[i].features.resize(d);
    for (double& v : q[i].features) v = rng.normal();
  }
  return q;
}

// Smallest distance of any kinked quantity from its kink across the forward
// passes the losses make on this batch: every LeakyReLU pre-activation and
// every L1 reconstruction residual.  A central difference straddles the
// slope change when this distance is comparable to the step, so instances
// without clearance are resampled before the check.
double kink_clearance(const ModelParams& p, const std::vector<Quartet>& quartets) {
  double clear = 1e300;
  auto scan = [&](const DenseBlock& blk, const Vec& x) -> Vec {
    Vec h = x;
    for (const DenseLayer& l : blk.layers) {
      Vec z = matvec(l.w, h);
      for (int i = 0; i < l.w.rows; ++i) {
        const double zi = z[i] + l.b[i];
        if (l.act == Act::LeakyRelu || l.act == Act::Relu)
          clear = std::min(clear, std::fabs(zi));
        z[i] = activate(l.act, zi);
      }
      h = std::move(z);
    }
    return h;
  };
  auto concat = [](const Vec& s, const Vec& v) {
    Vec sv = s;
    sv.insert(sv.end(), v.begin(), v.end());
    return sv;
  };
  for (const Quartet& q : quartets) {
    Vec s[4], v[4];
    for (int i = 0; i < 4; ++i) {
      s[i] = scan(p.semantic, q[i].features);
      v[i] = scan(p.variation, q[i].features);
    }
    for (auto [self, partner] : {std::pair{0, 1}, std::pair{2, 3}}) {
      const Vec xhat = scan(p.decoder, concat(s[self], v[partner]));
      for (size_t i = 0; i < xhat.size(); ++i)
        clear = std::min(clear, std::fabs(q[self].features[i] - xhat[i]));
    }
    for (auto [sem, var] : {std::pair{0, 2}, std::pair{1, 3}}) {
      const Vec crossed = scan(p.decoder, concat(s[sem], v[var]));
      scan(p.semantic, crossed);
    }
  }
  return clear;
}

Outcome gradient_exactness() {
  Rng rng(401);
  double worst = 0.0;
  int instances = 0;
  int over = 0;
  for (int inst = 0; inst < 100; ++inst, ++instances) {
    const int d = 3 + inst % 4;
    const int sdim = 2 + inst % 3;
    const int vdim = 2 + (inst / 2) % 3;
    ModelParams p = init_params(d, sdim, vdim, 9000 + inst);
    std::vector<Quartet> quartets;
    do {
      quartets = {gradient_check_quartet(d, rng), gradient_check_quartet(d, rng)};
    } while (kink_clearance(p, quartets) < 1e-3);
    std::vector<DataPoint> flat;
    for (const Quartet& q : quartets)
      for (const DataPoint& pt : q) flat.push_back(pt);

    Tape tape;
    const LossRoots roots = record_quartet_losses(tape, p, quartets, FairnessMode::ddp);
    if (roots.fair < 0) return {false, "fairness path unexpectedly degenerate"};
    ModelGrads g_recon = ModelGrads::zeros_like(p);
    ModelGrads g_inv = ModelGrads::zeros_like(p);
    ModelGrads g_cls = ModelGrads::zeros_like(p);
    ModelGrads g_fair = ModelGrads::zeros_like(p);
    tape.backward(roots.recon, g_recon.sinks());
    tape.backward(roots.inv, g_inv.sinks());
    tape.backward(roots.cls, g_cls.sinks());
    tape.backward(roots.fair, g_fair.sinks());

    DualState duals;
    duals.lambda1 = rng.uniform(0.0, 2.0);
    duals.lambda2 = rng.uniform(0.0, 2.0);
    duals.lambda3 = rng.uniform(0.0, 2.0);
    const Margins margins = {0.05, 0.05, 0.05};
    ModelGrads g_total = g_cls;
    g_total.scale_accumulate(duals.lambda1, g_fair);
    g_total.scale_accumulate(duals.lambda2, g_recon);
    g_total.scale_accumulate(duals.lambda3, g_inv);

    auto eval_recon = [&]() {
      double s = 0;
      for (const Quartet& q : quartets) s += recon_loss(p, q);
      return s / quartets.size();
    };
    auto eval_inv = [&]() {
      double s = 0;
      for (const Quartet& q : quartets) s += invariance_loss(p, q);
      return s / quartets.size();
    };
    auto eval_cls = [&]() { return cls_and_fair_losses(p, flat, FairnessMode::ddp).cls; };
    auto eval_fair = [&]() { return cls_and_fair_losses(p, flat, FairnessMode::ddp).fair; };
    auto eval_total = [&]() {
      const ClsFairLosses cf = cls_and_fair_losses(p, flat, FairnessMode::ddp);
      return total_loss(cf.cls, cf.fair, eval_recon(), eval_inv(), duals, margins);
    };

    struct Case {
      std::function<double()> eval;
      ModelGrads* grads;
    };
    std::vector<Case> cases = {{eval_recon, &g_recon},
                               {eval_inv, &g_inv},
                               {eval_cls, &g_cls},
                               {eval_fair, &g_fair},
                               {eval_total, &g_total}};
    for (auto& c : cases) {
      for (auto [blk, gb] : {std::pair{&p.semantic, &c.grads->semantic},
                             std::pair{&p.variation, &c.grads->variation},
                             std::pair{&p.decoder, &c.grads->decoder},
                             std::pair{&p.classifier, &c.grads->classifier}}) {
        const std::vector<double> flat_g = oracle::flat_grad(*gb);
        const std::vector<double*> params = oracle::block_params(*blk);
        for (size_t i = 0; i < params.size(); ++i) {
          const double err = oracle::rel_err(flat_g[i], oracle::fd(c.eval, params[i]));
          if (err > worst) worst = err;
          if (err >= 1e-4) ++over;
        }
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "%d instances x 5 losses, max rel err %.2e, %d over tolerance",
                instances, worst, over);
  return {worst < 1e-4, buf};
}

// ---------------------------------------------------------------------------
// 2: ratio/difference metrics match counting oracles exactly; the relaxed
//    constraint statistic matches an independent group-means form to 1e-10.
// ---------------------------------------------------------------------------

Outcome metric_oracles() {
  Rng rng(402);
  double worst_stat = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const size_t n = 1 + rng.below(16);
    std::vector<int> preds(n), labels(n), zs(n), all(n, 1), pos_only(n);
    std::vector<double> scores(n);
    std::vector<DataPoint> batch(n);
    for (size_t i = 0; i < n; ++i) {
      preds[i] = rng.bernoulli(0.5) ? 1 : 0;
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
      zs[i] = rng.bernoulli(0.5) ? 1 : -1;
      pos_only[i] = labels[i];
      scores[i] = rng.uniform01();
      batch[i].features = {0.0};
      batch[i].label = labels[i];
      batch[i].sensitive = zs[i];
      batch[i].environment = 0;
    }

    long long a, b, c, d;
    const auto dp = demographic_parity(preds, zs);
    if (oracle::group_rates(preds, zs, all, a, b, c, d)) {
      double want = 0.0;
      oracle::ratio_metric(a, b, c, d, want);
      if (!dp || *dp != want) return {false, "dp mismatch against counting oracle"};
    } else if (dp) {
      return {false, "dp defined on a one-group batch"};
    }

    const auto eo = equalized_odds(preds, labels, zs);
    if (oracle::group_rates(preds, zs, pos_only, a, b, c, d)) {
      double want = 0.0;
      oracle::ratio_metric(a, b, c, d, want);
      if (!eo || *eo != want) return {false, "eo mismatch against counting oracle"};
    } else if (eo) {
      return {false, "eo defined without positives in both groups"};
    }

    const auto md = mean_difference(preds, zs);
    if (oracle::group_rates(preds, zs, all, a, b, c, d)) {
      const double diff = static_cast<double>(a) / static_cast<double>(b) -
                          static_cast<double>(c) / static_cast<double>(d);
      const double want = diff < 0 ? -diff : diff;
      if (!md || *md != want) return {false, "md mismatch against counting oracle"};
    } else if (md) {
      return {false, "md defined on a one-group batch"};
    }

    for (FairnessMode mode : {FairnessMode::ddp, FairnessMode::deo}) {
      bool want_deg = false;
      const double want = oracle::fairness_group_means(batch, scores, mode, &want_deg);
      const FairnessValue got = fairness_value(batch, scores, mode);
      if (got.degenerate != want_deg)
        return {false, "constraint statistic degeneracy mismatch"};
      if (!want_deg) {
        const double err = std::fabs(got.value - want);
        if (err > worst_stat) worst_stat = err;
      }
    }
  }
  return {worst_stat < 1e-10,
          fmt("1000 batches; statistic max abs err %.2e", worst_stat)};
}

// ---------------------------------------------------------------------------
// 3: on the flipped-copies stream every multiplier stays finite and
//    nonnegative, and while only one environment has been seen the
//    invariance loss is zero and its multiplier never moves.
// ---------------------------------------------------------------------------

Outcome dual_feasibility() {
  FlippedCopiesConfig fc;
  fc.base = gen_gaussian_base(300, 8, 0.7, 1);
  const TaskStream stream = gen_flipped_copies(fc);
  if (stream.size() != 6) return {false, "unexpected stream length"};

  LearnerConfig lc;
  const RunResult run = run_stream(stream, 8, lc);

  std::set<int> seen;
  bool some_inv_later = false;
  for (const MetricsRecord& r : run.records) {
    seen.insert(r.environment);
    for (double l : {r.lambda1, r.lambda2, r.lambda3})
      if (!std::isfinite(l) || l < 0.0)
        return {false, fmt("multiplier out of range at t=%g", double(r.timestep))};
    if (seen.size() == 1) {
      if (r.inv && *r.inv != 0.0)
        return {false, fmt("nonzero invariance loss at t=%g", double(r.timestep))};
      if (r.lambda3 != lc.lambda_init)
        return {false, fmt("lambda3 moved at t=%g", double(r.timestep))};
    }
    if (seen.size() > 1 && r.inv) some_inv_later = true;
  }
  if (!some_inv_later) return {false, "invariance path never exercised"};
  return {true, "6 tasks; multipliers feasible, gating exact"};
}

// ---------------------------------------------------------------------------
// 4 and 7 share five long rotated runs (10 tasks per environment, T = 60).
// ---------------------------------------------------------------------------

struct LongRun {
  RegretReport regret;
  double learner_cum = 0.0;
  double comparator_cum = 0.0;
};

const std::vector<LongRun>& long_rotated_runs() {
  static const std::vector<LongRun> runs = [] {
    std::vector<LongRun> out;
    for (std::uint64_t seed : kSeeds) {
      RotatedStreamConfig rc;
      rc.tasks_per_env = 10;
      rc.n_per_env = 240;
      rc.seed = seed;
      const TaskStream stream = gen_rotated_stream(rc);

      LearnerConfig lc;
      lc.seed = seed;
      lc.eta1 = 0.1;
      lc.eta2 = 0.003;
      lc.lambda_init = 11.0;
      const RunResult run = run_stream(stream, rc.feature_dim, lc);

      OfflineOracleConfig oc;
      oc.steps = 400;
      oc.semantic_dim = lc.semantic_dim;
      oc.seed = mix_seed(seed, 0x0C0);
      const ComparatorSequence comp = fit_comparators(stream, rc.feature_dim, oc);
      const StaticComparator fixed = fit_static_comparator(stream, rc.feature_dim, oc);

      std::vector<double> losses, gs;
      for (const MetricsRecord& r : run.records) {
        losses.push_back(r.preq_loss);
        gs.push_back(r.g);
      }
      LongRun lr;
      lr.regret = regret_report(losses, comp.per_task_loss, fixed.per_task_loss, gs,
                                path_length(comp.u));
      for (double v : losses) lr.learner_cum += v;
      for (double v : comp.per_task_loss) lr.comparator_cum += v;
      out.push_back(std::move(lr));
    }
    return out;
  }();
  return runs;
}

Outcome regret_decay() {
  const auto& runs = long_rotated_runs();
  const size_t T = runs.front().regret.fair_sdr_curve.size();
  const size_t half = T / 2;
  double reg_T = 0, reg_half = 0, vio_T = 0, vio_half = 0;
  for (const LongRun& r : runs) {
    reg_T += r.regret.fair_sdr_curve[T - 1];
    reg_half += r.regret.fair_sdr_curve[half - 1];
    vio_T += r.regret.violation_curve[T - 1];
    vio_half += r.regret.violation_curve[half - 1];
  }
  const double n = static_cast<double>(runs.size());
  reg_T /= n;
  reg_half /= n;
  vio_T /= n;
  vio_half /= n;
  const bool reg_ok = reg_T < 0.7 * reg_half;
  const bool vio_ok = vio_T < 0.7 * vio_half;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "regret/t %.4f -> %.4f, violation/t %.4f -> %.4f (need < 0.7x)",
                reg_half, reg_T, vio_half, vio_T);
  return {reg_ok && vio_ok, buf};
}

Outcome comparator_sanity() {
  const auto& runs = long_rotated_runs();
  double worst = 0.0;
  for (const LongRun& r : runs) {
    const double ratio = r.comparator_cum / r.learner_cum;
    if (ratio > worst) worst = ratio;
  }
  return {worst <= 1.05, fmt("worst comparator/learner loss ratio %.3f", worst)};
}

// ---------------------------------------------------------------------------
// 5 and 6 share default-stream ablation sweeps (T = 18, 5 seeds each).
// ---------------------------------------------------------------------------

struct AblationStats {
  double acc = 0.0;
  double dp = 0.0;
  int dp_seeds = 0;
};

AblationStats rotated_ablation(Ablation ablation) {
  AblationStats st;
  for (std::uint64_t seed : kSeeds) {
    RotatedStreamConfig rc;
    rc.seed = seed;
    const TaskStream stream = gen_rotated_stream(rc);
    LearnerConfig lc;
    lc.seed = seed;
    lc.ablation = ablation;
    lc.eta1 = 0.1;
    lc.eta2 = 0.003;
    lc.lambda_init = 11.0;
    const RunResult run = run_stream(stream, rc.feature_dim, lc);
    const WindowStats w = final_window_stats(run.records);
    st.acc += w.accuracy;
    if (w.dp) {
      st.dp += *w.dp;
      st.dp_seeds += 1;
    }
  }
  st.acc /= static_cast<double>(kSeeds.size());
  if (st.dp_seeds > 0) st.dp /= st.dp_seeds;
  return st;
}

const AblationStats& stats_full() {
  static const AblationStats s = rotated_ablation(Ablation::full);
  return s;
}
const AblationStats& stats_no_fairness() {
  static const AblationStats s = rotated_ablation(Ablation::no_fairness);
  return s;
}
const AblationStats& stats_no_variation() {
  static const AblationStats s = rotated_ablation(Ablation::no_variation_encoder);
  return s;
}

Outcome fairness_effect() {
  const AblationStats& full = stats_full();
  const AblationStats& off = stats_no_fairness();
  if (full.dp_seeds == 0 || off.dp_seeds == 0)
    return {false, "final-window dp undefined"};
  const double gap = full.dp - off.dp;
  const double acc_gap = std::fabs(full.acc - off.acc);
  const bool pass = gap >= 0.10 && acc_gap <= 0.10;
  std::string detail = fmt("dp %.3f vs %.3f, acc %.3f", full.dp, off.dp, full.acc) +
                       fmt(" vs %.3f", off.acc);
  if (full.dp < 0.8) detail += fmt(" (ratio target 0.8 missed: %.3f)", full.dp);
  return {pass, detail};
}

Outcome ablation_ordering() {
  const AblationStats& full = stats_full();
  const AblationStats& off = stats_no_fairness();
  const AblationStats& novar = stats_no_variation();
  const bool acc_ok = full.acc >= novar.acc - 0.02;
  const bool dp_ok = off.dp < full.dp;
  return {acc_ok && dp_ok,
          fmt("acc full %.3f vs no-variation %.3f; ", full.acc, novar.acc) +
              fmt("dp full %.3f vs no-fairness %.3f", full.dp, off.dp)};
}

// ---------------------------------------------------------------------------
// 8: identical config and seeds give byte-identical metrics.
// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism() {
  ExperimentConfig cfg;
  cfg.rotated.n_per_env = 60;
  cfg.rotated.feature_dim = 4;
  cfg.rotated.angles_deg = {0.0, 30.0, 60.0};
  cfg.rotated.correlations = {0.9, 0.5, 0.1};
  cfg.rotated.tasks_per_env = 2;
  cfg.learner.inner_steps = 5;
  cfg.learner.quartets = 8;
  cfg.oracle.steps = 25;
  cfg.seeds = {1, 2};
  cfg.out_dir = "acceptance_determinism";

  std::filesystem::remove_all(cfg.out_dir);
  run_experiment(cfg);
  const std::string first = slurp(std::filesystem::path(cfg.out_dir) / "metrics.csv");
  run_experiment(cfg);
  const std::string second = slurp(std::filesystem::path(cfg.out_dir) / "metrics.csv");
  std::filesystem::remove_all(cfg.out_dir);
  if (first.empty()) return {false, "no metrics written"};
  return {first == second, fmt("%g bytes compared", double(first.size()))};
}

// ---------------------------------------------------------------------------
// 9: sampler properties over 10,000 sampled tuples.
// ---------------------------------------------------------------------------

Outcome sampler_properties() {
  Rng rng(409);
  long cases = 0;
  bool saw_infeasible = false;
  while (cases < 10000) {
    Buffers buf;
    const int n_envs = 2 + static_cast<int>(rng.below(4));
    for (int env = 0; env < n_envs; ++env) {
      buf.register_environment(env);
      Task t;
      t.timestep = 1;
      t.environment = env;
      for (int label = 0; label < 2; ++label) {
        const int count = static_cast<int>(rng.below(4));  // 0..3 points
        for (int i = 0; i < count; ++i) {
          DataPoint p;
          p.features = {rng.normal()};
          p.label = label;
          p.sensitive = rng.bernoulli(0.5) ? 1 : -1;
          p.environment = env;
          t.points.push_back(std::move(p));
        }
      }
      if (!t.points.empty()) buf.append_task(t);
    }

    const auto qb = buf.sample_quartet_batch(2, rng);
    if (!buf.quartets_feasible()) {
      if (qb) return {false, "quartets sampled from an infeasible buffer"};
      saw_infeasible = true;
    } else {
      if (!qb) return {false, "feasible buffer yielded no quartets"};
      for (const Quartet& q : qb->quartets) {
        const bool ok = q[0].environment == q[1].environment &&
                        q[2].environment == q[3].environment &&
                        q[0].environment != q[2].environment &&
                        q[0].label == q[2].label && q[1].label == q[3].label &&
                        q[0].label != q[1].label;
        if (!ok) return {false, "quartet pattern violated"};
        ++cases;
      }
    }

    if (buf.empty()) {
      bool threw = false;
      try {
        buf.sample_doublet_batch(1, rng);
      } catch (const std::logic_error&) {
        threw = true;
      }
      if (!threw) return {false, "empty pool did not raise"};
      saw_infeasible = true;
    } else {
      const DoubletBatch db = buf.sample_doublet_batch(2, rng);
      for (const Doublet& d : db.doublets) {
        if (d[0].environment != d[1].environment)
          return {false, "doublet spans environments"};
        ++cases;
      }
    }
  }
  if (!saw_infeasible) {
    Buffers buf;
    bool threw = false;
    try {
      buf.sample_doublet_batch(1, rng);
    } catch (const std::logic_error&) {
      threw = true;
    }
    if (!threw) return {false, "empty pool did not raise"};
  }
  return {true, fmt("%g sampled tuples checked", double(cases))};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradient exactness", gradient_exactness},
      {"metric oracles", metric_oracles},
      {"dual feasibility", dual_feasibility},
      {"regret decay", regret_decay},
      {"fairness effect", fairness_effect},
      {"ablation ordering", ablation_ordering},
      {"comparator sanity", comparator_sanity},
      {"determinism", determinism},
      {"sampler properties", sampler_properties},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %zu %-20s %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures;
}
