#pragma once

// The four training losses and their Lagrangian combination.
//
//   reconstruction: l1 distance between a point and its decoding from own
//     semantics plus a same-environment partner's variation factors.
//   invariance: cross-entropy of cross-decoded points (semantics from one
//     environment, variation factors from another) under the original label.
//   classification: mean cross-entropy over the batch points.
//   fairness: linear relaxation of the group constraint, evaluated once per
//     batch.  With group rates estimated from the batch itself the relaxed
//     statistic equals a weighted sum of classifier scores; the weights
//     depend only on the sensitive attribute (and, for equal-opportunity,
//     the label), so they are constants under differentiation.
//
// Each loss has a plain evaluation form on ModelParams and a taped form
// used by the learner to obtain exact gradients.

#include <array>
#include <stdexcept>
#include <vector>

#include "fairdolce/autodiff.hpp"
#include "fairdolce/core.hpp"
#include "fairdolce/nn.hpp"

namespace fairdolce {

enum class FairnessMode { ddp, deo };

struct FairnessValue {
  double value = 0.0;
  bool degenerate = false;  // base-rate estimate hit 0 or 1
};

// Per-point coefficients c_i with g = sum_i c_i * score_i.
//
// ddp: base rate p1 = P(z=+1) over the batch, every point contributes.
// deo: p1 = P(y=1, z=+1) over the batch, only y=1 points contribute.
// A batch whose estimate p1 is 0 or 1 cannot support the statistic; the
// weights come back all-zero with the degenerate flag set.
struct FairnessWeights {
  std::vector<double> coeff;
  bool degenerate = false;
};

template <typename PointRange>
inline FairnessWeights fairness_weights(const PointRange& batch, FairnessMode mode) {
  const size_t n = batch.size();
  FairnessWeights out;
  out.coeff.assign(n, 0.0);
  if (n == 0) {
    out.degenerate = true;
    return out;
  }
  size_t pos = 0, eligible = 0;
  for (size_t i = 0; i < n; ++i) {
    const DataPoint& p = batch[i];
    const bool in_scope = (mode == FairnessMode::ddp) || p.label == 1;
    if (mode == FairnessMode::ddp) {
      if (p.sensitive == 1) ++pos;
    } else {
      if (p.label == 1 && p.sensitive == 1) ++pos;
    }
    if (in_scope) ++eligible;
  }
  const double p1 = static_cast<double>(pos) / static_cast<double>(n);
  if (p1 <= 0.0 || p1 >= 1.0 || eligible == 0) {
    out.degenerate = true;
    return out;
  }
  const double norm = 1.0 / (p1 * (1.0 - p1));
  const double inv_m = 1.0 / static_cast<double>(eligible);
  for (size_t i = 0; i < n; ++i) {
    const DataPoint& p = batch[i];
    if (mode == FairnessMode::deo && p.label != 1) continue;
    const double zi = (p.sensitive + 1) * 0.5;  // {-1,+1} -> {0,1}
    out.coeff[i] = norm * (zi - p1) * inv_m;
  }
  return out;
}

// Constraint statistic for precomputed scores.
template <typename PointRange>
inline FairnessValue fairness_value(const PointRange& batch,
                                    const std::vector<double>& scores,
                                    FairnessMode mode) {
  if (scores.size() != batch.size())
    throw std::invalid_argument("fairness_value: score count mismatch");
  const FairnessWeights w = fairness_weights(batch, mode);
  if (w.degenerate) return {0.0, true};
  double g = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) g += w.coeff[i] * scores[i];
  return {g, false};
}

inline double classify_point(const ModelParams& p, const Vec& x) {
  return classify(p, encode_semantic(p, x));
}

// ---------------------------------------------------------------------------
// Plain evaluation forms.
// ---------------------------------------------------------------------------

inline double recon_loss(const ModelParams& p, const Quartet& q) {
  if (!p.has_decoder())
    throw std::logic_error("recon_loss: model has no decoder");
  auto term = [&](const DataPoint& self, const DataPoint& partner) {
    const Vec s = encode_semantic(p, self.features);
    const Vec v = p.has_variation() ? encode_variation(p, partner.features) : Vec{};
    const Vec xhat = decode(p, s, v);
    double d = 0.0;
    for (size_t i = 0; i < xhat.size(); ++i)
      d += std::fabs(self.features[i] - xhat[i]);
    return d;
  };
  return term(q[0], q[1]) + term(q[2], q[3]);
}

inline double recon_loss(const ModelParams& p, const Doublet& d) {
  if (!p.has_decoder())
    throw std::logic_error("recon_loss: model has no decoder");
  const Vec s = encode_semantic(p, d[0].features);
  const Vec v = p.has_variation() ? encode_variation(p, d[1].features) : Vec{};
  const Vec xhat = decode(p, s, v);
  double out = 0.0;
  for (size_t i = 0; i < xhat.size(); ++i)
    out += std::fabs(d[0].features[i] - xhat[i]);
  return out;
}

// Cross-decoded classification loss: semantics of r1 with variation factors
// of r3 must still classify as label(r1), and likewise for (r2, r4).
inline double invariance_loss(const ModelParams& p, const Quartet& q) {
  if (!p.has_decoder())
    throw std::logic_error("invariance_loss: model has no decoder");
  auto term = [&](const DataPoint& sem, const DataPoint& var) {
    const Vec s = encode_semantic(p, sem.features);
    const Vec v = p.has_variation() ? encode_variation(p, var.features) : Vec{};
    const Vec crossed = decode(p, s, v);
    const double score = classify(p, encode_semantic(p, crossed));
    return cross_entropy(score, sem.label);
  };
  return term(q[0], q[2]) + term(q[1], q[3]);
}

struct ClsFairLosses {
  double cls = 0.0;
  double fair = 0.0;
  bool fair_degenerate = false;
};

// Mean cross-entropy over the batch plus one evaluation of the fairness
// statistic on the same points.
template <typename PointRange>
inline ClsFairLosses cls_and_fair_losses(const ModelParams& p,
                                         const PointRange& batch,
                                         FairnessMode mode) {
  if (batch.size() == 0)
    throw std::invalid_argument("cls_and_fair_losses: empty batch");
  ClsFairLosses out;
  std::vector<double> scores(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const DataPoint& pt = batch[i];
    scores[i] = classify_point(p, pt.features);
    out.cls += inv_n * cross_entropy(scores[i], pt.label);
  }
  const FairnessValue fv = fairness_value(batch, scores, mode);
  out.fair = fv.value;
  out.fair_degenerate = fv.degenerate;
  return out;
}

template <typename PointRange>
inline FairnessValue fairness_notion(const ModelParams& p,
                                     const PointRange& batch,
                                     FairnessMode mode) {
  std::vector<double> scores(batch.size());
  for (size_t i = 0; i < batch.size(); ++i)
    scores[i] = classify_point(p, batch[i].features);
  return fairness_value(batch, scores, mode);
}

using Margins = std::array<double, 3>;  // fairness, reconstruction, invariance

// Lagrangian: cls + l1*(fair - m1) + l2*(recon - m2) + l3*(inv - m3).
inline double total_loss(double cls, double fair, double recon, double inv,
                         const DualState& duals, const Margins& margins) {
  return cls + duals.lambda1 * (fair - margins[0]) +
         duals.lambda2 * (recon - margins[1]) +
         duals.lambda3 * (inv - margins[2]);
}

// ---------------------------------------------------------------------------
// Taped forms.  One recorded graph yields all four base losses; gradients
// w.r.t. any block follow from backward passes over the relevant roots.
// ---------------------------------------------------------------------------

struct ModelGrads {
  BlockGrad semantic, variation, decoder, classifier;

  static ModelGrads zeros_like(const ModelParams& p) {
    return {BlockGrad::zeros_like(p.semantic), BlockGrad::zeros_like(p.variation),
            BlockGrad::zeros_like(p.decoder), BlockGrad::zeros_like(p.classifier)};
  }

  void scale_accumulate(double alpha, const ModelGrads& g) {
    semantic.scale_accumulate(alpha, g.semantic);
    variation.scale_accumulate(alpha, g.variation);
    decoder.scale_accumulate(alpha, g.decoder);
    classifier.scale_accumulate(alpha, g.classifier);
  }

  Tape::Sinks sinks() {
    return {&semantic, &variation, &decoder, &classifier};
  }
};

// Sink slot convention shared by every taped loss.
enum BlockSlot { kSemanticSlot = 0, kVariationSlot = 1, kDecoderSlot = 2, kClassifierSlot = 3 };

struct LossRoots {
  Tape::Id recon = -1;  // -1 when the path is absent
  Tape::Id inv = -1;
  Tape::Id cls = -1;
  Tape::Id fair = -1;
  bool fair_degenerate = false;

  double recon_value(const Tape& t) const { return recon >= 0 ? t.value(recon) : 0.0; }
  double inv_value(const Tape& t) const { return inv >= 0 ? t.value(inv) : 0.0; }
  double cls_value(const Tape& t) const { return cls >= 0 ? t.value(cls) : 0.0; }
  double fair_value(const Tape& t) const { return fair >= 0 ? t.value(fair) : 0.0; }
};

namespace detail {

struct TapedPoint {
  const DataPoint* pt;
  Tape::Id x;
  Tape::Id s;
  Tape::Id v;  // -1 without variation encoder
};

inline TapedPoint tape_point(Tape& t, const ModelParams& p, const DataPoint& pt,
                             bool need_variation) {
  TapedPoint out;
  out.pt = &pt;
  out.x = t.input(pt.features);
  out.s = t.block(p.semantic, out.x, kSemanticSlot);
  out.v = (need_variation && p.has_variation())
              ? t.block(p.variation, out.x, kVariationSlot)
              : -1;
  return out;
}

inline Tape::Id tape_decode(Tape& t, const ModelParams& p, const TapedPoint& sem,
                            const TapedPoint& var) {
  const Tape::Id latent =
      var.v >= 0 ? t.concat2(sem.s, var.v) : sem.s;
  return t.block(p.decoder, latent, kDecoderSlot);
}

// Shared tail: classification and fairness over every batch position.
inline void tape_cls_fair(Tape& t, const ModelParams& p,
                          const std::vector<TapedPoint>& pts, FairnessMode mode,
                          LossRoots& roots) {
  std::vector<Tape::Id> ces;
  std::vector<Tape::Id> scores;
  ces.reserve(pts.size());
  scores.reserve(pts.size());
  std::vector<const DataPoint*> raw;
  raw.reserve(pts.size());
  for (const TapedPoint& tp : pts) {
    const Tape::Id score = t.block(p.classifier, tp.s, kClassifierSlot);
    scores.push_back(score);
    ces.push_back(t.cross_entropy_of(score, tp.pt->label));
    raw.push_back(tp.pt);
  }
  roots.cls = t.mean_of(ces);
  struct PtrRange {
    const std::vector<const DataPoint*>& v;
    size_t size() const { return v.size(); }
    const DataPoint& operator[](size_t i) const { return *v[i]; }
  };
  const FairnessWeights w = fairness_weights(PtrRange{raw}, mode);
  roots.fair_degenerate = w.degenerate;
  if (!w.degenerate) {
    std::vector<std::pair<double, Tape::Id>> terms;
    for (size_t i = 0; i < scores.size(); ++i)
      if (w.coeff[i] != 0.0) terms.emplace_back(w.coeff[i], scores[i]);
    roots.fair = t.affine_combo(0.0, std::move(terms));
  }
}

}  // namespace detail

// Records all losses for a quartet batch.  Reconstruction and invariance
// are means over quartets; classification and fairness run over all 4*Q
// batch positions (duplicates from with-replacement sampling count twice).
inline LossRoots record_quartet_losses(Tape& t, const ModelParams& p,
                                       const std::vector<Quartet>& quartets,
                                       FairnessMode mode) {
  if (quartets.empty())
    throw std::invalid_argument("record_quartet_losses: empty batch");
  LossRoots roots;
  std::vector<detail::TapedPoint> pts;
  pts.reserve(quartets.size() * 4);
  std::vector<Tape::Id> recon_terms, inv_terms;
  for (const Quartet& q : quartets) {
    const size_t base = pts.size();
    for (int i = 0; i < 4; ++i)
      pts.push_back(detail::tape_point(t, p, q[i], p.has_decoder()));
    if (p.has_decoder()) {
      const auto& r1 = pts[base + 0];
      const auto& r2 = pts[base + 1];
      const auto& r3 = pts[base + 2];
      const auto& r4 = pts[base + 3];
      // dist(x1, D(s1, v2)) + dist(x3, D(s3, v4))
      const Tape::Id rec = t.affine_combo(
          0.0, {{1.0, t.l1_dist(r1.x, detail::tape_decode(t, p, r1, r2))},
                {1.0, t.l1_dist(r3.x, detail::tape_decode(t, p, r3, r4))}});
      recon_terms.push_back(rec);
      // cross decode: semantics of r1 with variation of r3 and vice versa
      // for (r2, r4); the crossed point must keep its semantic label.
      auto inv_term = [&](const detail::TapedPoint& sem,
                          const detail::TapedPoint& var) {
        const Tape::Id crossed = detail::tape_decode(t, p, sem, var);
        const Tape::Id s2 = t.block(p.semantic, crossed, kSemanticSlot);
        const Tape::Id score = t.block(p.classifier, s2, kClassifierSlot);
        return t.cross_entropy_of(score, sem.pt->label);
      };
      inv_terms.push_back(t.affine_combo(0.0, {{1.0, inv_term(r1, r3)},
                                               {1.0, inv_term(r2, r4)}}));
    }
  }
  if (!recon_terms.empty()) roots.recon = t.mean_of(recon_terms);
  if (!inv_terms.empty()) roots.inv = t.mean_of(inv_terms);
  detail::tape_cls_fair(t, p, pts, mode, roots);
  return roots;
}

// Doublet batches: reconstruction only (first point decoded with the second
// point's variation factors); there is no cross-environment term.
inline LossRoots record_doublet_losses(Tape& t, const ModelParams& p,
                                       const std::vector<Doublet>& doublets,
                                       FairnessMode mode) {
  if (doublets.empty())
    throw std::invalid_argument("record_doublet_losses: empty batch");
  LossRoots roots;
  std::vector<detail::TapedPoint> pts;
  pts.reserve(doublets.size() * 2);
  std::vector<Tape::Id> recon_terms;
  for (const Doublet& d : doublets) {
    const size_t base = pts.size();
    for (int i = 0; i < 2; ++i)
      pts.push_back(detail::tape_point(t, p, d[i], p.has_decoder()));
    if (p.has_decoder()) {
      const auto& r1 = pts[base + 0];
      const auto& r2 = pts[base + 1];
      recon_terms.push_back(t.l1_dist(r1.x, detail::tape_decode(t, p, r1, r2)));
    }
  }
  if (!recon_terms.empty()) roots.recon = t.mean_of(recon_terms);
  detail::tape_cls_fair(t, p, pts, mode, roots);
  return roots;
}

}  // namespace fairdolce
