#pragma once

// Reverse-mode differentiation over a recorded forward computation.
//
// The learner composes its losses from a small op set: dense blocks,
// concatenation, l1 distances, cross-entropy and affine combinations of
// scalars.  A forward pass records one node per op; backward() then sweeps
// the tape in reverse, pushing adjoints to parents and accumulating
// parameter gradients into caller-supplied BlockGrad sinks.
//
// Sinks are bound per backward pass, not per forward pass, so one recorded
// computation can be differentiated several times into different gradient
// buffers (the per-block objectives are different linear combinations of
// the same four base losses).

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fairdolce/nn.hpp"

namespace fairdolce {

constexpr double kScoreClamp = 1e-12;

inline double clamp_score(double s) {
  if (s < kScoreClamp) return kScoreClamp;
  if (s > 1.0 - kScoreClamp) return 1.0 - kScoreClamp;
  return s;
}

// Cross-entropy of a predicted score in (0,1) against a 0/1 label, with the
// score clamped away from the log singularities.
inline double cross_entropy(double score, int label) {
  if (label != 0 && label != 1)
    throw std::invalid_argument("cross_entropy: label must be 0 or 1");
  const double s = clamp_score(score);
  return label == 1 ? -std::log(s) : -std::log(1.0 - s);
}

class Tape {
 public:
  using Id = int;
  static constexpr int kNoSink = -1;

  using Sinks = std::vector<BlockGrad*>;

  Id input(Vec v) {
    return push(std::move(v), {}, nullptr);
  }

  // One dense layer: y = act(W x + b).  sink_slot selects which BlockGrad
  // receives the parameter gradient at backward time (kNoSink for frozen
  // evaluation), layer_index addresses the layer inside that BlockGrad.
  Id dense_layer(const DenseLayer& layer, Id x, int sink_slot, int layer_index) {
    const Vec& xin = nodes_[x].val;
    Vec z = matvec(layer.w, xin);
    Vec y(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
      z[i] += layer.b[i];
      y[i] = activate(layer.act, z[i]);
    }
    const DenseLayer* lp = &layer;
    Id self = push(std::move(y), std::move(z),
                   [lp, x, sink_slot, layer_index](Tape& t, Id s, const Sinks& sinks) {
                     const Node& node = t.nodes_[s];
                     const Vec& xin = t.nodes_[x].val;
                     Vec dz(node.val.size());
                     for (size_t i = 0; i < dz.size(); ++i)
                       dz[i] = node.adj[i] *
                               activate_grad(lp->act, node.aux[i], node.val[i]);
                     if (sink_slot >= 0 && sinks[sink_slot] != nullptr) {
                       LayerGrad& g = sinks[sink_slot]->layers[layer_index];
                       for (int r = 0; r < g.w.rows; ++r)
                         for (int c = 0; c < g.w.cols; ++c)
                           g.w(r, c) += dz[r] * xin[c];
                       axpy(1.0, dz, g.b);
                     }
                     axpy_into(t.nodes_[x].adj, tmatvec(lp->w, dz));
                   });
    return self;
  }

  Id block(const DenseBlock& blk, Id x, int sink_slot) {
    Id h = x;
    for (size_t li = 0; li < blk.layers.size(); ++li)
      h = dense_layer(blk.layers[li], h, sink_slot, static_cast<int>(li));
    return h;
  }

  Id concat2(Id a, Id b) {
    Vec v = concat(nodes_[a].val, nodes_[b].val);
    const size_t na = nodes_[a].val.size();
    return push(std::move(v), {}, [a, b, na](Tape& t, Id s, const Sinks&) {
      const Vec& adj = t.nodes_[s].adj;
      Vec& aa = t.nodes_[a].adj;
      Vec& ba = t.nodes_[b].adj;
      for (size_t i = 0; i < na; ++i) aa[i] += adj[i];
      for (size_t i = na; i < adj.size(); ++i) ba[i - na] += adj[i];
    });
  }

  // Scalar l1 distance between two vectors of equal length.
  Id l1_dist(Id a, Id b) {
    const Vec& va = nodes_[a].val;
    const Vec& vb = nodes_[b].val;
    if (va.size() != vb.size())
      throw std::invalid_argument("l1_dist: size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < va.size(); ++i) s += std::fabs(va[i] - vb[i]);
    return push({s}, {}, [a, b](Tape& t, Id self, const Sinks&) {
      const double adj = t.nodes_[self].adj[0];
      const Vec& va = t.nodes_[a].val;
      const Vec& vb = t.nodes_[b].val;
      Vec& aa = t.nodes_[a].adj;
      Vec& ba = t.nodes_[b].adj;
      for (size_t i = 0; i < va.size(); ++i) {
        const double d = va[i] - vb[i];
        const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        aa[i] += adj * sg;
        ba[i] -= adj * sg;
      }
    });
  }

  // Scalar cross-entropy of a scalar score node against a fixed label.
  Id cross_entropy_of(Id score, int label) {
    const double s = nodes_[score].val[0];
    const double loss = cross_entropy(s, label);
    return push({loss}, {}, [score, label](Tape& t, Id self, const Sinks&) {
      const double adj = t.nodes_[self].adj[0];
      const double sc = clamp_score(t.nodes_[score].val[0]);
      t.nodes_[score].adj[0] += adj * (sc - label) / (sc * (1.0 - sc));
    });
  }

  // Affine combination of scalar nodes: bias + sum_i coeff_i * v_i.
  Id affine_combo(double bias, std::vector<std::pair<double, Id>> terms) {
    double s = bias;
    for (const auto& [c, id] : terms) s += c * nodes_[id].val[0];
    return push({s}, {}, [terms = std::move(terms)](Tape& t, Id self, const Sinks&) {
      const double adj = t.nodes_[self].adj[0];
      for (const auto& [c, id] : terms) t.nodes_[id].adj[0] += adj * c;
    });
  }

  Id mean_of(const std::vector<Id>& scalars) {
    if (scalars.empty())
      throw std::invalid_argument("mean_of: empty term list");
    std::vector<std::pair<double, Id>> terms;
    terms.reserve(scalars.size());
    const double w = 1.0 / static_cast<double>(scalars.size());
    for (Id id : scalars) terms.emplace_back(w, id);
    return affine_combo(0.0, std::move(terms));
  }

  double value(Id id) const {
    if (nodes_[id].val.size() != 1)
      throw std::logic_error("value: node is not scalar");
    return nodes_[id].val[0];
  }

  const Vec& vec(Id id) const { return nodes_[id].val; }

  // Accumulates d(root)/d(params) into the sinks, which must be zero-filled
  // (or hold gradients the caller wants summed with) and shaped like the
  // blocks used during the forward pass.
  void backward(Id root, const Sinks& sinks) {
    if (nodes_.empty())
      throw std::logic_error("backward: no recorded computation");
    if (nodes_[root].val.size() != 1)
      throw std::invalid_argument("backward: root must be scalar");
    for (Node& n : nodes_) std::fill(n.adj.begin(), n.adj.end(), 0.0);
    nodes_[root].adj[0] = 1.0;
    for (Id i = root; i >= 0; --i)
      if (nodes_[i].back) nodes_[i].back(*this, i, sinks);
  }

 private:
  using BackFn = std::function<void(Tape&, Id, const Sinks&)>;

  struct Node {
    Vec val;
    Vec aux;  // pre-activations for dense layers, unused otherwise
    Vec adj;
    BackFn back;
  };

  static void axpy_into(Vec& dst, const Vec& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  Id push(Vec val, Vec aux, BackFn back) {
    Node n;
    n.adj.assign(val.size(), 0.0);
    n.val = std::move(val);
    n.aux = std::move(aux);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;

  friend struct TapeTestAccess;
};

}  // namespace fairdolce
