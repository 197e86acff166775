#pragma once

// Dense network blocks for the four learnable components:
//   semantic encoder  h_s : R^d -> R^{|s|}
//   variation encoder h_v : R^d -> R^{|v|}
//   decoder           D   : R^{|s|+|v|} -> R^d
//   classifier        w   : R^{|s|} -> (0,1)
//
// Defaults follow the tabular architecture: one fully connected layer with
// LeakyReLU for encoders and decoder, one fully connected layer with
// Sigmoid for the classifier.  Optional hidden layers can be inserted via
// ModelOptions for wider experiments.

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairdolce/linalg.hpp"
#include "fairdolce/rng.hpp"

namespace fairdolce {

enum class Act { LeakyRelu, Relu, Sigmoid, Identity };

constexpr double kLeakySlope = 0.01;

inline double activate(Act a, double z) {
  switch (a) {
    case Act::LeakyRelu: return z > 0.0 ? z : kLeakySlope * z;
    case Act::Relu:      return z > 0.0 ? z : 0.0;
    case Act::Sigmoid:   return 1.0 / (1.0 + std::exp(-z));
    case Act::Identity:  return z;
  }
  throw std::logic_error("activate: unknown activation");
}

// Derivative expressed through pre-activation z and output y = act(z).
// Kinked activations take the negative branch at z == 0.
inline double activate_grad(Act a, double z, double y) {
  switch (a) {
    case Act::LeakyRelu: return z > 0.0 ? 1.0 : kLeakySlope;
    case Act::Relu:      return z > 0.0 ? 1.0 : 0.0;
    case Act::Sigmoid:   return y * (1.0 - y);
    case Act::Identity:  return 1.0;
  }
  throw std::logic_error("activate_grad: unknown activation");
}

struct DenseLayer {
  Matrix w;  // out x in
  Vec b;     // out
  Act act = Act::Identity;
};

struct DenseBlock {
  std::vector<DenseLayer> layers;

  int in_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
  int out_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }

  Vec forward(const Vec& x) const {
    Vec h = x;
    for (const DenseLayer& l : layers) {
      Vec z = matvec(l.w, h);
      for (int i = 0; i < l.w.rows; ++i) z[i] = activate(l.act, z[i] + l.b[i]);
      h = std::move(z);
    }
    return h;
  }
};

// Gradient containers mirror the parameter layout exactly.
struct LayerGrad {
  Matrix w;
  Vec b;
};

struct BlockGrad {
  std::vector<LayerGrad> layers;

  static BlockGrad zeros_like(const DenseBlock& blk) {
    BlockGrad g;
    g.layers.reserve(blk.layers.size());
    for (const DenseLayer& l : blk.layers)
      g.layers.push_back({Matrix(l.w.rows, l.w.cols), Vec(l.b.size(), 0.0)});
    return g;
  }

  void scale_accumulate(double alpha, const BlockGrad& other) {
    for (size_t i = 0; i < layers.size(); ++i) {
      axpy(alpha, other.layers[i].w.a, layers[i].w.a);
      axpy(alpha, other.layers[i].b, layers[i].b);
    }
  }
};

// Per-block Adam accumulators (first/second moments per parameter plus the
// shared step counter used for bias correction).
struct BlockAdam {
  struct LayerMoments {
    Vec mw, vw, mb, vb;
  };
  std::vector<LayerMoments> layers;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static BlockAdam zeros_like(const DenseBlock& blk) {
    BlockAdam st;
    st.layers.reserve(blk.layers.size());
    for (const DenseLayer& l : blk.layers) {
      const size_t nw = l.w.a.size();
      st.layers.push_back({Vec(nw, 0.0), Vec(nw, 0.0),
                           Vec(l.b.size(), 0.0), Vec(l.b.size(), 0.0)});
    }
    return st;
  }
};

// One Adam update of a whole block from a same-shaped gradient.
inline void adam_step(DenseBlock& blk, BlockAdam& st, const BlockGrad& grad,
                      double lr) {
  if (grad.layers.size() != blk.layers.size())
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (size_t li = 0; li < blk.layers.size(); ++li) {
    DenseLayer& l = blk.layers[li];
    const LayerGrad& g = grad.layers[li];
    BlockAdam::LayerMoments& m = st.layers[li];
    if (g.w.a.size() != l.w.a.size() || g.b.size() != l.b.size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    auto update = [&](Vec& theta, const std::vector<double>& gv, Vec& mv, Vec& vv) {
      for (size_t i = 0; i < theta.size(); ++i) {
        mv[i] = st.beta1 * mv[i] + (1.0 - st.beta1) * gv[i];
        vv[i] = st.beta2 * vv[i] + (1.0 - st.beta2) * gv[i] * gv[i];
        const double mhat = mv[i] / bc1;
        const double vhat = vv[i] / bc2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
      }
    };
    update(l.w.a, g.w.a, m.mw, m.vw);
    update(l.b, g.b, m.mb, m.vb);
  }
}

struct ModelOptions {
  int hidden_layers = 0;   // extra LeakyReLU layers per block
  int hidden_width = 16;   // width of those layers
  bool with_variation = true;  // h_v present
  bool with_decoder = true;    // D (and reconstruction path) present
};

// Model parameters: the four blocks plus their Adam states.  Blocks absent
// under an ablation have no layers.
struct ModelParams {
  DenseBlock semantic, variation, decoder, classifier;
  BlockAdam adam_semantic, adam_variation, adam_decoder, adam_classifier;
  int feature_dim = 0;
  int semantic_dim = 0;
  int variation_dim = 0;

  bool has_variation() const { return !variation.layers.empty(); }
  bool has_decoder() const { return !decoder.layers.empty(); }
};

namespace detail {

inline DenseBlock make_block(int in, int out, Act final_act,
                             const ModelOptions& opt, Rng& rng) {
  DenseBlock blk;
  int cur = in;
  for (int h = 0; h < opt.hidden_layers; ++h) {
    DenseLayer l;
    l.w = Matrix(opt.hidden_width, cur);
    l.b = Vec(opt.hidden_width, 0.0);
    l.act = Act::LeakyRelu;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cur));
    for (double& v : l.w.a) v = rng.uniform(-bound, bound);
    blk.layers.push_back(std::move(l));
    cur = opt.hidden_width;
  }
  DenseLayer l;
  l.w = Matrix(out, cur);
  l.b = Vec(out, 0.0);
  l.act = final_act;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cur));
  for (double& v : l.w.a) v = rng.uniform(-bound, bound);
  blk.layers.push_back(std::move(l));
  return blk;
}

}  // namespace detail

// Fresh model.  Weights are uniform in +-1/sqrt(fan-in), biases zero, Adam
// accumulators zeroed.  The same seed always yields bit-identical blocks.
inline ModelParams init_params(int feature_dim, int semantic_dim,
                               int variation_dim, std::uint64_t seed,
                               const ModelOptions& opt = {}) {
  if (feature_dim < 1 || semantic_dim < 1 ||
      (opt.with_variation && variation_dim < 1))
    throw std::invalid_argument("init_params: dimensions must be positive");
  Rng rng(mix_seed(seed, 0xB10C5));
  ModelParams p;
  p.feature_dim = feature_dim;
  p.semantic_dim = semantic_dim;
  p.variation_dim = opt.with_variation ? variation_dim : 0;
  p.semantic = detail::make_block(feature_dim, semantic_dim, Act::LeakyRelu, opt, rng);
  if (opt.with_variation)
    p.variation = detail::make_block(feature_dim, variation_dim, Act::LeakyRelu, opt, rng);
  if (opt.with_decoder) {
    const int dec_in = semantic_dim + (opt.with_variation ? variation_dim : 0);
    p.decoder = detail::make_block(dec_in, feature_dim, Act::LeakyRelu, opt, rng);
  }
  p.classifier = detail::make_block(semantic_dim, 1, Act::Sigmoid, opt, rng);
  p.adam_semantic = BlockAdam::zeros_like(p.semantic);
  p.adam_variation = BlockAdam::zeros_like(p.variation);
  p.adam_decoder = BlockAdam::zeros_like(p.decoder);
  p.adam_classifier = BlockAdam::zeros_like(p.classifier);
  return p;
}

inline Vec encode_semantic(const ModelParams& p, const Vec& x) {
  if (static_cast<int>(x.size()) != p.feature_dim)
    throw std::invalid_argument("encode_semantic: bad input dimension");
  return p.semantic.forward(x);
}

inline Vec encode_variation(const ModelParams& p, const Vec& x) {
  if (!p.has_variation())
    throw std::logic_error("encode_variation: model has no variation encoder");
  if (static_cast<int>(x.size()) != p.feature_dim)
    throw std::invalid_argument("encode_variation: bad input dimension");
  return p.variation.forward(x);
}

// Decodes the concatenated latent [s | v]; v is empty when the model has no
// variation encoder.
inline Vec decode(const ModelParams& p, const Vec& s, const Vec& v) {
  if (!p.has_decoder())
    throw std::logic_error("decode: model has no decoder");
  const Vec sv = concat(s, v);
  if (static_cast<int>(sv.size()) != p.decoder.in_dim())
    throw std::invalid_argument("decode: bad latent dimension");
  return p.decoder.forward(sv);
}

inline double classify(const ModelParams& p, const Vec& s) {
  if (static_cast<int>(s.size()) != p.semantic_dim)
    throw std::invalid_argument("classify: bad latent dimension");
  return p.classifier.forward(s)[0];
}

inline int predict_label(double score) { return score >= 0.5 ? 1 : 0; }

// ---------------------------------------------------------------------------
// Checkpoint io.  Text format with hex-float payloads: round-trips are
// bit-exact and files stay human-inspectable.  Only parameter blocks are
// stored, in the fixed order semantic, variation, decoder, classifier.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_block(std::ostream& os, const DenseBlock& blk) {
  os << blk.layers.size() << "\n";
  for (const DenseLayer& l : blk.layers) {
    os << l.w.rows << " " << l.w.cols << " " << static_cast<int>(l.act) << "\n";
    char buf[40];
    for (double v : l.w.a) {
      std::snprintf(buf, sizeof buf, "%a\n", v);
      os << buf;
    }
    for (double v : l.b) {
      std::snprintf(buf, sizeof buf, "%a\n", v);
      os << buf;
    }
  }
}

inline double read_hex_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated file");
  return std::strtod(tok.c_str(), nullptr);
}

inline DenseBlock read_block(std::istream& is) {
  size_t n_layers = 0;
  if (!(is >> n_layers)) throw std::runtime_error("checkpoint: truncated file");
  DenseBlock blk;
  for (size_t i = 0; i < n_layers; ++i) {
    int rows = 0, cols = 0, act = 0;
    if (!(is >> rows >> cols >> act))
      throw std::runtime_error("checkpoint: truncated file");
    DenseLayer l;
    l.w = Matrix(rows, cols);
    l.b = Vec(rows, 0.0);
    l.act = static_cast<Act>(act);
    for (double& v : l.w.a) v = read_hex_double(is);
    for (double& v : l.b) v = read_hex_double(is);
    blk.layers.push_back(std::move(l));
  }
  return blk;
}

}  // namespace detail

inline void save_params(const std::string& path, const ModelParams& p) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_params: cannot open " + path);
  os << "fairdolce-params 1\n";
  os << p.feature_dim << " " << p.semantic_dim << " " << p.variation_dim << "\n";
  detail::write_block(os, p.semantic);
  detail::write_block(os, p.variation);
  detail::write_block(os, p.decoder);
  detail::write_block(os, p.classifier);
  if (!os) throw std::runtime_error("save_params: write failed for " + path);
}

inline ModelParams load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_params: cannot open " + path);
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "fairdolce-params" || version != 1)
    throw std::runtime_error("load_params: unrecognized checkpoint header");
  ModelParams p;
  is >> p.feature_dim >> p.semantic_dim >> p.variation_dim;
  p.semantic = detail::read_block(is);
  p.variation = detail::read_block(is);
  p.decoder = detail::read_block(is);
  p.classifier = detail::read_block(is);
  p.adam_semantic = BlockAdam::zeros_like(p.semantic);
  p.adam_variation = BlockAdam::zeros_like(p.variation);
  p.adam_decoder = BlockAdam::zeros_like(p.decoder);
  p.adam_classifier = BlockAdam::zeros_like(p.classifier);
  return p;
}

}  // namespace fairdolce
