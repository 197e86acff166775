#pragma once

// Synthetic stream generators.
//
// Rotated stream: per environment, features come from two class-conditional
// Gaussians (means +-1 on the first two coordinates, unit noise) whose
// first two coordinates are then rotated in-plane by a per-environment
// angle.  The sensitive attribute z tracks the label with a per-environment
// correlation: P(z=+1 | y=1) = corr and P(z=+1 | y=0) = 1 - corr, so early
// environments make z highly informative and later ones decorrelate it.
//
// Flipped copies: replicates a base dataset into several environment
// copies and negates the (non-sensitive) feature vector of the middle copy,
// giving an abrupt representation change with identical labels.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fairdolce/core.hpp"
#include "fairdolce/rng.hpp"

namespace fairdolce {

struct RotatedStreamConfig {
  int n_per_env = 600;
  int feature_dim = 8;
  std::vector<double> angles_deg = {0, 15, 30, 45, 60, 75};
  std::vector<double> correlations = {0.9, 0.7, 0.5, 0.3, 0.1, 0.05};
  int tasks_per_env = 3;
  double label_noise = 0.0;
  std::uint64_t seed = 1;
};

inline std::vector<DataPoint> gen_rotated_points(const RotatedStreamConfig& cfg) {
  if (cfg.feature_dim < 2)
    throw std::invalid_argument("gen_rotated_stream: feature_dim must be >= 2");
  if (cfg.angles_deg.size() != cfg.correlations.size() || cfg.angles_deg.empty())
    throw std::invalid_argument(
        "gen_rotated_stream: angles and correlations must align and be non-empty");
  if (cfg.n_per_env < 1)
    throw std::invalid_argument("gen_rotated_stream: n_per_env must be >= 1");
  for (double c : cfg.correlations)
    if (c < 0.0 || c > 1.0)
      throw std::invalid_argument("gen_rotated_stream: correlations must be in [0,1]");
  if (cfg.label_noise < 0.0 || cfg.label_noise > 1.0)
    throw std::invalid_argument("gen_rotated_stream: label_noise must be in [0,1]");

  Rng rng(mix_seed(cfg.seed, 0xDA7A));
  std::vector<DataPoint> points;
  points.reserve(static_cast<size_t>(cfg.n_per_env) * cfg.angles_deg.size());
  const double deg = 3.14159265358979323846 / 180.0;
  for (size_t k = 0; k < cfg.angles_deg.size(); ++k) {
    const double ca = std::cos(cfg.angles_deg[k] * deg);
    const double sa = std::sin(cfg.angles_deg[k] * deg);
    const double corr = cfg.correlations[k];
    for (int i = 0; i < cfg.n_per_env; ++i) {
      DataPoint p;
      p.environment = static_cast<int>(k);
      const int cluster = rng.bernoulli(0.5) ? 1 : 0;
      const double mu = cluster == 1 ? 1.0 : -1.0;
      p.features.resize(cfg.feature_dim);
      for (int j = 0; j < cfg.feature_dim; ++j)
        p.features[j] = (j < 2 ? mu : 0.0) + rng.normal();
      // in-plane rotation of the first two coordinates
      const double x0 = p.features[0], x1 = p.features[1];
      p.features[0] = ca * x0 - sa * x1;
      p.features[1] = sa * x0 + ca * x1;
      p.label = cluster;
      if (cfg.label_noise > 0.0 && rng.bernoulli(cfg.label_noise))
        p.label = 1 - p.label;
      const double p_z_pos = p.label == 1 ? corr : 1.0 - corr;
      p.sensitive = rng.bernoulli(p_z_pos) ? 1 : -1;
      points.push_back(std::move(p));
    }
  }
  return points;
}

inline TaskStream gen_rotated_stream(const RotatedStreamConfig& cfg) {
  return build_task_stream(gen_rotated_points(cfg), cfg.tasks_per_env);
}

struct FlippedCopiesConfig {
  std::vector<DataPoint> base;
  int n_copies = 3;
  int tasks_per_copy = 2;
};

inline std::vector<DataPoint> gen_flipped_points(const FlippedCopiesConfig& cfg) {
  if (cfg.base.empty())
    throw std::invalid_argument("gen_flipped_copies: empty base dataset");
  if (cfg.n_copies < 1)
    throw std::invalid_argument("gen_flipped_copies: n_copies must be >= 1");
  const int flipped = cfg.n_copies / 2;  // middle copy
  std::vector<DataPoint> points;
  points.reserve(cfg.base.size() * cfg.n_copies);
  for (int k = 0; k < cfg.n_copies; ++k) {
    for (const DataPoint& bp : cfg.base) {
      DataPoint p = bp;
      p.environment = k;
      if (k == flipped)
        for (double& v : p.features) v = -v;
      points.push_back(std::move(p));
    }
  }
  return points;
}

inline TaskStream gen_flipped_copies(const FlippedCopiesConfig& cfg) {
  return build_task_stream(gen_flipped_points(cfg), cfg.tasks_per_copy);
}

// Single-environment Gaussian base, e.g. as input for the flipped-copies
// generator: the angle-zero recipe of the rotated stream.
inline std::vector<DataPoint> gen_gaussian_base(int n, int feature_dim,
                                                double correlation,
                                                std::uint64_t seed) {
  RotatedStreamConfig cfg;
  cfg.n_per_env = n;
  cfg.feature_dim = feature_dim;
  cfg.angles_deg = {0.0};
  cfg.correlations = {correlation};
  cfg.seed = seed;
  return gen_rotated_points(cfg);
}

}  // namespace fairdolce
