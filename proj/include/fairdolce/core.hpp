#pragma once

// Core data model: labelled points with a sensitive attribute and an
// environment id, tasks (mini-batches arriving online), and the task
// stream builder that slices a dataset into an environment-contiguous
// sequence of tasks.

#include <algorithm>
#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairdolce/linalg.hpp"

namespace fairdolce {

struct DataPoint {
  Vec features;
  int sensitive = 1;    // z in {-1, +1}
  int label = 0;        // y in {0, 1}
  int environment = 0;  // e, non-negative id
};

struct Task {
  int timestep = 0;  // 1-based position in the stream
  int environment = 0;
  std::vector<DataPoint> points;
};

using TaskStream = std::vector<Task>;

// Sampled training tuples.  Quartets hold (r1, r2) from one environment and
// (r3, r4) from another, with label(r1) = label(r3) != label(r2) = label(r4).
// Doublets hold two points from a single environment.
using Quartet = std::array<DataPoint, 4>;
using Doublet = std::array<DataPoint, 2>;

// Lagrange multipliers for the three constraint losses, plus a counter of
// how many dual ascent steps have been applied.
struct DualState {
  double lambda1 = 0.0;  // fairness
  double lambda2 = 0.0;  // reconstruction
  double lambda3 = 0.0;  // invariance
  long steps = 0;
};

inline void validate_point(const DataPoint& p, size_t row_hint = 0) {
  const std::string where =
      row_hint ? " (row " + std::to_string(row_hint) + ")" : "";
  if (p.sensitive != -1 && p.sensitive != 1)
    throw std::invalid_argument("sensitive attribute must be -1 or +1" + where);
  if (p.label != 0 && p.label != 1)
    throw std::invalid_argument("label must be 0 or 1" + where);
  if (p.environment < 0)
    throw std::invalid_argument("environment id must be non-negative" + where);
}

// Slices a dataset into tasks_per_environment tasks per environment.
//
// Environments are emitted in ascending id order and each environment's
// tasks are contiguous in the stream.  Within an environment the input
// order of points is preserved; each task gets floor(n/k) points and the
// remainder goes to the last task.  Timesteps run 1..T over the whole
// stream.
inline TaskStream build_task_stream(const std::vector<DataPoint>& points,
                                    int tasks_per_environment) {
  if (points.empty())
    throw std::invalid_argument("build_task_stream: empty dataset");
  if (tasks_per_environment < 1)
    throw std::invalid_argument("build_task_stream: tasks_per_environment must be >= 1");

  std::map<int, std::vector<DataPoint>> by_env;
  for (const DataPoint& p : points) {
    validate_point(p);
    by_env[p.environment].push_back(p);
  }

  TaskStream stream;
  int t = 0;
  for (auto& [env, pts] : by_env) {
    const int n = static_cast<int>(pts.size());
    const int k = tasks_per_environment;
    if (n < k)
      throw std::invalid_argument(
          "build_task_stream: environment " + std::to_string(env) + " has " +
          std::to_string(n) + " points, fewer than " + std::to_string(k) +
          " tasks");
    const int base = n / k;
    int offset = 0;
    for (int i = 0; i < k; ++i) {
      const int size = (i == k - 1) ? n - offset : base;
      Task task;
      task.timestep = ++t;
      task.environment = env;
      task.points.assign(pts.begin() + offset, pts.begin() + offset + size);
      stream.push_back(std::move(task));
      offset += size;
    }
  }
  return stream;
}

}  // namespace fairdolce
