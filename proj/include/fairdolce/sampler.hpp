#pragma once

// Replay buffers and batch samplers.
//
// The learner keeps two buffers with deliberately staggered updates: the
// environment set U learns about a task's environment the moment the task
// arrives, while the task pool T only receives the task's points after the
// inner optimization loop finished.  Both phases are exposed separately
// (register_environment / append_task) so the driver controls the order.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "fairdolce/core.hpp"
#include "fairdolce/rng.hpp"

namespace fairdolce {

struct QuartetBatch {
  std::vector<Quartet> quartets;

  std::vector<DataPoint> flatten() const {
    std::vector<DataPoint> out;
    out.reserve(quartets.size() * 4);
    for (const Quartet& q : quartets)
      for (const DataPoint& p : q) out.push_back(p);
    return out;
  }
};

struct DoubletBatch {
  std::vector<Doublet> doublets;

  std::vector<DataPoint> flatten() const {
    std::vector<DataPoint> out;
    out.reserve(doublets.size() * 2);
    for (const Doublet& d : doublets)
      for (const DataPoint& p : d) out.push_back(p);
    return out;
  }
};

class Buffers {
 public:
  // Phase 1: the arriving task's environment joins U immediately.
  void register_environment(int env) {
    if (env < 0) throw std::invalid_argument("register_environment: negative id");
    environments_.insert(env);
  }

  // Phase 2: the task's points join the pool after the inner loop.  Points
  // are stored as-is; duplicates are kept.
  void append_task(const Task& task) {
    for (const DataPoint& p : task.points) {
      validate_point(p);
      cells_[p.environment][p.label].push_back(p);
      ++total_points_;
    }
  }

  int environment_count() const { return static_cast<int>(environments_.size()); }
  size_t point_count() const { return total_points_; }
  bool empty() const { return total_points_ == 0; }

  // Environments whose both label cells are populated; only those can host
  // a quartet side.
  std::vector<int> quartet_ready_environments() const {
    std::vector<int> out;
    for (const auto& [env, cells] : cells_)
      if (!cells[0].empty() && !cells[1].empty()) out.push_back(env);
    return out;
  }

  bool quartets_feasible() const {
    return quartet_ready_environments().size() >= 2;
  }

  // Draws q quartets, each independently: an ordered pair of distinct
  // quartet-ready environments uniformly, an ordered label pair uniformly,
  // then one point per (environment, label) cell uniformly with
  // replacement.  Returns nullopt when no eligible environment pair exists.
  std::optional<QuartetBatch> sample_quartet_batch(int q, Rng& rng) const {
    if (q < 1) throw std::invalid_argument("sample_quartet_batch: q must be >= 1");
    const std::vector<int> ready = quartet_ready_environments();
    if (ready.size() < 2) return std::nullopt;
    QuartetBatch batch;
    batch.quartets.reserve(q);
    for (int i = 0; i < q; ++i) {
      const size_t ei = rng.below(ready.size());
      size_t ej = rng.below(ready.size() - 1);
      if (ej >= ei) ++ej;
      const int e1 = ready[ei];
      const int e2 = ready[ej];
      const int y1 = static_cast<int>(rng.below(2));
      const int y2 = 1 - y1;
      Quartet quad = {pick(e1, y1, rng), pick(e1, y2, rng),
                      pick(e2, y1, rng), pick(e2, y2, rng)};
      batch.quartets.push_back(std::move(quad));
    }
    return batch;
  }

  // Draws q doublets: an environment uniform over environments that hold at
  // least one point, then two of its points uniformly with replacement.
  DoubletBatch sample_doublet_batch(int q, Rng& rng) const {
    if (q < 1) throw std::invalid_argument("sample_doublet_batch: q must be >= 1");
    std::vector<int> envs;
    for (const auto& [env, cells] : cells_)
      if (!cells[0].empty() || !cells[1].empty()) envs.push_back(env);
    if (envs.empty())
      throw std::logic_error("sample_doublet_batch: no buffered points");
    DoubletBatch batch;
    batch.doublets.reserve(q);
    for (int i = 0; i < q; ++i) {
      const int env = envs[rng.below(envs.size())];
      const auto& cells = cells_.at(env);
      const size_t n = cells[0].size() + cells[1].size();
      auto pick_any = [&]() -> const DataPoint& {
        const size_t k = rng.below(n);
        return k < cells[0].size() ? cells[0][k] : cells[1][k - cells[0].size()];
      };
      batch.doublets.push_back({pick_any(), pick_any()});
    }
    return batch;
  }

 private:
  const DataPoint& pick(int env, int label, Rng& rng) const {
    const auto& cell = cells_.at(env)[label];
    return cell[rng.below(cell.size())];
  }

  std::set<int> environments_;  // U
  std::map<int, std::array<std::vector<DataPoint>, 2>> cells_;  // T, by (env, label)
  size_t total_points_ = 0;
};

}  // namespace fairdolce
