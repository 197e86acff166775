#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "fairdolce/sampler.hpp"

using namespace fairdolce;

namespace {

DataPoint point(double x, int z, int y, int env) {
  DataPoint p;
  p.features = {x};
  p.sensitive = z;
  p.label = y;
  p.environment = env;
  return p;
}

Task task_of(int env, std::vector<DataPoint> pts) {
  Task t;
  t.timestep = 1;
  t.environment = env;
  t.points = std::move(pts);
  return t;
}

}  // namespace

TEST_CASE("environment registration is decoupled from point storage") {
  Buffers buf;
  CHECK(buf.environment_count() == 0);
  CHECK(buf.empty());

  buf.register_environment(0);
  CHECK(buf.environment_count() == 1);
  CHECK(buf.point_count() == 0);
  CHECK(buf.empty());
  CHECK_FALSE(buf.quartets_feasible());

  // re-registering is idempotent
  buf.register_environment(0);
  CHECK(buf.environment_count() == 1);

  buf.append_task(task_of(0, {point(1.0, 1, 0, 0), point(2.0, -1, 1, 0)}));
  CHECK(buf.point_count() == 2);
  CHECK_FALSE(buf.empty());
  CHECK(buf.quartet_ready_environments() == std::vector<int>{0});
  CHECK_FALSE(buf.quartets_feasible());

  CHECK_THROWS_AS(buf.register_environment(-1), std::invalid_argument);
}

TEST_CASE("quartet feasibility needs two environments with both labels") {
  Buffers buf;
  Rng rng(1);
  buf.register_environment(0);
  buf.register_environment(1);
  buf.append_task(task_of(0, {point(1.0, 1, 0, 0), point(2.0, -1, 1, 0)}));
  // environment 1 only holds label-0 points, so it cannot host a side
  buf.append_task(task_of(1, {point(3.0, 1, 0, 1)}));
  CHECK_FALSE(buf.quartets_feasible());
  CHECK_FALSE(buf.sample_quartet_batch(4, rng).has_value());

  buf.append_task(task_of(1, {point(4.0, -1, 1, 1)}));
  CHECK(buf.quartets_feasible());
  CHECK(buf.sample_quartet_batch(4, rng).has_value());
}

TEST_CASE("sampled quartets respect the environment and label pattern") {
  Buffers buf;
  Rng rng(2);
  for (int env = 0; env < 3; ++env) {
    buf.register_environment(env);
    std::vector<DataPoint> pts;
    for (int i = 0; i < 4; ++i)
      pts.push_back(point(env * 10.0 + i, i % 2 ? 1 : -1, i % 2, env));
    buf.append_task(task_of(env, pts));
  }
  const auto batch = buf.sample_quartet_batch(200, rng);
  REQUIRE(batch.has_value());
  REQUIRE(batch->quartets.size() == 200);
  for (const Quartet& q : batch->quartets) {
    CHECK(q[0].environment == q[1].environment);
    CHECK(q[2].environment == q[3].environment);
    CHECK(q[0].environment != q[2].environment);
    CHECK(q[0].label == q[2].label);
    CHECK(q[1].label == q[3].label);
    CHECK(q[0].label != q[1].label);
  }
  CHECK(batch->flatten().size() == 800);
}

TEST_CASE("quartet sampling is uniform within each cell") {
  Buffers buf;
  Rng rng(3);
  for (int env = 0; env < 2; ++env) {
    buf.register_environment(env);
    std::vector<DataPoint> pts;
    for (int label = 0; label < 2; ++label)
      for (int i = 0; i < 5; ++i)
        pts.push_back(point(env * 100.0 + label * 10.0 + i, 1, label, env));
    buf.append_task(task_of(env, pts));
  }
  const auto batch = buf.sample_quartet_batch(1000, rng);
  REQUIRE(batch.has_value());

  // with two environments every quartet touches all four cells once, so each
  // of the five points of a cell should show up in about a fifth of draws
  std::map<double, int> counts;
  for (const Quartet& q : batch->quartets)
    for (const DataPoint& p : q) counts[p.features[0]] += 1;
  REQUIRE(counts.size() == 20);
  for (const auto& [key, c] : counts) {
    const double share = static_cast<double>(c) / 1000.0;
    CHECK(share > 0.2 - 0.035);
    CHECK(share < 0.2 + 0.035);
  }
}

TEST_CASE("doublet sampling covers environments uniformly") {
  Buffers buf;
  Rng rng(4);
  buf.register_environment(0);
  buf.register_environment(1);
  // unequal pools: the environment draw must not be weighted by size
  buf.append_task(task_of(0, {point(0.0, 1, 0, 0)}));
  std::vector<DataPoint> big;
  for (int i = 0; i < 9; ++i) big.push_back(point(10.0 + i, 1, i % 2, 1));
  buf.append_task(task_of(1, big));

  const DoubletBatch batch = buf.sample_doublet_batch(500, rng);
  REQUIRE(batch.doublets.size() == 500);
  int env0 = 0;
  for (const Doublet& d : batch.doublets) {
    CHECK(d[0].environment == d[1].environment);
    if (d[0].environment == 0) ++env0;
  }
  const double share = env0 / 500.0;
  CHECK(share > 0.45);
  CHECK(share < 0.55);
}

TEST_CASE("doublet sampling from an empty pool throws") {
  Buffers buf;
  Rng rng(5);
  buf.register_environment(0);
  CHECK_THROWS_AS(buf.sample_doublet_batch(1, rng), std::logic_error);
  CHECK_THROWS_AS(buf.sample_doublet_batch(0, rng), std::invalid_argument);
}
