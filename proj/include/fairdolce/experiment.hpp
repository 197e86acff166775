#pragma once

// Experiment configuration and the end-to-end runner behind the CLI.
//
// A run is: build one task stream per seed, drive the online learner over
// it, fit the offline comparator oracles, and emit three files into the
// output directory:
//
//   metrics.csv      one row per (seed, task) with the prequential metrics
//   summary.json     per-seed and seed-averaged final-window aggregates,
//                    regret/violation accounting, and the resolved config
//   config.resolved  the resolved configuration; feeding it back through
//                    --config reproduces the run exactly
//
// All files are written to a temporary name and renamed into place, so
// readers never observe partial output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairdolce/comparator.hpp"
#include "fairdolce/core.hpp"
#include "fairdolce/csv.hpp"
#include "fairdolce/data.hpp"
#include "fairdolce/learner.hpp"
#include "fairdolce/metrics.hpp"

namespace fairdolce {

using json = nlohmann::json;

struct FlippedSourceConfig {
  int copies = 3;
  int tasks_per_copy = 2;
  int base_n = 300;        // synthetic base when no csv is given
  double base_corr = 0.7;
};

struct CsvSourceConfig {
  std::string path;
  CsvSchema schema;
  int tasks_per_env = 3;
};

struct ExperimentConfig {
  std::string source = "rotated";  // rotated | flipped | csv
  RotatedStreamConfig rotated;
  FlippedSourceConfig flipped;
  CsvSourceConfig csv;
  LearnerConfig learner;
  OfflineOracleConfig oracle;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "out";
  std::string label;  // free-form run name, echoed in the reports
};

inline const char* kMetricsHeader =
    "seed,t,env,accuracy,dp,eo,md,g,recon,inv,cls,fair,total,"
    "lambda1,lambda2,lambda3,cum_violation";

// ---------------------------------------------------------------------------
// json (de)serialization.  Unknown keys are rejected so typos in config
// files fail loudly instead of silently running defaults.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string schedule_name(Schedule s) {
  return s == Schedule::theory ? "theory" : "constant";
}

inline Schedule schedule_from(const std::string& s) {
  if (s == "theory") return Schedule::theory;
  if (s == "constant") return Schedule::constant;
  throw std::invalid_argument("config: unknown schedule '" + s + "'");
}

inline std::string fairness_name(FairnessMode m) {
  return m == FairnessMode::ddp ? "ddp" : "deo";
}

inline FairnessMode fairness_from(const std::string& s) {
  if (s == "ddp") return FairnessMode::ddp;
  if (s == "deo") return FairnessMode::deo;
  throw std::invalid_argument("config: unknown fairness mode '" + s + "'");
}

inline std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_disentangle: return "no_disentangle";
    case Ablation::no_fairness: return "no_fairness";
    case Ablation::no_variation_encoder: return "no_variation_encoder";
  }
  throw std::logic_error("ablation_name: bad value");
}

inline Ablation ablation_from(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no_disentangle") return Ablation::no_disentangle;
  if (s == "no_fairness") return Ablation::no_fairness;
  if (s == "no_variation_encoder") return Ablation::no_variation_encoder;
  throw std::invalid_argument("config: unknown ablation '" + s + "'");
}

inline void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["source"] = c.source;
  j["rotated"] = {{"n_per_env", c.rotated.n_per_env},
                  {"feature_dim", c.rotated.feature_dim},
                  {"angles_deg", c.rotated.angles_deg},
                  {"correlations", c.rotated.correlations},
                  {"tasks_per_env", c.rotated.tasks_per_env},
                  {"label_noise", c.rotated.label_noise}};
  j["flipped"] = {{"copies", c.flipped.copies},
                  {"tasks_per_copy", c.flipped.tasks_per_copy},
                  {"base_n", c.flipped.base_n},
                  {"base_corr", c.flipped.base_corr}};
  j["csv"] = {{"path", c.csv.path},
              {"sensitive_col", c.csv.schema.sensitive_col},
              {"label_col", c.csv.schema.label_col},
              {"env_col", c.csv.schema.env_col},
              {"sensitive_map", c.csv.schema.sensitive_map},
              {"tasks_per_env", c.csv.tasks_per_env}};
  j["learner"] = {{"quartets", c.learner.quartets},
                  {"inner_steps", c.learner.inner_steps},
                  {"eta1", c.learner.eta1},
                  {"eta2", c.learner.eta2},
                  {"schedule", detail::schedule_name(c.learner.schedule)},
                  {"lambda_init", c.learner.lambda_init},
                  {"margins", c.learner.margins},
                  {"fairness_mode", detail::fairness_name(c.learner.fairness)},
                  {"ablation", detail::ablation_name(c.learner.ablation)},
                  {"semantic_dim", c.learner.semantic_dim},
                  {"variation_dim", c.learner.variation_dim},
                  {"hidden_layers", c.learner.hidden_layers},
                  {"hidden_width", c.learner.hidden_width}};
  j["oracle"] = {{"steps", c.oracle.steps},
                 {"lr", c.oracle.lr},
                 {"recon_weight", c.oracle.recon_weight}};
  j["seeds"] = c.seeds;
  j["out"] = c.out_dir;
  j["label"] = c.label;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  detail::reject_unknown_keys(j,
                              {"source", "rotated", "flipped", "csv", "learner",
                               "oracle", "seeds", "out", "label"},
                              "top level");
  detail::maybe_get(j, "source", c.source);
  if (c.source != "rotated" && c.source != "flipped" && c.source != "csv")
    throw std::invalid_argument("config: unknown source '" + c.source + "'");
  if (j.contains("rotated")) {
    const json& r = j.at("rotated");
    detail::reject_unknown_keys(r,
                                {"n_per_env", "feature_dim", "angles_deg",
                                 "correlations", "tasks_per_env", "label_noise"},
                                "rotated");
    detail::maybe_get(r, "n_per_env", c.rotated.n_per_env);
    detail::maybe_get(r, "feature_dim", c.rotated.feature_dim);
    detail::maybe_get(r, "angles_deg", c.rotated.angles_deg);
    detail::maybe_get(r, "correlations", c.rotated.correlations);
    detail::maybe_get(r, "tasks_per_env", c.rotated.tasks_per_env);
    detail::maybe_get(r, "label_noise", c.rotated.label_noise);
  }
  if (j.contains("flipped")) {
    const json& f = j.at("flipped");
    detail::reject_unknown_keys(f, {"copies", "tasks_per_copy", "base_n", "base_corr"},
                                "flipped");
    detail::maybe_get(f, "copies", c.flipped.copies);
    detail::maybe_get(f, "tasks_per_copy", c.flipped.tasks_per_copy);
    detail::maybe_get(f, "base_n", c.flipped.base_n);
    detail::maybe_get(f, "base_corr", c.flipped.base_corr);
  }
  if (j.contains("csv")) {
    const json& s = j.at("csv");
    detail::reject_unknown_keys(
        s, {"path", "sensitive_col", "label_col", "env_col", "sensitive_map", "tasks_per_env"},
        "csv");
    detail::maybe_get(s, "path", c.csv.path);
    detail::maybe_get(s, "sensitive_col", c.csv.schema.sensitive_col);
    detail::maybe_get(s, "label_col", c.csv.schema.label_col);
    detail::maybe_get(s, "env_col", c.csv.schema.env_col);
    if (s.contains("sensitive_map")) {
      c.csv.schema.sensitive_map.clear();
      for (auto it = s.at("sensitive_map").begin(); it != s.at("sensitive_map").end(); ++it) {
        const int v = it.value().get<int>();
        if (v != -1 && v != 1)
          throw std::invalid_argument("config: sensitive_map values must be -1 or +1");
        c.csv.schema.sensitive_map[it.key()] = v;
      }
    }
    detail::maybe_get(s, "tasks_per_env", c.csv.tasks_per_env);
  }
  if (j.contains("learner")) {
    const json& l = j.at("learner");
    detail::reject_unknown_keys(
        l,
        {"quartets", "inner_steps", "eta1", "eta2", "schedule", "lambda_init",
         "margins", "fairness_mode", "ablation", "semantic_dim", "variation_dim",
         "hidden_layers", "hidden_width"},
        "learner");
    detail::maybe_get(l, "quartets", c.learner.quartets);
    detail::maybe_get(l, "inner_steps", c.learner.inner_steps);
    detail::maybe_get(l, "eta1", c.learner.eta1);
    detail::maybe_get(l, "eta2", c.learner.eta2);
    if (l.contains("schedule"))
      c.learner.schedule = detail::schedule_from(l.at("schedule").get<std::string>());
    detail::maybe_get(l, "lambda_init", c.learner.lambda_init);
    detail::maybe_get(l, "margins", c.learner.margins);
    if (l.contains("fairness_mode"))
      c.learner.fairness = detail::fairness_from(l.at("fairness_mode").get<std::string>());
    if (l.contains("ablation"))
      c.learner.ablation = detail::ablation_from(l.at("ablation").get<std::string>());
    detail::maybe_get(l, "semantic_dim", c.learner.semantic_dim);
    detail::maybe_get(l, "variation_dim", c.learner.variation_dim);
    detail::maybe_get(l, "hidden_layers", c.learner.hidden_layers);
    detail::maybe_get(l, "hidden_width", c.learner.hidden_width);
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    detail::reject_unknown_keys(o, {"steps", "lr", "recon_weight"}, "oracle");
    detail::maybe_get(o, "steps", c.oracle.steps);
    detail::maybe_get(o, "lr", c.oracle.lr);
    detail::maybe_get(o, "recon_weight", c.oracle.recon_weight);
  }
  detail::maybe_get(j, "seeds", c.seeds);
  detail::maybe_get(j, "out", c.out_dir);
  detail::maybe_get(j, "label", c.label);
  if (c.source == "rotated" && !c.csv.path.empty())
    throw std::invalid_argument(
        "config: a csv path conflicts with the rotated source");
  if (c.seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
  if (c.learner.quartets < 1)
    throw std::invalid_argument("config: quartets must be >= 1");
  if (c.learner.inner_steps < 1)
    throw std::invalid_argument("config: inner_steps must be >= 1");
  return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: " + path + " is not valid json: " + e.what());
  }
  return config_from_json(j);
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return to_json(a) == to_json(b);
}

// ---------------------------------------------------------------------------
// Stream construction and the runner.
// ---------------------------------------------------------------------------

inline TaskStream build_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.source == "rotated") {
    RotatedStreamConfig r = cfg.rotated;
    r.seed = seed;
    return gen_rotated_stream(r);
  }
  if (cfg.source == "flipped") {
    FlippedCopiesConfig f;
    f.n_copies = cfg.flipped.copies;
    f.tasks_per_copy = cfg.flipped.tasks_per_copy;
    if (!cfg.csv.path.empty())
      f.base = load_csv(cfg.csv.path, cfg.csv.schema);
    else
      f.base = gen_gaussian_base(cfg.flipped.base_n, cfg.rotated.feature_dim,
                                 cfg.flipped.base_corr, seed);
    return gen_flipped_copies(f);
  }
  if (cfg.source == "csv") {
    if (cfg.csv.path.empty())
      throw std::invalid_argument("config: source 'csv' requires a csv path");
    return build_task_stream(load_csv(cfg.csv.path, cfg.csv.schema),
                             cfg.csv.tasks_per_env);
  }
  throw std::invalid_argument("config: unknown source '" + cfg.source + "'");
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> records;
  WindowStats window;
  RegretReport regret;
};

inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const TaskStream stream = build_stream(cfg, seed);
  const int feature_dim = static_cast<int>(stream.front().points.front().features.size());

  LearnerConfig lc = cfg.learner;
  lc.seed = seed;
  const RunResult run = run_stream(stream, feature_dim, lc);

  OfflineOracleConfig oc = cfg.oracle;
  oc.semantic_dim = cfg.learner.semantic_dim;
  oc.hidden_layers = cfg.learner.hidden_layers;
  oc.hidden_width = cfg.learner.hidden_width;
  oc.seed = mix_seed(seed, 0x0C0);
  const ComparatorSequence comp = fit_comparators(stream, feature_dim, oc);
  const StaticComparator fixed = fit_static_comparator(stream, feature_dim, oc);

  std::vector<double> learner_losses, g_values;
  learner_losses.reserve(run.records.size());
  g_values.reserve(run.records.size());
  for (const MetricsRecord& r : run.records) {
    learner_losses.push_back(r.preq_loss);
    g_values.push_back(r.g);
  }

  SeedResult out;
  out.seed = seed;
  out.window = final_window_stats(run.records);
  out.regret = regret_report(learner_losses, comp.per_task_loss,
                             fixed.per_task_loss, g_values, path_length(comp.u));
  out.records = std::move(run.records);
  return out;
}

namespace detail {

inline std::string csv_opt(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

inline void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + tmp);
    os << content;
    if (!os) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline json opt_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

inline std::string render_metrics_csv(const std::vector<SeedResult>& results) {
  std::string out = kMetricsHeader;
  out += "\n";
  for (const SeedResult& sr : results) {
    for (const MetricsRecord& r : sr.records) {
      out += std::to_string(sr.seed);
      out += ",";
      out += std::to_string(r.timestep);
      out += ",";
      out += std::to_string(r.environment);
      out += ",";
      out += detail::format_double(r.accuracy);
      out += ",";
      out += detail::csv_opt(r.dp);
      out += ",";
      out += detail::csv_opt(r.eo);
      out += ",";
      out += detail::csv_opt(r.md);
      out += ",";
      out += detail::format_double(r.g);
      out += ",";
      out += detail::csv_opt(r.recon);
      out += ",";
      out += detail::csv_opt(r.inv);
      out += ",";
      out += detail::csv_opt(r.cls);
      out += ",";
      out += detail::csv_opt(r.fair);
      out += ",";
      out += detail::csv_opt(r.total);
      out += ",";
      out += detail::format_double(r.lambda1);
      out += ",";
      out += detail::format_double(r.lambda2);
      out += ",";
      out += detail::format_double(r.lambda3);
      out += ",";
      out += detail::format_double(r.cum_violation);
      out += "\n";
    }
  }
  return out;
}

inline json render_summary(const ExperimentConfig& cfg,
                           const std::vector<SeedResult>& results) {
  json per_seed = json::array();
  double acc = 0, g = 0, viol = 0, sdr = 0, sreg = 0, plen = 0;
  double dp = 0, eo = 0, md = 0;
  int dp_n = 0, eo_n = 0, md_n = 0;
  for (const SeedResult& sr : results) {
    json w = {{"tasks", sr.window.tasks},
              {"accuracy", sr.window.accuracy},
              {"dp", detail::opt_json(sr.window.dp)},
              {"dp_missing", sr.window.dp_missing},
              {"eo", detail::opt_json(sr.window.eo)},
              {"eo_missing", sr.window.eo_missing},
              {"md", detail::opt_json(sr.window.md)},
              {"md_missing", sr.window.md_missing},
              {"mean_g", sr.window.mean_g}};
    per_seed.push_back({{"seed", sr.seed},
                        {"final_window", w},
                        {"fair_sdr", sr.regret.fair_sdr},
                        {"static_regret", sr.regret.static_regret},
                        {"path_length", sr.regret.path_length},
                        {"cumulative_violation", sr.regret.cumulative_violation},
                        {"final_lambdas",
                         {sr.records.back().lambda1, sr.records.back().lambda2,
                          sr.records.back().lambda3}}});
    acc += sr.window.accuracy;
    g += sr.window.mean_g;
    viol += sr.regret.cumulative_violation;
    sdr += sr.regret.fair_sdr;
    sreg += sr.regret.static_regret;
    plen += sr.regret.path_length;
    if (sr.window.dp) {
      dp += *sr.window.dp;
      ++dp_n;
    }
    if (sr.window.eo) {
      eo += *sr.window.eo;
      ++eo_n;
    }
    if (sr.window.md) {
      md += *sr.window.md;
      ++md_n;
    }
  }
  const double n = static_cast<double>(results.size());
  json mean = {{"accuracy", acc / n},
               {"dp", dp_n ? json(dp / dp_n) : json(nullptr)},
               {"eo", eo_n ? json(eo / eo_n) : json(nullptr)},
               {"md", md_n ? json(md / md_n) : json(nullptr)},
               {"mean_g", g / n},
               {"fair_sdr", sdr / n},
               {"static_regret", sreg / n},
               {"path_length", plen / n},
               {"cumulative_violation", viol / n}};
  return json{{"config", to_json(cfg)}, {"per_seed", per_seed}, {"mean", mean}};
}

// Runs every seed and writes metrics.csv, summary.json and config.resolved
// into cfg.out_dir.  Returns the per-seed results for callers that want to
// inspect them programmatically.
inline std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg) {
  std::vector<SeedResult> results;
  results.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) results.push_back(run_seed(cfg, seed));

  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path dir(cfg.out_dir);
  detail::atomic_write((dir / "metrics.csv").string(), render_metrics_csv(results));
  detail::atomic_write((dir / "summary.json").string(),
                       render_summary(cfg, results).dump(2) + "\n");
  detail::atomic_write((dir / "config.resolved").string(),
                       to_json(cfg).dump(2) + "\n");
  return results;
}

}  // namespace fairdolce
