// Command line front end.
//
// Flags override values from an optional --config json file; the fully
// resolved configuration is echoed to <out>/config.resolved, which can be
// passed back via --config to reproduce a run.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairdolce/fairdolce.hpp"

namespace {

std::vector<double> parse_double_list(const std::string& s, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "'" + tok + "' is not a number");
    }
  }
  if (out.empty()) throw CLI::ValidationError(flag, "empty list");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--seeds", "'" + tok + "' is not a seed");
    }
  }
  if (out.empty()) throw CLI::ValidationError("--seeds", "empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairdolce: fairness-constrained online learning over task streams"};

  std::string config_path;
  std::string source, schedule, fairness_mode, ablation, out_dir, run_label;
  std::string csv_path, sensitive_col, label_col, env_col, sensitive_map;
  std::string margins_str, seeds_str, angles_str, correlations_str;
  int q = 0, inner_steps = 0, n_per_env = 0, tasks_per_env = 0, feature_dim = 0;
  int copies = 0, tasks_per_copy = 0, base_n = 0;
  int semantic_dim = 0, variation_dim = 0, hidden_layers = -1, hidden_width = 0;
  int oracle_steps = 0;
  double eta1 = 0, eta2 = 0, lambda_init = 0, label_noise = 0, base_corr = 0;
  double oracle_lr = 0;

  app.add_option("--config", config_path, "json config file; flags override its values");
  app.add_option("--source", source, "data source: rotated | flipped | csv");
  app.add_option("--csv", csv_path, "csv dataset path (source csv, or base for flipped)");
  app.add_option("--sensitive-col", sensitive_col, "csv column holding the sensitive attribute");
  app.add_option("--label-col", label_col, "csv column holding the 0/1 label");
  app.add_option("--env-col", env_col, "csv column holding the environment id");
  app.add_option("--sensitive-map", sensitive_map,
                 "two tokens 'neg,pos' mapped to -1,+1 (default accepts -1/1/+1)");
  app.add_option("--tasks-per-env", tasks_per_env, "tasks per environment for csv sources");
  app.add_option("--Q", q, "quartets (or doublets) drawn per inner step");
  app.add_option("--inner-steps", inner_steps, "inner optimization steps per task");
  app.add_option("--eta1", eta1, "base primal learning rate");
  app.add_option("--eta2", eta2, "base dual learning rate");
  app.add_option("--margins", margins_str, "constraint margins 'fair,recon,inv' (or one value for all)");
  app.add_option("--schedule", schedule, "learning rate schedule: theory | constant");
  app.add_option("--fairness-mode", fairness_mode, "constraint notion: ddp | deo");
  app.add_option("--ablation", ablation,
                 "full | no_disentangle | no_fairness | no_variation_encoder");
  app.add_option("--lambda-init", lambda_init, "initial value of all multipliers");
  app.add_option("--semantic-dim", semantic_dim, "semantic latent width");
  app.add_option("--variation-dim", variation_dim, "variation latent width");
  app.add_option("--hidden-layers", hidden_layers, "extra hidden layers per block");
  app.add_option("--hidden-width", hidden_width, "width of extra hidden layers");
  app.add_option("--n-per-env", n_per_env, "rotated stream: points per environment");
  app.add_option("--feature-dim", feature_dim, "rotated stream: feature dimension");
  app.add_option("--angles", angles_str, "rotated stream: comma list of angles (degrees)");
  app.add_option("--correlations", correlations_str,
                 "rotated stream: comma list of label/sensitive correlations");
  app.add_option("--label-noise", label_noise, "rotated stream: label flip probability");
  app.add_option("--copies", copies, "flipped stream: number of copies");
  app.add_option("--tasks-per-copy", tasks_per_copy, "flipped stream: tasks per copy");
  app.add_option("--base-n", base_n, "flipped stream: synthetic base size");
  app.add_option("--base-corr", base_corr, "flipped stream: synthetic base correlation");
  app.add_option("--oracle-steps", oracle_steps, "comparator oracle: full-batch steps");
  app.add_option("--oracle-lr", oracle_lr, "comparator oracle: learning rate");
  app.add_option("--seeds", seeds_str, "comma list of run seeds");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--label", run_label, "free-form run name echoed in the reports");

  CLI11_PARSE(app, argc, argv);

  try {
    fairdolce::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = fairdolce::load_config_file(config_path);

    auto set = [&](const char* flag) { return app.count(flag) > 0; };
    if (set("--source")) cfg.source = source;
    if (set("--csv")) cfg.csv.path = csv_path;
    if (set("--sensitive-col")) cfg.csv.schema.sensitive_col = sensitive_col;
    if (set("--label-col")) cfg.csv.schema.label_col = label_col;
    if (set("--env-col")) cfg.csv.schema.env_col = env_col;
    if (set("--sensitive-map")) {
      std::stringstream ss(sensitive_map);
      std::string neg, pos;
      if (!std::getline(ss, neg, ',') || !std::getline(ss, pos, ',') || ss.rdbuf()->in_avail() > 0 ||
          neg.empty() || pos.empty() || neg == pos)
        throw std::invalid_argument("--sensitive-map wants exactly two distinct tokens 'neg,pos'");
      cfg.csv.schema.sensitive_map = {{neg, -1}, {pos, 1}};
    }
    if (set("--tasks-per-env")) cfg.csv.tasks_per_env = tasks_per_env;
    if (set("--Q")) cfg.learner.quartets = q;
    if (set("--inner-steps")) cfg.learner.inner_steps = inner_steps;
    if (set("--eta1")) cfg.learner.eta1 = eta1;
    if (set("--eta2")) cfg.learner.eta2 = eta2;
    if (set("--margins")) {
      const std::vector<double> m = parse_double_list(margins_str, "--margins");
      if (m.size() == 1)
        cfg.learner.margins = {m[0], m[0], m[0]};
      else if (m.size() == 3)
        cfg.learner.margins = {m[0], m[1], m[2]};
      else
        throw std::invalid_argument("--margins wants one or three values");
    }
    if (set("--schedule")) cfg.learner.schedule = fairdolce::detail::schedule_from(schedule);
    if (set("--fairness-mode"))
      cfg.learner.fairness = fairdolce::detail::fairness_from(fairness_mode);
    if (set("--ablation")) cfg.learner.ablation = fairdolce::detail::ablation_from(ablation);
    if (set("--lambda-init")) cfg.learner.lambda_init = lambda_init;
    if (set("--semantic-dim")) cfg.learner.semantic_dim = semantic_dim;
    if (set("--variation-dim")) cfg.learner.variation_dim = variation_dim;
    if (set("--hidden-layers")) cfg.learner.hidden_layers = hidden_layers;
    if (set("--hidden-width")) cfg.learner.hidden_width = hidden_width;
    if (set("--n-per-env")) cfg.rotated.n_per_env = n_per_env;
    if (set("--feature-dim")) cfg.rotated.feature_dim = feature_dim;
    if (set("--angles")) cfg.rotated.angles_deg = parse_double_list(angles_str, "--angles");
    if (set("--correlations"))
      cfg.rotated.correlations = parse_double_list(correlations_str, "--correlations");
    if (set("--label-noise")) cfg.rotated.label_noise = label_noise;
    if (set("--copies")) cfg.flipped.copies = copies;
    if (set("--tasks-per-copy")) cfg.flipped.tasks_per_copy = tasks_per_copy;
    if (set("--base-n")) cfg.flipped.base_n = base_n;
    if (set("--base-corr")) cfg.flipped.base_corr = base_corr;
    if (set("--oracle-steps")) cfg.oracle.steps = oracle_steps;
    if (set("--oracle-lr")) cfg.oracle.lr = oracle_lr;
    if (set("--seeds")) cfg.seeds = parse_seed_list(seeds_str);
    if (set("--out")) cfg.out_dir = out_dir;
    if (set("--label")) cfg.label = run_label;

    // re-validate the merged result through the same path as config files
    cfg = fairdolce::config_from_json(fairdolce::to_json(cfg));

    fairdolce::run_experiment(cfg);
    std::cout << "wrote " << cfg.out_dir << "/metrics.csv, summary.json, config.resolved\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
