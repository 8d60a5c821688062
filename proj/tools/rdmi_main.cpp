#include "rdmi/runner.hpp"
#include "rdmi/varinfl.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

int default_workers() {
  const char* env = std::getenv("RDMI_WORKERS");
  if (env == nullptr) return 1;
  try {
    const int v = std::stoi(env);
    return v >= 1 ? v : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

std::vector<rdmi::MiModel> parse_models(const std::string& list) {
  std::vector<rdmi::MiModel> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t b = item.find_first_not_of(" \t");
    const std::size_t e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(rdmi::parse_model(item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw std::runtime_error("empty model list");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieved-dropout multiple-imputation simulation engine for binary endpoints"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run a simulation study");
  std::vector<std::string> config_files, preset_names_opt;
  long sims = -1, imputations = -1, oracle_n = 10000000;
  long long seed = -1;
  int workers = default_workers();
  std::string out_dir = "out", models_list;
  bool resume = false, dump_data = false, dump_imputations = false, full_scale = false;
  run_cmd->add_option("--config", config_files, "Scenario config file (repeatable)");
  run_cmd->add_option("--preset", preset_names_opt, "Preset scenario name (repeatable)");
  run_cmd->add_option("--sims", sims, "Override replicate count");
  run_cmd->add_option("--imputations", imputations, "Override imputation count M");
  run_cmd->add_option("--seed", seed, "Override master seed");
  run_cmd->add_option("--workers", workers, "Worker thread count (env RDMI_WORKERS)");
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--models", models_list,
                      "Comma-separated models (FULL,CICS,POOLED_OICS,OICS,OITS,PICS)");
  run_cmd->add_option("--oracle-n", oracle_n, "Oracle mega-trial size per arm");
  run_cmd->add_flag("--resume", resume, "Reuse completed replicates from journal.csv");
  run_cmd->add_flag("--dump-data", dump_data, "Dump replicate 0 datasets");
  run_cmd->add_flag("--dump-imputations", dump_imputations,
                    "Dump replicate 0 completed datasets");
  run_cmd->add_flag("--full-scale", full_scale, "Paper-scale run (6000 replicates)");

  auto* preset_cmd = app.add_subcommand("preset", "Inspect built-in scenario presets");
  bool list_presets = false;
  std::string show_name;
  preset_cmd->add_flag("--list", list_presets, "List preset names");
  preset_cmd->add_option("--show", show_name, "Print one preset as a config document");

  auto* varinfl_cmd =
      app.add_subcommand("varinfl", "Variance inflation from retrieved-dropout planning counts");
  rdmi::GroupCounts grp;
  varinfl_cmd->add_option("--n1", grp.n1, "Completers on-treatment")->required();
  varinfl_cmd->add_option("--n2", grp.n2, "IE patients observed at endpoint")->required();
  varinfl_cmd->add_option("--n3", grp.n3, "IE patients missing at endpoint")->required();
  varinfl_cmd->add_option("--p1", grp.p1, "Response rate, on-treatment group")->required();
  varinfl_cmd->add_option("--p2", grp.p2, "Response rate, off-treatment groups")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      rdmi::RunManifest manifest;
      for (const std::string& path : config_files)
        manifest.scenarios.push_back(rdmi::load_scenario_file(path));
      for (const std::string& name : preset_names_opt)
        manifest.scenarios.push_back(rdmi::preset(name));
      if (manifest.scenarios.empty())
        throw std::runtime_error("no scenarios given (use --config or --preset)");
      for (rdmi::ScenarioSpec& s : manifest.scenarios) {
        if (full_scale) s.n_sims = 6000;
        if (sims > 0) s.n_sims = sims;
        if (imputations > 0) s.n_imputations = imputations;
        if (seed >= 0) s.master_seed = static_cast<std::uint64_t>(seed);
      }
      if (!models_list.empty()) manifest.models = parse_models(models_list);
      manifest.out_dir = out_dir;
      manifest.workers = workers;
      manifest.resume = resume;
      manifest.oracle_n = oracle_n;
      manifest.dump_data = dump_data;
      manifest.dump_imputations = dump_imputations;
      rdmi::run(manifest);
      return 0;
    }
    if (preset_cmd->parsed()) {
      if (list_presets) {
        for (const std::string& name : rdmi::preset_names()) std::cout << name << "\n";
        return 0;
      }
      if (!show_name.empty()) {
        std::cout << rdmi::serialize(rdmi::preset(show_name));
        return 0;
      }
      std::cerr << "preset: use --list or --show NAME\n";
      return 1;
    }
    if (varinfl_cmd->parsed()) {
      const double pi = rdmi::policy_proportion(grp);
      const double v_full = rdmi::full_data_variance(grp);
      const double v_miss = rdmi::missing_data_variance(grp);
      std::cout << "policy_proportion = " << fmt(pi) << "\n"
                << "full_data_variance = " << fmt(v_full) << "\n"
                << "missing_data_variance = " << fmt(v_miss) << "\n"
                << "absolute_increase = " << fmt(v_miss - v_full) << "\n"
                << "relative_increase = " << fmt(rdmi::relative_variance_increase(grp)) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
