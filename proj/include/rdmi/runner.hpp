#pragma once

#include "rdmi/metrics.hpp"
#include "rdmi/scenario.hpp"

#include <string>
#include <vector>

namespace rdmi {

struct RunManifest {
  std::vector<ScenarioSpec> scenarios;
  std::vector<MiModel> models = {MiModel::full, MiModel::cics, MiModel::pooled_oics,
                                 MiModel::oics, MiModel::oits, MiModel::pics};
  std::string out_dir = "out";
  int workers = 1;
  bool resume = false;
  long oracle_n = 10000000;
  bool dump_data = false;
  bool dump_imputations = false;
};

// One replicate of one scenario across the requested models.
std::vector<RepResult> compute_replicate(const ScenarioSpec& spec, long replicate,
                                         const std::vector<MiModel>& models);

// Executes the manifest and writes replicates.csv, summary.csv,
// convergence.csv, false_positive.csv, modse.csv, plotdata.csv and
// manifest.json into out_dir. Output bytes do not depend on worker count.
void run(const RunManifest& manifest);

}  // namespace rdmi
