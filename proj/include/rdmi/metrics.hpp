#pragma once

#include "rdmi/impute.hpp"
#include "rdmi/pool.hpp"
#include "rdmi/scenario.hpp"

#include <string>
#include <vector>

namespace rdmi {

enum class FailReason { none, empty_pattern, fit_failed, analysis_failed };

const char* fail_reason_name(FailReason r);

struct RepResult {
  long replicate = 0;
  MiModel model = MiModel::full;
  bool ok = false;
  FailReason reason = FailReason::none;
  PooledEstimate est;        // valid only when ok
  bool significant = false;  // directional: point > 0 and two-sided p < 0.05
};

struct TrueEffect {
  double theta = 0.0;
  double mcse = 0.0;
  long oracle_n = 0;        // patients per arm in the oracle mega-trial
  std::uint64_t seed = 0;   // oracle stream seed
};

// Conditional log odds ratio (Y_3 ~ arm + Y_0) on one mega-trial with the
// scenario's IE mechanism and zero missingness. Cached per (estimand, n).
TrueEffect true_log_or(const ScenarioSpec& spec, long oracle_n = 10000000);

struct SummaryRow {
  std::string scenario;
  MiModel model = MiModel::full;
  bool null_scenario = false;
  long n_sims = 0;
  long n_fitted = 0;
  long n_empty_pattern = 0;
  long n_fit_failed = 0;
  long n_analysis_failed = 0;
  double fitted_pct = 0.0;
  double theta_true = 0.0;
  double mean_point = 0.0;
  double point_mcse = 0.0;
  double bias_pct = 0.0;
  double bias_mcse_pct = 0.0;
  double emp_se = 0.0;
  double emp_se_mcse = 0.0;
  double mean_model_se = 0.0;
  double modse_err_pct = 0.0;
  double modse_err_mcse_pct = 0.0;
  double mean_halfwidth = 0.0;
  double halfwidth_change_pct = 0.0;
  double halfwidth_change_mcse_pct = 0.0;
  double coverage_pct = 0.0;
  double coverage_mcse_pct = 0.0;
  double coverage_change_pct = 0.0;
  double sig_rate_pct = 0.0;  // power, or false-positive rate under null
  double sig_rate_mcse_pct = 0.0;
};

// rows and full_rows must cover the same replicate set (one entry per
// attempted replicate, excluded ones included for the accounting).
SummaryRow summarize(const std::string& scenario, MiModel model,
                     const std::vector<RepResult>& rows,
                     const std::vector<RepResult>& full_rows, const TrueEffect& truth,
                     bool null_scenario);

}  // namespace rdmi
