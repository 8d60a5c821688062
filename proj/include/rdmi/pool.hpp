#pragma once

#include "rdmi/dgm.hpp"
#include "rdmi/impute.hpp"

#include <vector>

namespace rdmi {

struct AnalysisResult {
  double estimate = 0.0;
  double variance = 0.0;
  bool ok = false;
};

// logit P(Y_3 = 1) = b0 + b1 * 1[arm = active] + b2 * Y_0; returns (b1, Var b1).
AnalysisResult analyze(const TrialDataset& ds, const CompletedDataset& cd);

struct PooledEstimate {
  double point = 0.0;
  double within_var = 0.0;
  double between_var = 0.0;
  double total_var = 0.0;
  double se = 0.0;
  double df = 0.0;  // infinity when between_var == 0
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  long m_used = 0;
};

PooledEstimate rubin_pool(const std::vector<double>& points,
                          const std::vector<double>& variances);

// Single-fit inference with a normal Wald interval (no imputation).
PooledEstimate single_estimate(double point, double variance);

}  // namespace rdmi
