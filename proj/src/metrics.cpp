#include "rdmi/metrics.hpp"

#include "rdmi/dgm.hpp"
#include "rdmi/glm.hpp"
#include "rdmi/rng.hpp"
#include "rdmi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

namespace rdmi {

namespace {

constexpr std::uint64_t kOracleSeed = 424242;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Per-arm oracle pass: counterfactuals plus rank-based IE selection at
// mega-trial scale, reduced to (y0, y3_policy) cell counts.
std::array<double, 4> oracle_cells(const ScenarioSpec& spec, Arm arm, long n) {
  const ResponseSchedule& rates = spec.response(arm);
  const double a = std::sqrt(spec.rho);
  const double b = std::sqrt(1.0 - spec.rho);
  const std::uint64_t ehash = estimand_hash(spec);
  RngStream cf = make_stream(kOracleSeed, ehash, 0,
                             stream_tag(Lane::oracle_counterfactual, 0, arm_code(arm)));
  RngStream ie = make_stream(kOracleSeed, ehash, 0,
                             stream_tag(Lane::oracle_ie_select, 0, arm_code(arm)));

  // bits 0..3: y_on visits 0..3; bits 4..6: y_off visits 1..3
  std::vector<std::uint8_t> outcomes(static_cast<std::size_t>(n));
  std::vector<double> logit_v(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const double z_on = cf.normal();
    const double z_off = spec.copula_split ? cf.normal() : z_on;
    std::uint8_t bits = 0;
    for (int k = 0; k < 4; ++k) {
      const double u = norm_cdf(a * z_on + b * cf.normal());
      if (u <= rates.on[static_cast<std::size_t>(k)]) bits |= static_cast<std::uint8_t>(1u << k);
    }
    for (int k = 0; k < 3; ++k) {
      const double u = norm_cdf(a * z_off + b * cf.normal());
      if (u <= rates.off[static_cast<std::size_t>(k)])
        bits |= static_cast<std::uint8_t>(1u << (4 + k));
    }
    outcomes[static_cast<std::size_t>(i)] = bits;
    logit_v[static_cast<std::size_t>(i)] = logit(ie.uniform());
  }

  const std::array<long, 3> targets = ie_targets(spec.disc(arm), n);
  std::vector<std::uint8_t> ie_time(static_cast<std::size_t>(n), 0);
  for (int visit = 1; visit <= 3; ++visit) {
    const long want = targets[static_cast<std::size_t>(visit - 1)];
    if (want == 0) continue;
    std::vector<std::pair<double, long>> kappa;
    kappa.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      if (ie_time[s] != 0) continue;
      const double prev = (outcomes[s] >> (visit - 1)) & 1u;
      kappa.emplace_back(logit_v[s] - spec.omega * prev, i);
    }
    if (want > static_cast<long>(kappa.size()))
      throw std::runtime_error("metrics: infeasible oracle discontinuation schedule");
    std::nth_element(kappa.begin(), kappa.begin() + (want - 1), kappa.end());
    for (long r = 0; r < want; ++r)
      ie_time[static_cast<std::size_t>(kappa[static_cast<std::size_t>(r)].second)] =
          static_cast<std::uint8_t>(visit);
  }

  std::array<double, 4> cells{};  // index = y0 + 2 * y3
  for (long i = 0; i < n; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    const int y0 = outcomes[s] & 1u;
    const int y3 = ie_time[s] == 0 ? (outcomes[s] >> 3) & 1u : (outcomes[s] >> 6) & 1u;
    cells[static_cast<std::size_t>(y0 + 2 * y3)] += 1.0;
  }
  return cells;
}

struct CacheKey {
  std::uint64_t hash;
  long n;
  bool operator<(const CacheKey& o) const { return hash != o.hash ? hash < o.hash : n < o.n; }
};

}  // namespace

TrueEffect true_log_or(const ScenarioSpec& spec, long oracle_n) {
  if (oracle_n < 1) throw std::invalid_argument("metrics: oracle_n must be positive");
  static std::mutex mu;
  static std::map<CacheKey, TrueEffect> cache;
  const CacheKey key{estimand_hash(spec), oracle_n};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }

  DesignMatrix dm;
  dm.X.resize(16, 3);
  dm.y.resize(16);
  dm.w.resize(16);
  Eigen::Index r = 0;
  for (Arm arm : {Arm::active, Arm::control}) {
    const std::array<double, 4> cells = oracle_cells(spec, arm, oracle_n);
    for (int y0 = 0; y0 <= 1; ++y0) {
      for (int y3 = 0; y3 <= 1; ++y3) {
        dm.X(r, 0) = 1.0;
        dm.X(r, 1) = arm == Arm::active ? 1.0 : 0.0;
        dm.X(r, 2) = y0;
        dm.y[r] = y3;
        dm.w[r] = cells[static_cast<std::size_t>(y0 + 2 * y3)];
        ++r;
      }
    }
  }
  const FitResult fit = fit_logistic(dm);
  if (!fit.converged()) throw std::runtime_error("metrics: oracle fit did not converge");
  TrueEffect out;
  out.theta = fit.beta[1];
  out.mcse = std::sqrt(fit.cov(1, 1));
  out.oracle_n = oracle_n;
  out.seed = kOracleSeed;
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, out);
  return out;
}

const char* fail_reason_name(FailReason r) {
  switch (r) {
    case FailReason::none: return "none";
    case FailReason::empty_pattern: return "empty_pattern";
    case FailReason::fit_failed: return "fit_failed";
    case FailReason::analysis_failed: return "analysis_failed";
  }
  return "?";
}

SummaryRow summarize(const std::string& scenario, MiModel model,
                     const std::vector<RepResult>& rows,
                     const std::vector<RepResult>& full_rows, const TrueEffect& truth,
                     bool null_scenario) {
  SummaryRow s;
  s.scenario = scenario;
  s.model = model;
  s.null_scenario = null_scenario;
  s.n_sims = static_cast<long>(rows.size());
  s.theta_true = truth.theta;

  std::vector<double> points, ses, halfwidths;
  long covered = 0, significant = 0;
  for (const RepResult& r : rows) {
    if (!r.ok) {
      if (r.reason == FailReason::empty_pattern) ++s.n_empty_pattern;
      else if (r.reason == FailReason::fit_failed) ++s.n_fit_failed;
      else ++s.n_analysis_failed;
      continue;
    }
    points.push_back(r.est.point);
    ses.push_back(r.est.se);
    halfwidths.push_back(0.5 * (r.est.ci_high - r.est.ci_low));
    if (r.est.ci_low <= truth.theta && truth.theta <= r.est.ci_high) ++covered;
    if (r.significant) ++significant;
  }
  s.n_fitted = static_cast<long>(points.size());
  s.fitted_pct = s.n_sims > 0 ? 100.0 * static_cast<double>(s.n_fitted) /
                                    static_cast<double>(s.n_sims)
                              : kNaN;
  if (s.n_fitted == 0) {
    s.mean_point = s.point_mcse = s.bias_pct = s.bias_mcse_pct = kNaN;
    s.emp_se = s.emp_se_mcse = s.mean_model_se = s.modse_err_pct = s.modse_err_mcse_pct = kNaN;
    s.mean_halfwidth = s.halfwidth_change_pct = s.halfwidth_change_mcse_pct = kNaN;
    s.coverage_pct = s.coverage_mcse_pct = s.coverage_change_pct = kNaN;
    s.sig_rate_pct = s.sig_rate_mcse_pct = kNaN;
    return s;
  }

  const double n = static_cast<double>(s.n_fitted);
  double mean = 0.0;
  for (double p : points) mean += p;
  mean /= n;
  s.mean_point = mean;
  double ss = 0.0;
  for (double p : points) ss += (p - mean) * (p - mean);
  const double emp_var = s.n_fitted > 1 ? ss / (n - 1.0) : 0.0;
  s.emp_se = std::sqrt(emp_var);
  s.emp_se_mcse = s.n_fitted > 1 ? s.emp_se / std::sqrt(2.0 * (n - 1.0)) : kNaN;
  s.point_mcse = s.emp_se / std::sqrt(n);

  if (null_scenario || truth.theta == 0.0 || !std::isfinite(truth.theta)) {
    s.bias_pct = kNaN;
    s.bias_mcse_pct = kNaN;
  } else {
    s.bias_pct = 100.0 * (mean - truth.theta) / truth.theta;
    s.bias_mcse_pct = 100.0 * s.point_mcse / std::fabs(truth.theta);
  }

  double se_mean = 0.0;
  for (double v : ses) se_mean += v;
  se_mean /= n;
  s.mean_model_se = se_mean;
  double se_ss = 0.0;
  for (double v : ses) se_ss += (v - se_mean) * (v - se_mean);
  const double se_mean_var = s.n_fitted > 1 ? se_ss / (n - 1.0) / n : 0.0;
  if (s.emp_se > 0.0) {
    s.modse_err_pct = 100.0 * (se_mean / s.emp_se - 1.0);
    const double b2 = emp_var;
    const double var_b = s.n_fitted > 1 ? emp_var / (2.0 * (n - 1.0)) : 0.0;
    s.modse_err_mcse_pct =
        100.0 * std::sqrt(se_mean_var / b2 + se_mean * se_mean * var_b / (b2 * b2));
  } else {
    s.modse_err_pct = kNaN;
    s.modse_err_mcse_pct = kNaN;
  }

  double hw_mean = 0.0;
  for (double v : halfwidths) hw_mean += v;
  hw_mean /= n;
  s.mean_halfwidth = hw_mean;
  double hw_ss = 0.0;
  for (double v : halfwidths) hw_ss += (v - hw_mean) * (v - hw_mean);
  const double hw_mean_var = s.n_fitted > 1 ? hw_ss / (n - 1.0) / n : 0.0;

  const double c = static_cast<double>(covered) / n;
  if (null_scenario || !std::isfinite(truth.theta)) {
    s.coverage_pct = kNaN;
    s.coverage_mcse_pct = kNaN;
  } else {
    s.coverage_pct = 100.0 * c;
    s.coverage_mcse_pct = 100.0 * std::sqrt(c * (1.0 - c) / n);
  }
  const double sig = static_cast<double>(significant) / n;
  s.sig_rate_pct = 100.0 * sig;
  s.sig_rate_mcse_pct = 100.0 * std::sqrt(sig * (1.0 - sig) / n);

  // Comparison columns against the FULL reference on the same replicates.
  std::vector<double> f_halfwidths;
  long f_covered = 0, f_n = 0;
  for (const RepResult& r : full_rows) {
    if (!r.ok) continue;
    ++f_n;
    f_halfwidths.push_back(0.5 * (r.est.ci_high - r.est.ci_low));
    if (r.est.ci_low <= truth.theta && truth.theta <= r.est.ci_high) ++f_covered;
  }
  if (f_n == 0) {
    s.halfwidth_change_pct = s.halfwidth_change_mcse_pct = s.coverage_change_pct = kNaN;
    return s;
  }
  const double fn = static_cast<double>(f_n);
  double f_hw_mean = 0.0;
  for (double v : f_halfwidths) f_hw_mean += v;
  f_hw_mean /= fn;
  double f_hw_ss = 0.0;
  for (double v : f_halfwidths) f_hw_ss += (v - f_hw_mean) * (v - f_hw_mean);
  const double f_hw_mean_var = f_n > 1 ? f_hw_ss / (fn - 1.0) / fn : 0.0;
  if (f_hw_mean > 0.0) {
    s.halfwidth_change_pct = 100.0 * (hw_mean / f_hw_mean - 1.0);
    const double b2 = f_hw_mean * f_hw_mean;
    s.halfwidth_change_mcse_pct =
        100.0 * std::sqrt(hw_mean_var / b2 + hw_mean * hw_mean * f_hw_mean_var / (b2 * b2));
  } else {
    s.halfwidth_change_pct = kNaN;
    s.halfwidth_change_mcse_pct = kNaN;
  }
  const double f_cov = static_cast<double>(f_covered) / fn;
  if (!null_scenario && std::isfinite(truth.theta) && f_cov > 0.0)
    s.coverage_change_pct = 100.0 * (c / f_cov - 1.0);
  else
    s.coverage_change_pct = kNaN;
  return s;
}

}  // namespace rdmi
