#include "rdmi/pool.hpp"

#include "rdmi/glm.hpp"
#include "rdmi/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rdmi {

AnalysisResult analyze(const TrialDataset& ds, const CompletedDataset& cd) {
  const std::size_t n = ds.patients.size();
  DesignMatrix dm;
  dm.X.resize(static_cast<Eigen::Index>(n), 3);
  dm.y.resize(static_cast<Eigen::Index>(n));
  dm.w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    dm.X(r, 0) = 1.0;
    dm.X(r, 1) = ds.patients[i].arm == Arm::active ? 1.0 : 0.0;
    dm.X(r, 2) = cd.y[i][0];
    dm.y[r] = cd.y[i][3];
  }
  AnalysisResult out;
  const FitResult fit = fit_logistic(dm);
  if (!fit.converged()) return out;
  out.estimate = fit.beta[1];
  out.variance = fit.cov(1, 1);
  out.ok = true;
  return out;
}

namespace {

PooledEstimate finish(PooledEstimate est) {
  est.se = std::sqrt(est.total_var);
  const double q = t_quantile(0.975, est.df);
  est.ci_low = est.point - q * est.se;
  est.ci_high = est.point + q * est.se;
  est.p_value = est.se > 0.0 ? 2.0 * t_sf(std::fabs(est.point / est.se), est.df)
                             : (est.point == 0.0 ? 1.0 : 0.0);
  return est;
}

}  // namespace

PooledEstimate rubin_pool(const std::vector<double>& points,
                          const std::vector<double>& variances) {
  const std::size_t m = points.size();
  if (m < 2 || variances.size() != m)
    throw std::invalid_argument("pool: need at least two (point, variance) pairs");
  PooledEstimate est;
  est.m_used = static_cast<long>(m);
  const double M = static_cast<double>(m);
  double sum = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(points[i]) || !std::isfinite(variances[i]))
      throw std::invalid_argument("pool: non-finite input");
    sum += points[i];
    wsum += variances[i];
  }
  est.point = sum / M;
  est.within_var = wsum / M;
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = points[i] - est.point;
    ss += d * d;
  }
  est.between_var = ss / (M - 1.0);
  const double b_adj = (1.0 + 1.0 / M) * est.between_var;
  est.total_var = est.within_var + b_adj;
  if (est.between_var == 0.0) {
    est.df = std::numeric_limits<double>::infinity();
  } else {
    const double r = 1.0 + est.within_var / b_adj;
    est.df = (M - 1.0) * r * r;
  }
  return finish(est);
}

PooledEstimate single_estimate(double point, double variance) {
  PooledEstimate est;
  est.m_used = 1;
  est.point = point;
  est.within_var = variance;
  est.between_var = 0.0;
  est.total_var = variance;
  est.df = std::numeric_limits<double>::infinity();
  return finish(est);
}

}  // namespace rdmi
