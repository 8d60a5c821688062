#include "rdmi/glm.hpp"

#include "rdmi/rng.hpp"
#include "rdmi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rdmi {

namespace {

constexpr double kCoefBound = 500.0;
const double kJitterLadder[] = {1e-12, 1e-10, 1e-8, 1e-6};

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

void check_design(const DesignMatrix& dm) {
  if (dm.y.size() != dm.X.rows() || dm.w.size() != dm.X.rows())
    throw std::invalid_argument("glm: design row counts disagree");
  if (dm.X.rows() == 0 || dm.X.cols() == 0)
    throw std::invalid_argument("glm: empty design");
  if (!dm.X.allFinite() || !dm.y.allFinite() || !dm.w.allFinite())
    throw std::invalid_argument("glm: non-finite design entries");
}

// Solves H x = g, escalating a diagonal ridge until the solution is finite.
std::optional<Eigen::VectorXd> solve_jittered(const Eigen::MatrixXd& H,
                                              const Eigen::VectorXd& g) {
  const double scale = H.diagonal().maxCoeff();
  Eigen::VectorXd x = H.ldlt().solve(g);
  if (x.allFinite()) return x;
  for (double lambda : kJitterLadder) {
    Eigen::MatrixXd Hj = H;
    Hj.diagonal().array() += lambda * (scale > 0.0 ? scale : 1.0);
    x = Hj.ldlt().solve(g);
    if (x.allFinite()) return x;
  }
  return std::nullopt;
}

std::optional<Eigen::MatrixXd> invert_jittered(const Eigen::MatrixXd& H) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(H.rows(), H.cols());
  const double scale = H.diagonal().maxCoeff();
  Eigen::MatrixXd V = H.ldlt().solve(I);
  if (V.allFinite()) return Eigen::MatrixXd(0.5 * (V + V.transpose()));
  for (double lambda : kJitterLadder) {
    Eigen::MatrixXd Hj = H;
    Hj.diagonal().array() += lambda * (scale > 0.0 ? scale : 1.0);
    V = Hj.ldlt().solve(I);
    if (V.allFinite()) return Eigen::MatrixXd(0.5 * (V + V.transpose()));
  }
  return std::nullopt;
}

}  // namespace

double logistic_loglik(const DesignMatrix& dm, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = dm.X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += dm.w[i] * (dm.y[i] * eta[i] - softplus(eta[i]));
  return ll;
}

Eigen::VectorXd logistic_score(const DesignMatrix& dm, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = dm.X * beta;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    resid[i] = dm.w[i] * (dm.y[i] - expit(eta[i]));
  return dm.X.transpose() * resid;
}

FitResult fit_logistic(const DesignMatrix& dm, double tol, int max_iter) {
  check_design(dm);
  const Eigen::Index k = dm.X.cols();
  FitResult out;
  out.beta = Eigen::VectorXd::Zero(k);
  double ll = logistic_loglik(dm, out.beta);

  for (int iter = 1; iter <= max_iter; ++iter) {
    out.iterations = iter;
    const Eigen::VectorXd eta = dm.X * out.beta;
    Eigen::VectorXd resid(eta.size()), irls_w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double p = expit(eta[i]);
      resid[i] = dm.w[i] * (dm.y[i] - p);
      irls_w[i] = dm.w[i] * p * (1.0 - p);
    }
    const Eigen::VectorXd score = dm.X.transpose() * resid;
    if (score.lpNorm<Eigen::Infinity>() < tol) {
      const Eigen::MatrixXd H = dm.X.transpose() * irls_w.asDiagonal() * dm.X;
      auto V = invert_jittered(H);
      if (!V) {
        out.status = FitStatus::rank_deficient;
        return out;
      }
      out.cov = *V;
      out.status = FitStatus::ok;
      out.max_abs_coef = out.beta.lpNorm<Eigen::Infinity>();
      return out;
    }
    const Eigen::MatrixXd H = dm.X.transpose() * irls_w.asDiagonal() * dm.X;
    auto step = solve_jittered(H, score);
    if (!step) {
      out.status = FitStatus::rank_deficient;
      out.max_abs_coef = out.beta.lpNorm<Eigen::Infinity>();
      return out;
    }
    Eigen::VectorXd delta = *step;
    Eigen::VectorXd candidate = out.beta + delta;
    double ll_new = logistic_loglik(dm, candidate);
    int halvings = 0;
    while ((!std::isfinite(ll_new) || ll_new < ll - 1e-12 * (1.0 + std::fabs(ll))) &&
           halvings < 32) {
      delta *= 0.5;
      candidate = out.beta + delta;
      ll_new = logistic_loglik(dm, candidate);
      ++halvings;
    }
    out.beta = candidate;
    ll = ll_new;
    out.max_abs_coef = out.beta.lpNorm<Eigen::Infinity>();
    if (out.max_abs_coef > kCoefBound) {
      out.status = FitStatus::non_converged;
      return out;
    }
  }
  out.status = FitStatus::non_converged;
  return out;
}

DesignMatrix augment(const DesignMatrix& dm) {
  check_design(dm);
  const Eigen::Index n = dm.X.rows();
  const Eigen::Index k = dm.X.cols();
  const double wsum = dm.w.sum();
  if (wsum <= 0.0) throw std::invalid_argument("glm: augment needs positive total weight");

  Eigen::VectorXd mean = (dm.X.transpose() * dm.w) / wsum;
  Eigen::VectorXd sd(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = dm.X(i, j) - mean[j];
      ss += dm.w[i] * d * d;
    }
    sd[j] = std::sqrt(ss / wsum);
  }

  Eigen::Index extra = 0;
  for (Eigen::Index j = 0; j < k; ++j) extra += sd[j] > 0.0 ? 4 : 2;

  DesignMatrix out;
  out.X.resize(n + extra, k);
  out.y.resize(n + extra);
  out.w.resize(n + extra);
  out.X.topRows(n) = dm.X;
  out.y.head(n) = dm.y;
  out.w.head(n) = dm.w;

  // Total pseudo-weight K/8: strong enough to bound separated fits, weak enough
  // to leave small-cell posterior spread intact.
  const double pseudo_w = static_cast<double>(k) / (8.0 * static_cast<double>(extra));
  Eigen::Index r = n;
  auto add_row = [&](const Eigen::VectorXd& x, double outcome) {
    out.X.row(r) = x.transpose();
    out.y[r] = outcome;
    out.w[r] = pseudo_w;
    ++r;
  };
  for (Eigen::Index j = 0; j < k; ++j) {
    if (sd[j] > 0.0) {
      Eigen::VectorXd hi = mean, lo = mean;
      hi[j] += sd[j];
      lo[j] -= sd[j];
      add_row(hi, 1.0);
      add_row(hi, 0.0);
      add_row(lo, 1.0);
      add_row(lo, 0.0);
    } else {
      add_row(mean, 1.0);
      add_row(mean, 0.0);
    }
  }
  return out;
}

std::optional<Eigen::VectorXd> draw_params(const FitResult& fit, RngStream& stream) {
  if (!fit.converged()) return std::nullopt;
  const Eigen::Index k = fit.beta.size();
  if (fit.cov.rows() != k || fit.cov.cols() != k) return std::nullopt;
  if (fit.cov.lpNorm<Eigen::Infinity>() == 0.0) return fit.beta;

  Eigen::LLT<Eigen::MatrixXd> llt(fit.cov);
  if (llt.info() != Eigen::Success) {
    const double scale = fit.cov.diagonal().maxCoeff();
    bool ok = false;
    for (double lambda : kJitterLadder) {
      Eigen::MatrixXd Vj = fit.cov;
      Vj.diagonal().array() += lambda * (scale > 0.0 ? scale : 1.0);
      llt.compute(Vj);
      if (llt.info() == Eigen::Success) {
        ok = true;
        break;
      }
    }
    if (!ok) return std::nullopt;
  }
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) z[i] = stream.normal();
  return Eigen::VectorXd(fit.beta + llt.matrixL() * z);
}

double predict_prob(const Eigen::VectorXd& beta, const Eigen::VectorXd& x) {
  if (beta.size() != x.size()) throw std::invalid_argument("glm: predict dimension mismatch");
  const double p = expit(x.dot(beta));
  const double eps = std::numeric_limits<double>::epsilon();
  return std::min(1.0 - eps, std::max(eps, p));
}

}  // namespace rdmi
