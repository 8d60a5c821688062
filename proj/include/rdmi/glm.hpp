#pragma once

#include <Eigen/Dense>

#include <optional>

namespace rdmi {

class RngStream;

struct DesignMatrix {
  Eigen::MatrixXd X;  // leading intercept column by convention
  Eigen::VectorXd y;  // outcomes in {0,1}
  Eigen::VectorXd w;  // case weights >= 0

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
};

enum class FitStatus { ok, non_converged, rank_deficient };

struct FitResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;  // inverse observed information
  FitStatus status = FitStatus::non_converged;
  int iterations = 0;
  double max_abs_coef = 0.0;

  bool converged() const { return status == FitStatus::ok; }
};

double logistic_loglik(const DesignMatrix& dm, const Eigen::VectorXd& beta);
Eigen::VectorXd logistic_score(const DesignMatrix& dm, const Eigen::VectorXd& beta);

FitResult fit_logistic(const DesignMatrix& dm, double tol = 1e-8, int max_iter = 50);

// Appends weighted pseudo-observations so the likelihood always has a finite
// maximizer: both outcomes at mean +/- one weighted SD per varying column,
// both outcomes at the mean for constant columns. Total added weight = K/8.
DesignMatrix augment(const DesignMatrix& dm);

// beta* = beta_hat + L z with L L^T = cov. Zero covariance returns beta_hat
// without consuming draws; Cholesky failure after jitter returns nullopt.
std::optional<Eigen::VectorXd> draw_params(const FitResult& fit, RngStream& stream);

double predict_prob(const Eigen::VectorXd& beta, const Eigen::VectorXd& x);

}  // namespace rdmi
