#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ssmnar/core.hpp"
#include "ssmnar/model.hpp"
#include "ssmnar/rng.hpp"

namespace ssmnar {

enum class PriorProvenance { Uniform, UserPrior, ModelBased, Buffered };

struct ClassPrior {
  Eigen::VectorXd p_y;  // simplex
  PriorProvenance provenance = PriorProvenance::Uniform;

  static ClassPrior uniform(int num_classes) {
    return {Eigen::VectorXd::Constant(num_classes, 1.0 / num_classes),
            PriorProvenance::Uniform};
  }
};

// Moving-average class-prior buffer used by the buffered moment estimator.
struct Buffer {
  Eigen::VectorXd p_buffer;  // simplex
  double momentum = 0.99;
};

Buffer buffer_update(const Buffer& buffer, const ClassPrior& p_batch);

// Negative observed log-likelihood of (x, y .* r, r), dropping the
// theta-free constant:
//   -sum_{r_i=1} log[p(y_i|x_i) phi_{y_i}]
//   -sum_{r_i=0} log sum_y p(y|x_i)(1 - phi_y)
double observed_nll(const ModelParams& theta, const Mechanism& phi,
                    const Dataset& dataset);

// Exact analytic gradient / Hessian of observed_nll in phi.
Eigen::VectorXd nll_grad_phi(const ModelParams& theta, const Mechanism& phi,
                             const Dataset& dataset);
Eigen::MatrixXd nll_hessian_phi(const ModelParams& theta, const Mechanism& phi,
                                const Dataset& dataset);

// Gradient of observed_nll in theta (phi held fixed).
Gradient nll_grad_theta(const ModelParams& theta, const Mechanism& phi,
                        const Dataset& dataset);

struct MomentEstimate {
  Mechanism clamped;      // used for training
  Eigen::VectorXd raw;    // unclamped, surfaced for diagnostics
};

// phi_y = (labeled count of class y / n) / prior_y, clamped to
// (eps_phi, 1 - eps_phi).
MomentEstimate moment_estimator(const Dataset& dataset, const ClassPrior& prior,
                                double eps_phi = 1e-3);

// p_hat(y) = (1/n) sum_i p(y|x_i; theta) over all samples.
ClassPrior class_prior_from_model(const ModelParams& theta,
                                  const Eigen::MatrixXd& features);

struct MleConfig {
  int epochs = 50;
  int batch_size = 64;
  double gamma_phi = 0.1;
  double gamma_theta = 0.1;
  double penalty = 1.0;          // augmented-Lagrangian quadratic coefficient
  double multiplier_rate = 1.0;  // ascent rate for the multiplier
  double eps_phi = 1e-3;
  bool shared_scalar = false;    // restrict phi to a common value (MCAR null)
  bool freeze_theta = false;
  bool freeze_phi = false;
  std::optional<Eigen::VectorXd> phi_init;  // default: all n_l/n

  void check() const;
};

struct MleTraceRow {
  int epoch = 0;
  double nll = 0.0;               // full-data observed NLL / n
  double constraint_residual = 0.0;
  Eigen::VectorXd phi;
};

struct MleResult {
  Mechanism mechanism;
  ModelParams theta;
  std::vector<MleTraceRow> trace;
};

// Algorithm: alternating minibatch SGD on the observed NLL, a phi step
// through the sigmoid reparametrization followed by a theta step, with the
// sum constraint  sum_y (count_y/n)/phi_y = 1  enforced by an augmented
// Lagrangian. Minibatch draws operate on a content-sorted index order, so
// the fit is invariant to input row permutation.
MleResult mle_fit(const Dataset& dataset, const ModelParams& theta0,
                  const MleConfig& config, Rng& rng,
                  std::vector<MleTraceRow>* trace_out = nullptr);

// Exact minimizer of the (convex) observed NLL over phi in
// [eps, 1-eps]^K for a fixed theta: projected Newton with backtracking.
Mechanism minimize_nll_fixed_theta(const ModelParams& theta, const Dataset& dataset,
                                   double eps_phi = 1e-6, int max_iters = 200);

double constraint_residual(const Dataset& dataset, const Mechanism& phi);

}  // namespace ssmnar
