#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ssmnar/core.hpp"
#include "ssmnar/mechanism.hpp"
#include "ssmnar/model.hpp"

namespace ssmnar {

enum class MechanismSource { Fixed, MomentBuffered, MomentGradient, Mcar };

struct RiskConfig {
  double lambda = 1.0;  // unlabeled regularization weight
  UnsupervisedLoss unlabeled_loss = UnsupervisedLoss::Entropy;
  double tau0 = 0.95;   // pseudo-label threshold
  double beta = 0.0;    // adaptivity exponent; adaptive thresholds iff > 0
  MechanismSource source = MechanismSource::Fixed;

  void check() const;
};

// Per-class pseudo-label thresholds tau0 * (phi_k / max_y phi_y)^beta.
Eigen::VectorXd adaptive_threshold(const Mechanism& phi, double tau0, double beta);

// Complete-case risk: mean supervised loss over labeled samples.
double cc_risk(const ModelParams& theta, const Dataset& dataset);

// IPW risk (1/n) sum_i r_i l(theta; x_i, y_i) / phi_{y_i}.
double ipw_risk(const ModelParams& theta, const Dataset& dataset,
                const Mechanism& phi);
std::pair<double, Gradient> ipw_risk_grad(const ModelParams& theta,
                                          const Dataset& dataset,
                                          const Mechanism& phi);

// Classical SSL risk: mean labeled loss + lambda * mean unlabeled loss.
std::pair<double, Gradient> ssl_risk(const ModelParams& theta,
                                     const Dataset& dataset,
                                     const RiskConfig& config);

// Debiased SSL risk:
//   (1/n) sum_i r_i l_l / phi_{y_i}
//   - (lambda/n) sum_i (r_i - phi_{y_i}) / phi_{y_i} * l_u.
// For unlabeled samples the weight uses the model-expected propensity
// phi_bar_i = sum_k p(k|x_i) phi_k in place of the unavailable phi_{y_i};
// since r_i = 0 this weight reduces to -1 for any positive substitute, so
// the choice does not change the value.
std::pair<double, Gradient> debiased_ssl_risk(const ModelParams& theta,
                                              const Dataset& dataset,
                                              const Mechanism& phi,
                                              const RiskConfig& config);

// Moment-gradient (MEg) variant: phi is the moment estimate through the
// model-based prior and theta-gradients flow through it.
std::pair<double, Gradient> debiased_ssl_risk_moment_grad(
    const ModelParams& theta, const Dataset& dataset, const RiskConfig& config,
    double eps_phi = 1e-3);

// Minibatch building blocks used by the training loop. frac_l/frac_u are
// the dataset-level labeled/unlabeled fractions; with the full index sets
// these reduce exactly to the full-data estimators.
std::pair<double, Gradient> ssl_batch(const ModelParams& theta,
                                      const Dataset& dataset,
                                      const std::vector<int>& labeled_idx,
                                      const std::vector<int>& unlabeled_idx,
                                      const RiskConfig& config);
std::pair<double, Gradient> debiased_batch_moment_grad(
    const ModelParams& theta, const Dataset& dataset,
    const std::vector<int>& labeled_idx, const std::vector<int>& unlabeled_idx,
    const std::vector<int>& prior_idx, double frac_l, double frac_u,
    const RiskConfig& config, double eps_phi, Mechanism* phi_out);
std::pair<double, Gradient> debiased_batch(const ModelParams& theta,
                                           const Dataset& dataset,
                                           const std::vector<int>& labeled_idx,
                                           const std::vector<int>& unlabeled_idx,
                                           double frac_l, double frac_u,
                                           const Mechanism& phi,
                                           const RiskConfig& config);

}  // namespace ssmnar
