#include "ssmnar/risk.hpp"

#include <cmath>
#include <numeric>

namespace ssmnar {

void RiskConfig::check() const {
  if (lambda < 0.0) throw ValidationError("risk config: lambda < 0");
  if (!(tau0 > 0.0 && tau0 <= 1.0))
    throw ValidationError("risk config: tau0 outside (0,1]");
  if (beta < 0.0) throw ValidationError("risk config: beta < 0");
}

Eigen::VectorXd adaptive_threshold(const Mechanism& phi, double tau0, double beta) {
  if (phi.phi.minCoeff() <= 0.0)
    throw ValidationError("adaptive threshold: phi must be > 0");
  if (!(tau0 > 0.0 && tau0 <= 1.0))
    throw ValidationError("adaptive threshold: tau0 outside (0,1]");
  if (beta < 0.0) throw ValidationError("adaptive threshold: beta < 0");
  const double top = phi.phi.maxCoeff();
  return tau0 * (phi.phi.array() / top).pow(beta);
}

namespace {

std::vector<int> labeled_indices(const Dataset& dataset) {
  std::vector<int> idx;
  for (int i = 0; i < dataset.size(); ++i)
    if (dataset.indicator[i]) idx.push_back(i);
  return idx;
}

std::vector<int> unlabeled_indices(const Dataset& dataset) {
  std::vector<int> idx;
  for (int i = 0; i < dataset.size(); ++i)
    if (!dataset.indicator[i]) idx.push_back(i);
  return idx;
}

Eigen::VectorXd thresholds_for(const Mechanism& phi, const RiskConfig& config,
                               int num_classes) {
  if (config.beta > 0.0) return adaptive_threshold(phi, config.tau0, config.beta);
  return Eigen::VectorXd::Constant(num_classes, config.tau0);
}

}  // namespace

double cc_risk(const ModelParams& theta, const Dataset& dataset) {
  const auto idx = labeled_indices(dataset);
  if (idx.empty()) throw ValidationError("cc_risk: no labeled samples");
  double sum = 0.0;
  for (int i : idx)
    sum -= safe_log(
        predict_proba(theta, dataset.features.row(i).transpose())(dataset.labels[i]));
  return sum / idx.size();
}

std::pair<double, Gradient> ipw_risk_grad(const ModelParams& theta,
                                          const Dataset& dataset,
                                          const Mechanism& phi) {
  if (phi.phi.minCoeff() <= 0.0)
    throw ValidationError("ipw_risk: phi must be > 0");
  const double n = dataset.size();
  double value = 0.0;
  Gradient grad = Gradient::zeros_like(theta);
  for (int i = 0; i < dataset.size(); ++i) {
    if (!dataset.indicator[i]) continue;
    const double w = 1.0 / (n * phi.phi(dataset.labels[i]));
    auto [loss, g] =
        supervised_loss_grad(theta, dataset.features.row(i).transpose(),
                             dataset.labels[i], w);
    value += loss;
    grad.add_scaled(g, 1.0);
  }
  return {value, grad};
}

double ipw_risk(const ModelParams& theta, const Dataset& dataset,
                const Mechanism& phi) {
  return ipw_risk_grad(theta, dataset, phi).first;
}

std::pair<double, Gradient> ssl_batch(const ModelParams& theta,
                                      const Dataset& dataset,
                                      const std::vector<int>& labeled_idx,
                                      const std::vector<int>& unlabeled_idx,
                                      const RiskConfig& config) {
  config.check();
  double value = 0.0;
  Gradient grad = Gradient::zeros_like(theta);
  const double wl = labeled_idx.empty() ? 0.0 : 1.0 / labeled_idx.size();
  for (int i : labeled_idx) {
    auto [loss, g] = supervised_loss_grad(
        theta, dataset.features.row(i).transpose(), dataset.labels[i], wl);
    value += loss;
    grad.add_scaled(g, 1.0);
  }
  const double wu =
      unlabeled_idx.empty() ? 0.0 : config.lambda / unlabeled_idx.size();
  const Eigen::VectorXd tau =
      Eigen::VectorXd::Constant(dataset.num_classes, config.tau0);
  for (int i : unlabeled_idx) {
    auto [loss, g] =
        unsupervised_loss_grad(theta, dataset.features.row(i).transpose(),
                               config.unlabeled_loss, tau, wu);
    value += loss;
    grad.add_scaled(g, 1.0);
  }
  return {value, grad};
}

std::pair<double, Gradient> ssl_risk(const ModelParams& theta,
                                     const Dataset& dataset,
                                     const RiskConfig& config) {
  const auto li = labeled_indices(dataset);
  if (li.empty()) throw ValidationError("ssl_risk: no labeled samples");
  return ssl_batch(theta, dataset, li, unlabeled_indices(dataset), config);
}

std::pair<double, Gradient> debiased_batch(const ModelParams& theta,
                                           const Dataset& dataset,
                                           const std::vector<int>& labeled_idx,
                                           const std::vector<int>& unlabeled_idx,
                                           double frac_l, double frac_u,
                                           const Mechanism& phi,
                                           const RiskConfig& config) {
  config.check();
  if (phi.phi.minCoeff() <= 0.0)
    throw ValidationError("debiased risk: phi must be > 0");
  double value = 0.0;
  Gradient grad = Gradient::zeros_like(theta);
  const double sl = labeled_idx.empty() ? 0.0 : frac_l / labeled_idx.size();
  const double su = unlabeled_idx.empty() ? 0.0 : frac_u / unlabeled_idx.size();
  const Eigen::VectorXd tau = thresholds_for(phi, config, dataset.num_classes);

  for (int i : labeled_idx) {
    const int y = dataset.labels[i];
    Eigen::VectorXd x = dataset.features.row(i).transpose();
    auto [loss, g] = supervised_loss_grad(theta, x, y, sl / phi.phi(y));
    value += loss;
    grad.add_scaled(g, 1.0);
    if (config.lambda > 0.0) {
      // correction term, labeled side: weight (1 - phi_y)/phi_y, minus sign
      const double w = config.lambda * sl * (1.0 - phi.phi(y)) / phi.phi(y);
      auto [uloss, ug] =
          unsupervised_loss_grad(theta, x, config.unlabeled_loss, tau, w);
      value -= uloss;
      grad.add_scaled(ug, -1.0);
    }
  }
  if (config.lambda > 0.0) {
    // correction term, unlabeled side: (r - phi)/phi = -1 at r = 0 for any
    // positive propensity substitute
    for (int i : unlabeled_idx) {
      auto [uloss, ug] =
          unsupervised_loss_grad(theta, dataset.features.row(i).transpose(),
                                 config.unlabeled_loss, tau, config.lambda * su);
      value += uloss;
      grad.add_scaled(ug, 1.0);
    }
  }
  return {value, grad};
}

std::pair<double, Gradient> debiased_ssl_risk(const ModelParams& theta,
                                              const Dataset& dataset,
                                              const Mechanism& phi,
                                              const RiskConfig& config) {
  const auto li = labeled_indices(dataset);
  if (li.empty()) throw ValidationError("debiased risk: no labeled samples");
  const double n = dataset.size();
  return debiased_batch(theta, dataset, li, unlabeled_indices(dataset),
                        li.size() / n, 1.0 - li.size() / n, phi, config);
}

std::pair<double, Gradient> debiased_batch_moment_grad(
    const ModelParams& theta, const Dataset& dataset,
    const std::vector<int>& labeled_idx, const std::vector<int>& unlabeled_idx,
    const std::vector<int>& prior_idx, double frac_l, double frac_u,
    const RiskConfig& config, double eps_phi, Mechanism* phi_out) {
  const double n = dataset.size();
  // Prior over the given index set; class counts are data constants.
  Eigen::VectorXd prior = Eigen::VectorXd::Zero(dataset.num_classes);
  for (int i : prior_idx)
    prior += predict_proba(theta, dataset.features.row(i).transpose());
  prior /= static_cast<double>(prior_idx.size());

  const auto counts = dataset.class_labeled_counts();
  Eigen::VectorXd raw(dataset.num_classes);
  for (int k = 0; k < dataset.num_classes; ++k)
    raw(k) = (counts[k] / n) / std::max(prior(k), kProbFloor);
  Mechanism phi;
  phi.phi = raw.cwiseMax(eps_phi).cwiseMin(1.0 - eps_phi);
  if (phi_out) *phi_out = phi;

  auto [value, grad] = debiased_batch(theta, dataset, labeled_idx,
                                      unlabeled_idx, frac_l, frac_u, phi, config);

  // Chain-rule path through phi(theta). dR/dphi_k from the labeled terms:
  //   first term:      -s_l sum_{y=k} l_l / phi_k^2
  //   correction term: +lambda s_l sum_{y=k} l_u / phi_k^2
  // Components whose raw moment estimate was clamped carry no gradient.
  const double sl = labeled_idx.empty() ? 0.0 : frac_l / labeled_idx.size();
  const Eigen::VectorXd tau = thresholds_for(phi, config, dataset.num_classes);
  Eigen::VectorXd d_risk_d_phi = Eigen::VectorXd::Zero(dataset.num_classes);
  for (int i : labeled_idx) {
    const int y = dataset.labels[i];
    Eigen::VectorXd x = dataset.features.row(i).transpose();
    const double ll = -safe_log(predict_proba(theta, x)(y));
    double lu = 0.0;
    if (config.lambda > 0.0)
      lu = unsupervised_loss_grad(theta, x, config.unlabeled_loss, tau, 1.0).first;
    d_risk_d_phi(y) +=
        sl * (-ll + config.lambda * lu) / (phi.phi(y) * phi.phi(y));
  }

  // dphi_k/dtheta = -(count_k/n) / p_hat_k^2 * dp_hat_k/dtheta, with
  // p_hat_k the mean predicted probability over prior_idx.
  Eigen::VectorXd dprobs(dataset.num_classes);
  for (int k = 0; k < dataset.num_classes; ++k) {
    const bool clamped_out = raw(k) <= eps_phi || raw(k) >= 1.0 - eps_phi;
    dprobs(k) = clamped_out
                    ? 0.0
                    : d_risk_d_phi(k) * (-(counts[k] / n) / (prior(k) * prior(k)));
  }
  const double inv_m = 1.0 / static_cast<double>(prior_idx.size());
  for (int i : prior_idx) {
    Eigen::VectorXd x = dataset.features.row(i).transpose();
    ForwardCache cache = forward(theta, x);
    grad.add_scaled(backprop_from_dprobs(theta, x, cache, dprobs), inv_m);
  }
  return {value, grad};
}

std::pair<double, Gradient> debiased_ssl_risk_moment_grad(
    const ModelParams& theta, const Dataset& dataset, const RiskConfig& config,
    double eps_phi) {
  const auto li = labeled_indices(dataset);
  if (li.empty()) throw ValidationError("debiased risk: no labeled samples");
  const double n = dataset.size();
  std::vector<int> all(dataset.size());
  std::iota(all.begin(), all.end(), 0);
  return debiased_batch_moment_grad(theta, dataset, li,
                                    unlabeled_indices(dataset), all,
                                    li.size() / n, 1.0 - li.size() / n, config,
                                    eps_phi, nullptr);
}

}  // namespace ssmnar
