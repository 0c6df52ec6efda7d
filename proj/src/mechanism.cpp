#include "ssmnar/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "batching.hpp"

namespace ssmnar {

namespace {

void warn_degenerate(double value) {
  static bool warned = false;
  if (value <= kProbFloor && !warned) {
    warned = true;
    std::cerr << "ssmnar: warning: degenerate mechanism, log argument "
              << value << " clamped to " << kProbFloor << "\n";
  }
}

void check_phi(const Mechanism& phi, int num_classes) {
  if (phi.num_classes() != num_classes)
    throw ValidationError("mechanism: phi length != class count");
  for (int k = 0; k < num_classes; ++k)
    if (!(phi.phi(k) > 0.0 && phi.phi(k) < 1.0))
      throw ValidationError("mechanism: phi component outside (0,1)");
}

}  // namespace

Buffer buffer_update(const Buffer& buffer, const ClassPrior& p_batch) {
  Buffer out = buffer;
  out.p_buffer = buffer.momentum * buffer.p_buffer +
                 (1.0 - buffer.momentum) * p_batch.p_y;
  out.p_buffer /= out.p_buffer.sum();
  return out;
}

double observed_nll(const ModelParams& theta, const Mechanism& phi,
                    const Dataset& dataset) {
  check_phi(phi, dataset.num_classes);
  double nll = 0.0;
  for (int i = 0; i < dataset.size(); ++i) {
    Eigen::VectorXd p = predict_proba(theta, dataset.features.row(i).transpose());
    if (dataset.indicator[i]) {
      const double arg = p(dataset.labels[i]) * phi.phi(dataset.labels[i]);
      warn_degenerate(arg);
      nll -= safe_log(arg);
    } else {
      const double mix = p.dot((1.0 - phi.phi.array()).matrix());
      warn_degenerate(mix);
      nll -= safe_log(mix);
    }
  }
  return nll;
}

Eigen::VectorXd nll_grad_phi(const ModelParams& theta, const Mechanism& phi,
                             const Dataset& dataset) {
  check_phi(phi, dataset.num_classes);
  const int k_classes = dataset.num_classes;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(k_classes);
  for (int i = 0; i < dataset.size(); ++i) {
    if (dataset.indicator[i]) {
      grad(dataset.labels[i]) -= 1.0 / phi.phi(dataset.labels[i]);
    } else {
      Eigen::VectorXd p = predict_proba(theta, dataset.features.row(i).transpose());
      const double mix = p.dot((1.0 - phi.phi.array()).matrix());
      grad += p / mix;
    }
  }
  return grad;
}

Eigen::MatrixXd nll_hessian_phi(const ModelParams& theta, const Mechanism& phi,
                                const Dataset& dataset) {
  check_phi(phi, dataset.num_classes);
  const int k_classes = dataset.num_classes;
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k_classes, k_classes);
  for (int i = 0; i < dataset.size(); ++i) {
    if (dataset.indicator[i]) {
      const int y = dataset.labels[i];
      hess(y, y) += 1.0 / (phi.phi(y) * phi.phi(y));
    } else {
      Eigen::VectorXd p = predict_proba(theta, dataset.features.row(i).transpose());
      const double mix = p.dot((1.0 - phi.phi.array()).matrix());
      hess += (p * p.transpose()) / (mix * mix);
    }
  }
  return hess;
}

Gradient nll_grad_theta(const ModelParams& theta, const Mechanism& phi,
                        const Dataset& dataset) {
  check_phi(phi, dataset.num_classes);
  Gradient grad = Gradient::zeros_like(theta);
  for (int i = 0; i < dataset.size(); ++i) {
    Eigen::VectorXd x = dataset.features.row(i).transpose();
    ForwardCache cache = forward(theta, x);
    const Eigen::VectorXd& p = cache.probs;
    Eigen::VectorXd dlogits;
    if (dataset.indicator[i]) {
      dlogits = p;
      dlogits(dataset.labels[i]) -= 1.0;
    } else {
      const double mix = p.dot((1.0 - phi.phi.array()).matrix());
      dlogits = p.array() * (1.0 - (1.0 - phi.phi.array()) / mix);
    }
    grad.add_scaled(backprop_from_dlogits(theta, x, cache, dlogits), 1.0);
  }
  return grad;
}

MomentEstimate moment_estimator(const Dataset& dataset, const ClassPrior& prior,
                                double eps_phi) {
  if (prior.p_y.size() != dataset.num_classes)
    throw ValidationError("moment estimator: prior length != class count");
  if (prior.p_y.minCoeff() <= 0.0)
    throw ValidationError("moment estimator: prior component <= 0");
  const double n = dataset.size();
  const auto counts = dataset.class_labeled_counts();
  MomentEstimate est;
  est.raw = Eigen::VectorXd(dataset.num_classes);
  for (int k = 0; k < dataset.num_classes; ++k)
    est.raw(k) = (counts[k] / n) / prior.p_y(k);
  est.clamped.phi = est.raw.cwiseMax(eps_phi).cwiseMin(1.0 - eps_phi);
  return est;
}

ClassPrior class_prior_from_model(const ModelParams& theta,
                                  const Eigen::MatrixXd& features) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(theta.num_classes);
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    sum += predict_proba(theta, features.row(i).transpose());
  return {sum / static_cast<double>(features.rows()), PriorProvenance::ModelBased};
}

double constraint_residual(const Dataset& dataset, const Mechanism& phi) {
  const double n = dataset.size();
  const auto counts = dataset.class_labeled_counts();
  double s = 0.0;
  for (int k = 0; k < dataset.num_classes; ++k)
    s += (counts[k] / n) / phi.phi(k);
  return s - 1.0;
}

void MleConfig::check() const {
  if (epochs < 0) throw ValidationError("mle config: epochs < 0");
  if (batch_size < 1) throw ValidationError("mle config: batch size < 1");
  if (gamma_phi <= 0.0 || gamma_theta <= 0.0)
    throw ValidationError("mle config: learning rates must be > 0");
  if (!(eps_phi > 0.0 && eps_phi < 0.5))
    throw ValidationError("mle config: eps_phi outside (0, 0.5)");
  if (penalty < 0.0 || multiplier_rate < 0.0)
    throw ValidationError("mle config: negative constraint coefficient");
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

MleResult mle_fit(const Dataset& dataset, const ModelParams& theta0,
                  const MleConfig& config, Rng& rng,
                  std::vector<MleTraceRow>* trace_out) {
  config.check();
  validate(dataset);
  const int k_classes = dataset.num_classes;
  const double n = dataset.size();
  const double frac_l = dataset.labeled_count() / n;
  const double frac_u = 1.0 - frac_l;
  const auto counts = dataset.class_labeled_counts();
  Eigen::VectorXd count_frac(k_classes);
  for (int k = 0; k < k_classes; ++k) count_frac(k) = counts[k] / n;

  // phi lives as sigmoid(z); shared-scalar mode ties all components.
  Eigen::VectorXd phi0 = config.phi_init.value_or(
      Eigen::VectorXd::Constant(k_classes, frac_l));
  phi0 = phi0.cwiseMax(config.eps_phi).cwiseMin(1.0 - config.eps_phi);
  Eigen::VectorXd z = phi0.unaryExpr([](double p) { return logit(p); });
  if (config.shared_scalar) z.setConstant(logit(phi0.mean()));

  ModelParams theta = theta0;
  double multiplier = 0.0;

  detail::BatchSampler labeled, unlabeled;
  for (int idx : content_sorted_indices(dataset)) {
    if (dataset.indicator[idx]) labeled.indices.push_back(idx);
    else unlabeled.indices.push_back(idx);
  }

  auto current_phi = [&]() {
    Mechanism m;
    m.phi = z.unaryExpr([](double v) { return sigmoid(v); });
    return m;
  };

  MleResult result;
  result.theta = theta;
  int rising = 0;
  double prev_nll = std::numeric_limits<double>::infinity();

  const int steps_per_epoch = std::max<int>(
      1, (static_cast<int>(labeled.indices.size()) + config.batch_size - 1) /
             config.batch_size);

  auto record = [&](int epoch) {
    Mechanism phi = current_phi();
    MleTraceRow row;
    row.epoch = epoch;
    row.nll = observed_nll(theta, phi, dataset) / n;
    row.constraint_residual = constraint_residual(dataset, phi);
    row.phi = phi.phi;
    result.trace.push_back(row);
    if (trace_out) trace_out->push_back(row);
    return row.nll;
  };

  record(0);
  prev_nll = result.trace.back().nll;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (int step = 0; step < steps_per_epoch; ++step) {
      // phi step
      if (!config.freeze_phi) {
        auto bl = labeled.draw(std::min<int>(config.batch_size,
                                             labeled.indices.size()), rng);
        auto bu = unlabeled.draw(std::min<int>(config.batch_size,
                                               unlabeled.indices.size()), rng);
        Mechanism phi = current_phi();
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(k_classes);
        const double sl = bl.empty() ? 0.0 : frac_l / bl.size();
        const double su = bu.empty() ? 0.0 : frac_u / bu.size();
        for (int i : bl) grad(dataset.labels[i]) -= sl / phi.phi(dataset.labels[i]);
        for (int i : bu) {
          Eigen::VectorXd p = predict_proba(theta, dataset.features.row(i).transpose());
          const double mix = std::max(p.dot((1.0 - phi.phi.array()).matrix()), kProbFloor);
          grad += su * p / mix;
        }
        // augmented-Lagrangian term on sum_y (count_y/n)/phi_y = 1
        const double c = constraint_residual(dataset, phi);
        const double outer = multiplier + config.penalty * c;
        grad -= outer * (count_frac.array() / phi.phi.array().square()).matrix();
        Eigen::VectorXd dz = grad.array() * phi.phi.array() * (1.0 - phi.phi.array());
        if (config.shared_scalar) dz.setConstant(dz.sum() / k_classes);
        z -= config.gamma_phi * dz;
        multiplier += config.multiplier_rate * constraint_residual(dataset, current_phi());
      }
      // theta step
      if (!config.freeze_theta) {
        auto bl = labeled.draw(std::min<int>(config.batch_size,
                                             labeled.indices.size()), rng);
        auto bu = unlabeled.draw(std::min<int>(config.batch_size,
                                               unlabeled.indices.size()), rng);
        Mechanism phi = current_phi();
        Gradient grad = Gradient::zeros_like(theta);
        const double sl = bl.empty() ? 0.0 : frac_l / bl.size();
        const double su = bu.empty() ? 0.0 : frac_u / bu.size();
        for (int i : bl) {
          Eigen::VectorXd x = dataset.features.row(i).transpose();
          ForwardCache cache = forward(theta, x);
          Eigen::VectorXd dlogits = cache.probs;
          dlogits(dataset.labels[i]) -= 1.0;
          grad.add_scaled(backprop_from_dlogits(theta, x, cache, dlogits), sl);
        }
        for (int i : bu) {
          Eigen::VectorXd x = dataset.features.row(i).transpose();
          ForwardCache cache = forward(theta, x);
          const Eigen::VectorXd& p = cache.probs;
          const double mix = std::max(p.dot((1.0 - phi.phi.array()).matrix()), kProbFloor);
          Eigen::VectorXd dlogits =
              p.array() * (1.0 - (1.0 - phi.phi.array()) / mix);
          grad.add_scaled(backprop_from_dlogits(theta, x, cache, dlogits), su);
        }
        if (!grad.all_finite())
          throw DivergenceError("mle_fit: non-finite theta gradient at epoch " +
                                std::to_string(epoch));
        Eigen::VectorXd flat = theta.flatten() - config.gamma_theta * grad.flatten();
        if (!flat.allFinite())
          throw DivergenceError("mle_fit: non-finite parameters at epoch " +
                                std::to_string(epoch));
        theta.unflatten(flat);
      }
    }
    const double nll = record(epoch);
    if (!std::isfinite(nll))
      throw DivergenceError("mle_fit: non-finite NLL at epoch " +
                            std::to_string(epoch));
    rising = (nll > prev_nll) ? rising + 1 : 0;
    if (rising >= 10)
      throw DivergenceError("mle_fit: NLL increased for 10 consecutive epochs "
                            "(last " + std::to_string(nll) + ")");
    prev_nll = nll;
  }

  result.mechanism = current_phi();
  result.theta = theta;
  return result;
}

Mechanism minimize_nll_fixed_theta(const ModelParams& theta, const Dataset& dataset,
                                   double eps_phi, int max_iters) {
  validate(dataset);
  const int k_classes = dataset.num_classes;
  const double n = dataset.size();
  const auto counts_int = dataset.class_labeled_counts();
  Eigen::VectorXd counts(k_classes);
  for (int k = 0; k < k_classes; ++k) counts(k) = counts_int[k];

  // Sufficient statistics: labeled class counts plus the predicted
  // probabilities of the unlabeled samples.
  std::vector<Eigen::VectorXd> unlabeled_probs;
  for (int i = 0; i < dataset.size(); ++i)
    if (!dataset.indicator[i])
      unlabeled_probs.push_back(
          predict_proba(theta, dataset.features.row(i).transpose()));

  auto objective = [&](const Eigen::VectorXd& phi) {
    double f = 0.0;
    for (int k = 0; k < k_classes; ++k) f -= counts(k) * safe_log(phi(k));
    for (const auto& p : unlabeled_probs)
      f -= safe_log(p.dot((1.0 - phi.array()).matrix()));
    return f;
  };

  const double lo = eps_phi, hi = 1.0 - eps_phi;
  Eigen::VectorXd phi = Eigen::VectorXd::Constant(
      k_classes, std::clamp(dataset.labeled_count() / n, lo, hi));
  double f = objective(phi);

  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(k_classes);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k_classes, k_classes);
    for (int k = 0; k < k_classes; ++k) {
      grad(k) = -counts(k) / phi(k);
      hess(k, k) = counts(k) / (phi(k) * phi(k));
    }
    for (const auto& p : unlabeled_probs) {
      const double mix = std::max(p.dot((1.0 - phi.array()).matrix()), kProbFloor);
      grad += p / mix;
      hess += (p * p.transpose()) / (mix * mix);
    }
    // Projected-gradient stationarity on the box.
    double stat = 0.0;
    for (int k = 0; k < k_classes; ++k) {
      double g = grad(k);
      if (phi(k) <= lo && g > 0) g = 0;
      if (phi(k) >= hi && g < 0) g = 0;
      stat = std::max(stat, std::abs(g));
    }
    if (stat < 1e-10 * (1.0 + n)) break;

    Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd cand = (phi - t * step).cwiseMax(lo).cwiseMin(hi);
      const double fc = objective(cand);
      if (fc <= f + 1e-12 * std::abs(f)) {
        if ((cand - phi).lpNorm<Eigen::Infinity>() < 1e-14) {
          phi = cand;
          f = fc;
          accepted = false;
          break;
        }
        phi = cand;
        f = fc;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  Mechanism m;
  m.phi = phi;
  return m;
}

}  // namespace ssmnar
