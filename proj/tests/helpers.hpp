#pragma once

// Shared fixtures for the test suite: random instance builders, central
// finite differences, and the exact conditional classifier of an isotropic
// Gaussian mixture.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "ssmnar/core.hpp"
#include "ssmnar/mechanism.hpp"
#include "ssmnar/model.hpp"
#include "ssmnar/rng.hpp"
#include "ssmnar/scenario.hpp"

namespace testutil {

// Random partially labeled dataset with at least one labeled sample per
// class (labels of unlabeled rows are hidden, i.e. kMissingLabel).
inline ssmnar::Dataset random_dataset(int n, int k, int d, ssmnar::Rng& rng,
                                      double label_rate = 0.6) {
  ssmnar::Dataset ds;
  ds.num_classes = k;
  ds.features.resize(n, d);
  ds.labels.resize(n);
  ds.indicator.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = rng.normal();
    const int y = static_cast<int>(rng.below(k));
    // Force the first k rows to be labeled, one per class.
    const bool labeled = i < k || rng.bernoulli(label_rate);
    ds.labels[i] = labeled ? (i < k ? i : y) : ssmnar::kMissingLabel;
    ds.indicator[i] = labeled ? 1 : 0;
  }
  return ds;
}

inline ssmnar::Mechanism random_phi(int k, ssmnar::Rng& rng, double lo = 0.1,
                                    double hi = 0.9) {
  ssmnar::Mechanism m;
  m.phi.resize(k);
  for (int i = 0; i < k; ++i) m.phi(i) = lo + (hi - lo) * rng.uniform();
  return m;
}

// Central finite difference of a scalar function of a flat vector.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Worst relative error per coordinate, with an absolute floor so
// near-zero coordinates do not blow up the ratio.
inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
  }
  return worst;
}

// Finite-difference check of a theta-gradient: compares against central
// differences of `value` through flatten/unflatten.
inline double theta_grad_rel_err(
    const ssmnar::ModelParams& theta,
    const std::function<double(const ssmnar::ModelParams&)>& value,
    const ssmnar::Gradient& analytic, double h = 1e-5) {
  auto f = [&](const Eigen::VectorXd& v) {
    ssmnar::ModelParams t = theta;
    t.unflatten(v);
    return value(t);
  };
  const Eigen::VectorXd fd = fd_gradient(f, theta.flatten(), h);
  return max_rel_err(fd, analytic.flatten());
}

// Exact conditional p(y|x) of an isotropic Gaussian mixture is a linear
// softmax: logits_k = (mu_k/sigma^2).x - |mu_k|^2/(2 sigma^2) + log pi_k.
inline ssmnar::ModelParams true_conditional(
    const ssmnar::GaussianMixtureSpec& spec) {
  const int k = spec.num_classes;
  ssmnar::ModelParams theta = ssmnar::ModelParams::linear(spec.dim, k);
  double total = 0.0;
  for (int c : spec.counts) total += c;
  const double s2 = spec.sigma * spec.sigma;
  for (int c = 0; c < k; ++c) {
    theta.w1.row(c) = spec.means[c].transpose() / s2;
    theta.b1(c) = -spec.means[c].squaredNorm() / (2.0 * s2) +
                  std::log(spec.counts[c] / total);
  }
  return theta;
}

}  // namespace testutil
