#include "ssmnar/model.hpp"

#include <cmath>

namespace ssmnar {

ModelParams ModelParams::linear(int input_dim, int num_classes) {
  ModelParams p;
  p.arch = Architecture::LinearSoftmax;
  p.input_dim = input_dim;
  p.num_classes = num_classes;
  p.w1 = Eigen::MatrixXd::Zero(num_classes, input_dim);
  p.b1 = Eigen::VectorXd::Zero(num_classes);
  return p;
}

ModelParams ModelParams::hidden(int input_dim, int num_classes, int width) {
  ModelParams p;
  p.arch = Architecture::OneHiddenLayer;
  p.input_dim = input_dim;
  p.num_classes = num_classes;
  p.hidden_width = width;
  p.w1 = Eigen::MatrixXd::Zero(width, input_dim);
  p.b1 = Eigen::VectorXd::Zero(width);
  p.w2 = Eigen::MatrixXd::Zero(num_classes, width);
  p.b2 = Eigen::VectorXd::Zero(num_classes);
  return p;
}

void ModelParams::randomize(Rng& rng, double scale) {
  auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.normal();
  };
  auto fillv = [&](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * rng.normal();
  };
  fill(w1);
  fillv(b1);
  if (arch == Architecture::OneHiddenLayer) {
    fill(w2);
    fillv(b2);
  }
}

int ModelParams::parameter_count() const {
  int c = static_cast<int>(w1.size() + b1.size());
  if (arch == Architecture::OneHiddenLayer) c += static_cast<int>(w2.size() + b2.size());
  return c;
}

Eigen::VectorXd ModelParams::flatten() const {
  Eigen::VectorXd v(parameter_count());
  Eigen::Index off = 0;
  v.segment(off, w1.size()) = Eigen::Map<const Eigen::VectorXd>(w1.data(), w1.size());
  off += w1.size();
  v.segment(off, b1.size()) = b1;
  off += b1.size();
  if (arch == Architecture::OneHiddenLayer) {
    v.segment(off, w2.size()) = Eigen::Map<const Eigen::VectorXd>(w2.data(), w2.size());
    off += w2.size();
    v.segment(off, b2.size()) = b2;
  }
  return v;
}

void ModelParams::unflatten(const Eigen::VectorXd& v) {
  Eigen::Index off = 0;
  Eigen::Map<Eigen::VectorXd>(w1.data(), w1.size()) = v.segment(off, w1.size());
  off += w1.size();
  b1 = v.segment(off, b1.size());
  off += b1.size();
  if (arch == Architecture::OneHiddenLayer) {
    Eigen::Map<Eigen::VectorXd>(w2.data(), w2.size()) = v.segment(off, w2.size());
    off += w2.size();
    b2 = v.segment(off, b2.size());
  }
}

Gradient Gradient::zeros_like(const ModelParams& theta) {
  Gradient g;
  g.w1 = Eigen::MatrixXd::Zero(theta.w1.rows(), theta.w1.cols());
  g.b1 = Eigen::VectorXd::Zero(theta.b1.size());
  if (theta.arch == Architecture::OneHiddenLayer) {
    g.w2 = Eigen::MatrixXd::Zero(theta.w2.rows(), theta.w2.cols());
    g.b2 = Eigen::VectorXd::Zero(theta.b2.size());
  }
  return g;
}

void Gradient::add_scaled(const Gradient& other, double s) {
  w1 += s * other.w1;
  b1 += s * other.b1;
  if (w2.size() > 0) {
    w2 += s * other.w2;
    b2 += s * other.b2;
  }
}

void Gradient::scale(double s) {
  w1 *= s;
  b1 *= s;
  if (w2.size() > 0) {
    w2 *= s;
    b2 *= s;
  }
}

Eigen::VectorXd Gradient::flatten() const {
  Eigen::Index total = w1.size() + b1.size() + w2.size() + b2.size();
  Eigen::VectorXd v(total);
  Eigen::Index off = 0;
  v.segment(off, w1.size()) = Eigen::Map<const Eigen::VectorXd>(w1.data(), w1.size());
  off += w1.size();
  v.segment(off, b1.size()) = b1;
  off += b1.size();
  if (w2.size() > 0) {
    v.segment(off, w2.size()) = Eigen::Map<const Eigen::VectorXd>(w2.data(), w2.size());
    off += w2.size();
    v.segment(off, b2.size()) = b2;
  }
  return v;
}

bool Gradient::all_finite() const {
  return w1.allFinite() && b1.allFinite() &&
         (w2.size() == 0 || (w2.allFinite() && b2.allFinite()));
}

static Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

ForwardCache forward(const ModelParams& theta, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw ValidationError("predict: non-finite input");
  ForwardCache cache;
  if (theta.arch == Architecture::LinearSoftmax) {
    cache.probs = softmax(theta.w1 * x + theta.b1);
  } else {
    cache.hidden = (theta.w1 * x + theta.b1).array().tanh();
    cache.probs = softmax(theta.w2 * cache.hidden + theta.b2);
  }
  return cache;
}

Eigen::VectorXd predict_proba(const ModelParams& theta, const Eigen::VectorXd& x) {
  return forward(theta, x).probs;
}

Gradient backprop_from_dlogits(const ModelParams& theta, const Eigen::VectorXd& x,
                               const ForwardCache& cache,
                               const Eigen::VectorXd& dlogits) {
  Gradient g = Gradient::zeros_like(theta);
  if (theta.arch == Architecture::LinearSoftmax) {
    g.w1 = dlogits * x.transpose();
    g.b1 = dlogits;
  } else {
    g.w2 = dlogits * cache.hidden.transpose();
    g.b2 = dlogits;
    Eigen::VectorXd dhidden =
        (theta.w2.transpose() * dlogits).array() *
        (1.0 - cache.hidden.array().square());
    g.w1 = dhidden * x.transpose();
    g.b1 = dhidden;
  }
  return g;
}

Gradient backprop_from_dprobs(const ModelParams& theta, const Eigen::VectorXd& x,
                              const ForwardCache& cache,
                              const Eigen::VectorXd& dprobs) {
  // dlogit_j = p_j (dprobs_j - sum_k dprobs_k p_k)
  const Eigen::VectorXd& p = cache.probs;
  const double inner = dprobs.dot(p);
  Eigen::VectorXd dlogits = p.array() * (dprobs.array() - inner);
  return backprop_from_dlogits(theta, x, cache, dlogits);
}

std::pair<double, Gradient> supervised_loss_grad(const ModelParams& theta,
                                                 const Eigen::VectorXd& x, int y,
                                                 double weight) {
  if (y < 0 || y >= theta.num_classes)
    throw ValidationError("supervised loss: label out of range");
  if (weight < 0.0) throw ValidationError("supervised loss: negative weight");
  if (weight == 0.0) return {0.0, Gradient::zeros_like(theta)};
  ForwardCache cache = forward(theta, x);
  const double loss = -weight * safe_log(cache.probs(y));
  Eigen::VectorXd dlogits = weight * cache.probs;
  dlogits(y) -= weight;
  return {loss, backprop_from_dlogits(theta, x, cache, dlogits)};
}

std::pair<double, Gradient> unsupervised_loss_grad(const ModelParams& theta,
                                                   const Eigen::VectorXd& x,
                                                   UnsupervisedLoss kind,
                                                   double tau, double weight) {
  return unsupervised_loss_grad(
      theta, x, kind, Eigen::VectorXd::Constant(theta.num_classes, tau), weight);
}

std::pair<double, Gradient> unsupervised_loss_grad(
    const ModelParams& theta, const Eigen::VectorXd& x, UnsupervisedLoss kind,
    const Eigen::VectorXd& tau_per_class, double weight) {
  ForwardCache cache = forward(theta, x);
  const Eigen::VectorXd& p = cache.probs;
  if (kind == UnsupervisedLoss::Entropy) {
    double entropy = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) entropy -= p(k) * safe_log(p(k));
    // dlogit_j = p_j (sum_k p_k log p_k - log p_j)
    Eigen::VectorXd logp = p.unaryExpr([](double v) { return safe_log(v); });
    const double mean_logp = p.dot(logp);
    Eigen::VectorXd dlogits = weight * (p.array() * (mean_logp - logp.array()));
    return {weight * entropy, backprop_from_dlogits(theta, x, cache, dlogits)};
  }
  // Pseudo-label: argmax ties break toward the smallest class index.
  for (Eigen::Index k = 0; k < tau_per_class.size(); ++k)
    if (!(tau_per_class(k) > 0.0 && tau_per_class(k) <= 1.0))
      throw ValidationError("pseudo-label: tau outside (0,1]");
  Eigen::Index yhat = 0;
  for (Eigen::Index k = 1; k < p.size(); ++k)
    if (p(k) > p(yhat)) yhat = k;
  if (p(yhat) < tau_per_class(yhat) || weight == 0.0)
    return {0.0, Gradient::zeros_like(theta)};
  const double loss = -weight * safe_log(p(yhat));
  Eigen::VectorXd dlogits = weight * p;
  dlogits(yhat) -= weight;
  return {loss, backprop_from_dlogits(theta, x, cache, dlogits)};
}

}  // namespace ssmnar
