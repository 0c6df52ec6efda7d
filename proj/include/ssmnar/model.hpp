#pragma once

#include <Eigen/Dense>

#include "ssmnar/core.hpp"
#include "ssmnar/rng.hpp"

namespace ssmnar {

enum class Architecture { LinearSoftmax, OneHiddenLayer };

// Softmax classifier p(y|x; theta): either linear logits or a single tanh
// hidden layer of configurable width.
struct ModelParams {
  Architecture arch = Architecture::LinearSoftmax;
  int input_dim = 0;
  int num_classes = 0;
  int hidden_width = 0;  // OneHiddenLayer only

  Eigen::MatrixXd w1;  // linear: K x d, hidden: h x d
  Eigen::VectorXd b1;  // linear: K,     hidden: h
  Eigen::MatrixXd w2;  // hidden: K x h
  Eigen::VectorXd b2;  // hidden: K

  static ModelParams linear(int input_dim, int num_classes);
  static ModelParams hidden(int input_dim, int num_classes, int width);

  void randomize(Rng& rng, double scale = 0.1);

  int parameter_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& v);
};

// Same shape as ModelParams; supports axpy-style accumulation.
struct Gradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static Gradient zeros_like(const ModelParams& theta);
  void add_scaled(const Gradient& other, double scale);
  void scale(double s);
  Eigen::VectorXd flatten() const;
  bool all_finite() const;
};

// Hidden activations kept for the backward pass.
struct ForwardCache {
  Eigen::VectorXd hidden;  // tanh outputs (OneHiddenLayer only)
  Eigen::VectorXd probs;
};

ForwardCache forward(const ModelParams& theta, const Eigen::VectorXd& x);

// Max-subtracted softmax probabilities for one sample.
Eigen::VectorXd predict_proba(const ModelParams& theta, const Eigen::VectorXd& x);

// Gradient of a scalar loss w.r.t. theta given its gradient in the logits.
Gradient backprop_from_dlogits(const ModelParams& theta, const Eigen::VectorXd& x,
                               const ForwardCache& cache,
                               const Eigen::VectorXd& dlogits);

// Gradient w.r.t. theta of sum_k dprobs_k * p_k (a linear functional of the
// predicted simplex). Used when gradients must flow through predicted
// probabilities, e.g. the moment-gradient mechanism path.
Gradient backprop_from_dprobs(const ModelParams& theta, const Eigen::VectorXd& x,
                              const ForwardCache& cache,
                              const Eigen::VectorXd& dprobs);

// loss = -weight * log p(y|x); exact analytic gradient.
std::pair<double, Gradient> supervised_loss_grad(const ModelParams& theta,
                                                 const Eigen::VectorXd& x, int y,
                                                 double weight);

enum class UnsupervisedLoss { Entropy, PseudoLabel };

// Entropy: loss = -weight * sum_k p_k log p_k.
// PseudoLabel: if max_k p_k >= tau, cross-entropy against the detached
// argmax (ties toward the smallest class index); otherwise loss and
// gradient are exactly zero.
std::pair<double, Gradient> unsupervised_loss_grad(const ModelParams& theta,
                                                   const Eigen::VectorXd& x,
                                                   UnsupervisedLoss kind,
                                                   double tau, double weight);

// Pseudo-label variant with a per-class threshold (the sample's threshold
// is the one of its argmax class).
std::pair<double, Gradient> unsupervised_loss_grad(
    const ModelParams& theta, const Eigen::VectorXd& x, UnsupervisedLoss kind,
    const Eigen::VectorXd& tau_per_class, double weight);

}  // namespace ssmnar
