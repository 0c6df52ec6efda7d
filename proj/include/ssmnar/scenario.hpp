#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

#include "ssmnar/core.hpp"
#include "ssmnar/rng.hpp"

namespace ssmnar {

// Label-masking processes. ClassBernoulli and Composed draw r_i ~
// Bernoulli(phi_{y_i}); GeometricImbalance selects exact per-class labeled
// counts n_k = n_1 * gamma^{-(k-1)/(K-1)} without replacement.
struct MaskMcar {
  double rate = 0.5;
};

struct MaskClassBernoulli {
  Mechanism phi;
};

struct MaskGeometricImbalance {
  int n1 = 400;
  double gamma = 10.0;
  bool cap_unlabeled = false;  // also cap unlabeled counts (with 1/gamma)
};

struct MaskComposed {
  Eigen::VectorXd p_r_given_s;  // length S, entries in [0,1]
  Eigen::MatrixXd p_s_given_y;  // K x S, row-stochastic
};

struct ScenarioSpec {
  std::variant<MaskMcar, MaskClassBernoulli, MaskGeometricImbalance, MaskComposed>
      mask;
  std::uint64_t seed = 0;
};

struct GaussianMixtureSpec {
  int num_classes = 2;
  int dim = 2;
  std::vector<Eigen::VectorXd> means;  // one per class
  double sigma = 1.0;                  // shared isotropic std deviation
  std::vector<int> counts;             // per-class sample counts, each >= 1
};

// counts[k] = round(n1 * gamma^{-(k-1)/(K-1)}), round-half-to-even,
// floored at 1.
std::vector<int> geometric_counts(int n1, double gamma, int num_classes);

// phi_y = sum_s p(r|s) p(s|y).
Mechanism compose_mechanism(const Eigen::VectorXd& p_r_given_s,
                            const Eigen::MatrixXd& p_s_given_y);

// Subtlety-score preset for a two-class benign/malignant mix, calibrated
// so the observation probabilities are exactly (0.57, 0.92), i.e. missing
// proportions 43% and 8%.
MaskComposed nodule_subtlety_preset();

// Samples x | y=k ~ N(mean_k, sigma^2 I); all labels present.
Dataset synth_gaussian_mixture(const GaussianMixtureSpec& spec, Rng& rng);

// Hides labels per the spec; hidden labels move into the sealed truth.
// Requires every label present on input.
MaskedDataset apply_mask(const Dataset& full, const ScenarioSpec& spec, Rng& rng);

}  // namespace ssmnar
