#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmnar {

// Probability floor applied before any logarithm.
inline constexpr double kProbFloor = 1e-12;

inline double safe_log(double p) {
  return std::log(p < kProbFloor ? kProbFloor : p);
}

inline constexpr int kMissingLabel = -1;

// Thrown on invalid inputs / invariant violations (CLI exit code 1).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when an optimization loop diverges (CLI exit code 2).
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-class observation probabilities phi_k = P(r=1 | y=k).
struct Mechanism {
  Eigen::VectorXd phi;

  int num_classes() const { return static_cast<int>(phi.size()); }

  static Mechanism constant(int num_classes, double value) {
    Mechanism m;
    m.phi = Eigen::VectorXd::Constant(num_classes, value);
    return m;
  }

  Mechanism clamped(double eps) const {
    Mechanism m;
    m.phi = phi.cwiseMax(eps).cwiseMin(1.0 - eps);
    return m;
  }
};

// Features plus partially observed labels under the (y .* r) convention:
// labels[i] is a class index in [0, K) iff indicator[i] == 1, otherwise
// kMissingLabel. Class indices are 0-based internally, 1-based in files.
struct Dataset {
  Eigen::MatrixXd features;        // n x d
  std::vector<int> labels;         // length n, kMissingLabel where hidden
  std::vector<std::uint8_t> indicator;  // length n, r_i
  int num_classes = 0;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }

  int labeled_count() const {
    int c = 0;
    for (auto r : indicator) c += r;
    return c;
  }
  int unlabeled_count() const { return size() - labeled_count(); }

  // Labeled-sample count per class.
  std::vector<int> class_labeled_counts() const {
    std::vector<int> counts(num_classes, 0);
    for (int i = 0; i < size(); ++i)
      if (indicator[i]) counts[labels[i]]++;
    return counts;
  }
};

// Ground truth hidden by a masking scenario. Kept out of Dataset so no
// estimator can read it; only evaluation/metrics code should open it.
struct SealedTruth {
  std::vector<int> labels;                 // full label vector, 0-based
  std::optional<Eigen::VectorXd> true_phi; // known for synthetic scenarios
};

struct MaskedDataset {
  Dataset data;
  SealedTruth truth;
};

// Checks every Dataset invariant; throws ValidationError naming the first
// violated one with the offending index.
void validate(const Dataset& dataset);

// Stable index order depending only on sample content, not row position.
// Optimization loops draw minibatches through this order so fits are
// invariant to input row permutation.
std::vector<int> content_sorted_indices(const Dataset& dataset);

}  // namespace ssmnar
