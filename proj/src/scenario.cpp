#include "ssmnar/scenario.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <numeric>

namespace ssmnar {

std::vector<int> geometric_counts(int n1, double gamma, int num_classes) {
  if (n1 < 1) throw ValidationError("geometric_counts: n1 must be >= 1");
  if (gamma <= 0.0) throw ValidationError("geometric_counts: gamma must be > 0");
  if (num_classes < 2) throw ValidationError("geometric_counts: K must be >= 2");
  std::vector<int> counts(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    const double exact =
        n1 * std::pow(gamma, -static_cast<double>(k) / (num_classes - 1));
    // nearbyint under the default rounding mode is round-half-to-even
    counts[k] = std::max(1, static_cast<int>(std::nearbyint(exact)));
  }
  return counts;
}

Mechanism compose_mechanism(const Eigen::VectorXd& p_r_given_s,
                            const Eigen::MatrixXd& p_s_given_y) {
  if (p_s_given_y.cols() != p_r_given_s.size())
    throw ValidationError("compose_mechanism: dimension mismatch");
  for (Eigen::Index s = 0; s < p_r_given_s.size(); ++s)
    if (p_r_given_s(s) < 0.0 || p_r_given_s(s) > 1.0)
      throw ValidationError("compose_mechanism: p(r|s) outside [0,1]");
  for (Eigen::Index k = 0; k < p_s_given_y.rows(); ++k)
    if (std::abs(p_s_given_y.row(k).sum() - 1.0) > 1e-9)
      throw ValidationError("compose_mechanism: p(s|y) row not stochastic");
  Mechanism m;
  m.phi = p_s_given_y * p_r_given_s;
  return m;
}

MaskComposed nodule_subtlety_preset() {
  MaskComposed mask;
  mask.p_r_given_s = Eigen::VectorXd(5);
  mask.p_r_given_s << 0.1, 0.1, 0.1, 0.9, 0.95;
  mask.p_s_given_y = Eigen::MatrixXd(2, 5);
  // benign nodules sit mostly on subtle scores, malignant on obvious ones;
  // rows solve sum_s p(r|s) p(s|y) = 0.57 and 0.92
  mask.p_s_given_y << 0.1375, 0.1375, 0.1375, 0.5875, 0.0,
                      0.0,    0.0,    0.0,    0.6,    0.4;
  return mask;
}

Dataset synth_gaussian_mixture(const GaussianMixtureSpec& spec, Rng& rng) {
  if (spec.sigma <= 0.0) throw ValidationError("gaussian mixture: sigma must be > 0");
  if (static_cast<int>(spec.means.size()) != spec.num_classes ||
      static_cast<int>(spec.counts.size()) != spec.num_classes)
    throw ValidationError("gaussian mixture: means/counts length != class count");
  int n = 0;
  for (int c : spec.counts) {
    if (c < 1) throw ValidationError("gaussian mixture: count must be >= 1");
    n += c;
  }
  Dataset data;
  data.num_classes = spec.num_classes;
  data.features.resize(n, spec.dim);
  data.labels.resize(n);
  data.indicator.assign(n, 1);
  int row = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    if (spec.means[k].size() != spec.dim)
      throw ValidationError("gaussian mixture: mean dimension mismatch");
    for (int i = 0; i < spec.counts[k]; ++i, ++row) {
      for (int j = 0; j < spec.dim; ++j)
        data.features(row, j) = spec.means[k](j) + spec.sigma * rng.normal();
      data.labels[row] = k;
    }
  }
  return data;
}

namespace {

void require_fully_labeled(const Dataset& full) {
  for (int i = 0; i < full.size(); ++i)
    if (!full.indicator[i] || full.labels[i] == kMissingLabel)
      throw ValidationError("apply_mask: input must have every label present");
}

MaskedDataset mask_bernoulli(const Dataset& full, const Eigen::VectorXd& phi,
                             Rng& rng) {
  if (phi.size() != full.num_classes)
    throw ValidationError("apply_mask: phi length != class count");
  MaskedDataset out;
  out.data = full;
  out.truth.labels = full.labels;
  out.truth.true_phi = phi;
  for (int i = 0; i < full.size(); ++i) {
    if (!rng.bernoulli(phi(full.labels[i]))) {
      out.data.labels[i] = kMissingLabel;
      out.data.indicator[i] = 0;
    }
  }
  validate(out.data);
  return out;
}

MaskedDataset mask_geometric(const Dataset& full, const MaskGeometricImbalance& spec,
                             Rng& rng) {
  const int k_classes = full.num_classes;
  const auto labeled_counts = geometric_counts(spec.n1, spec.gamma, k_classes);
  std::vector<std::vector<int>> by_class(k_classes);
  for (int i = 0; i < full.size(); ++i) by_class[full.labels[i]].push_back(i);

  std::vector<int> keep;                     // selected rows, original order
  std::vector<std::uint8_t> keep_labeled(full.size(), 0);
  std::vector<std::uint8_t> keep_row(full.size(), 0);
  std::vector<double> phi_true(k_classes, 0.0);

  for (int k = 0; k < k_classes; ++k) {
    auto pool = by_class[k];
    if (static_cast<int>(pool.size()) < labeled_counts[k])
      throw ValidationError("apply_mask: class " + std::to_string(k + 1) +
                            " has fewer samples than its labeled count");
    std::shuffle(pool.begin(), pool.end(), rng.engine());
    for (int i = 0; i < labeled_counts[k]; ++i) {
      keep_labeled[pool[i]] = 1;
      keep_row[pool[i]] = 1;
    }
    int unlabeled_take = static_cast<int>(pool.size()) - labeled_counts[k];
    if (spec.cap_unlabeled) {
      const auto unl_counts =
          geometric_counts(spec.n1, 1.0 / spec.gamma, k_classes);
      unlabeled_take = std::min(unlabeled_take, unl_counts[k]);
    }
    for (int i = labeled_counts[k]; i < labeled_counts[k] + unlabeled_take; ++i)
      keep_row[pool[i]] = 1;
    phi_true[k] = static_cast<double>(labeled_counts[k]) /
                  (labeled_counts[k] + unlabeled_take);
  }
  for (int i = 0; i < full.size(); ++i)
    if (keep_row[i]) keep.push_back(i);

  MaskedDataset out;
  out.data.num_classes = k_classes;
  out.data.features.resize(keep.size(), full.dim());
  out.data.labels.resize(keep.size());
  out.data.indicator.resize(keep.size());
  out.truth.labels.resize(keep.size());
  out.truth.true_phi = Eigen::Map<Eigen::VectorXd>(phi_true.data(), k_classes);
  for (std::size_t row = 0; row < keep.size(); ++row) {
    const int i = keep[row];
    out.data.features.row(row) = full.features.row(i);
    out.truth.labels[row] = full.labels[i];
    if (keep_labeled[i]) {
      out.data.labels[row] = full.labels[i];
      out.data.indicator[row] = 1;
    } else {
      out.data.labels[row] = kMissingLabel;
      out.data.indicator[row] = 0;
    }
  }
  validate(out.data);
  return out;
}

}  // namespace

MaskedDataset apply_mask(const Dataset& full, const ScenarioSpec& spec, Rng& rng) {
  require_fully_labeled(full);
  if (const auto* mcar = std::get_if<MaskMcar>(&spec.mask)) {
    return mask_bernoulli(
        full, Eigen::VectorXd::Constant(full.num_classes, mcar->rate), rng);
  }
  if (const auto* cb = std::get_if<MaskClassBernoulli>(&spec.mask)) {
    return mask_bernoulli(full, cb->phi.phi, rng);
  }
  if (const auto* comp = std::get_if<MaskComposed>(&spec.mask)) {
    Mechanism phi = compose_mechanism(comp->p_r_given_s, comp->p_s_given_y);
    return mask_bernoulli(full, phi.phi, rng);
  }
  return mask_geometric(full, std::get<MaskGeometricImbalance>(spec.mask), rng);
}

}  // namespace ssmnar
