#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "ssmnar/core.hpp"
#include "ssmnar/mechanism.hpp"
#include "ssmnar/model.hpp"
#include "ssmnar/risk.hpp"
#include "ssmnar/rng.hpp"

namespace ssmnar {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.1;
  double momentum = 0.0;         // plain SGD by default
  RiskConfig risk;
  double buffer_momentum = 0.99; // mu for the moment-buffered prior
  double eps_phi = 1e-3;
  int eval_every = 1;            // evaluation cadence in epochs

  void check() const;
};

struct CurveRow {
  int epoch = 0;
  double train_risk = 0.0;
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  double test_loss = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsReport {
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_class_accuracy;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> phi_mse;  // vs sealed truth, simulation mode only
  std::vector<CurveRow> curves;
};

struct TrainResult {
  ModelParams theta;
  Mechanism phi;
  MetricsReport report;
};

// Debiased SSL training: SGD on the debiased risk with minibatches drawn
// separately from the labeled and unlabeled subsets. The mechanism comes
// from the configured source; phi_input is required for source Fixed and
// overrides any estimation. test, when given, must be fully labeled and is
// evaluated every eval_every epochs.
TrainResult train_debiased(const Dataset& dataset, const ModelParams& theta0,
                           const TrainConfig& config,
                           const std::optional<Mechanism>& phi_input, Rng& rng,
                           const Dataset* test = nullptr,
                           const Eigen::VectorXd* true_phi = nullptr);

// Accuracy / per-class accuracy / mean negative log-likelihood on a fully
// labeled test set.
MetricsReport evaluate(const ModelParams& theta, const Dataset& sealed_test);

// ||phi_hat - phi_star||^2 / ||phi_star||^2.
double normalized_phi_mse(const Eigen::VectorXd& phi_hat,
                          const Eigen::VectorXd& phi_star);

}  // namespace ssmnar
