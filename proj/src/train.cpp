#include "ssmnar/train.hpp"

#include <cmath>
#include <numeric>

#include "batching.hpp"

namespace ssmnar {

void TrainConfig::check() const {
  if (epochs < 0) throw ValidationError("train config: epochs < 0");
  if (batch_size < 1) throw ValidationError("train config: batch size < 1");
  if (learning_rate <= 0.0)
    throw ValidationError("train config: learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ValidationError("train config: momentum outside [0,1)");
  if (buffer_momentum < 0.0 || buffer_momentum > 1.0)
    throw ValidationError("train config: buffer momentum outside [0,1]");
  if (eval_every < 1) throw ValidationError("train config: eval cadence < 1");
  risk.check();
}

MetricsReport evaluate(const ModelParams& theta, const Dataset& sealed_test) {
  MetricsReport report;
  report.per_class_accuracy.assign(sealed_test.num_classes, 0.0);
  std::vector<int> class_total(sealed_test.num_classes, 0);
  int correct = 0;
  double nll = 0.0;
  for (int i = 0; i < sealed_test.size(); ++i) {
    const int y = sealed_test.labels[i];
    if (y == kMissingLabel)
      throw ValidationError("evaluate: test set has a missing label");
    Eigen::VectorXd p = predict_proba(theta, sealed_test.features.row(i).transpose());
    Eigen::Index yhat = 0;
    for (Eigen::Index k = 1; k < p.size(); ++k)
      if (p(k) > p(yhat)) yhat = k;
    class_total[y]++;
    if (static_cast<int>(yhat) == y) {
      correct++;
      report.per_class_accuracy[y] += 1.0;
    }
    nll -= safe_log(p(y));
  }
  for (int k = 0; k < sealed_test.num_classes; ++k)
    if (class_total[k] > 0) report.per_class_accuracy[k] /= class_total[k];
  report.accuracy = static_cast<double>(correct) / sealed_test.size();
  report.test_loss = nll / sealed_test.size();
  return report;
}

double normalized_phi_mse(const Eigen::VectorXd& phi_hat,
                          const Eigen::VectorXd& phi_star) {
  if (phi_hat.size() != phi_star.size())
    throw ValidationError("phi mse: length mismatch");
  const double denom = phi_star.squaredNorm();
  if (denom == 0.0) throw ValidationError("phi mse: zero reference mechanism");
  return (phi_hat - phi_star).squaredNorm() / denom;
}

TrainResult train_debiased(const Dataset& dataset, const ModelParams& theta0,
                           const TrainConfig& config,
                           const std::optional<Mechanism>& phi_input, Rng& rng,
                           const Dataset* test, const Eigen::VectorXd* true_phi) {
  config.check();
  validate(dataset);
  if (config.risk.source == MechanismSource::Fixed && !phi_input)
    throw ValidationError("train: mechanism source 'fixed' requires phi input");

  const double n = dataset.size();
  const double frac_l = dataset.labeled_count() / n;
  const double frac_u = 1.0 - frac_l;

  detail::BatchSampler labeled, unlabeled;
  for (int idx : content_sorted_indices(dataset)) {
    if (dataset.indicator[idx]) labeled.indices.push_back(idx);
    else unlabeled.indices.push_back(idx);
  }
  const int steps_per_epoch = std::max<int>(
      1, (static_cast<int>(labeled.indices.size()) + config.batch_size - 1) /
             config.batch_size);

  ModelParams theta = theta0;
  Gradient velocity = Gradient::zeros_like(theta);
  Buffer buffer{Eigen::VectorXd::Constant(dataset.num_classes,
                                          1.0 / dataset.num_classes),
                config.buffer_momentum};

  Mechanism phi = phi_input.value_or(Mechanism::constant(dataset.num_classes, frac_l));
  if (config.risk.source == MechanismSource::Mcar)
    phi = Mechanism::constant(dataset.num_classes, frac_l);
  else if (config.risk.source == MechanismSource::MomentBuffered)
    phi = moment_estimator(dataset, {buffer.p_buffer, PriorProvenance::Buffered},
                           config.eps_phi)
              .clamped;

  TrainResult result;
  result.theta = theta;
  result.phi = phi;

  auto full_risk = [&]() {
    return debiased_ssl_risk(theta, dataset, phi, config.risk).first;
  };
  auto record = [&](int epoch) {
    CurveRow row;
    row.epoch = epoch;
    row.train_risk = full_risk();
    if (test && epoch % config.eval_every == 0) {
      MetricsReport eval = evaluate(theta, *test);
      row.test_accuracy = eval.accuracy;
      row.test_loss = eval.test_loss;
    }
    result.report.curves.push_back(row);
    return row.train_risk;
  };

  double prev_risk = record(0);
  int rising = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (int step = 0; step < steps_per_epoch; ++step) {
      auto bl = labeled.draw(std::min<int>(config.batch_size,
                                           labeled.indices.size()), rng);
      auto bu = unlabeled.draw(std::min<int>(config.batch_size,
                                             unlabeled.indices.size()), rng);
      Gradient grad;
      if (config.risk.source == MechanismSource::MomentGradient) {
        std::vector<int> prior_idx = bl;
        prior_idx.insert(prior_idx.end(), bu.begin(), bu.end());
        grad = debiased_batch_moment_grad(theta, dataset, bl, bu, prior_idx,
                                          frac_l, frac_u, config.risk,
                                          config.eps_phi, &phi)
                   .second;
      } else {
        if (config.risk.source == MechanismSource::MomentBuffered) {
          // batch-level prior through the moving-average buffer; the phi
          // derived this way carries no gradient into theta
          Eigen::VectorXd p_batch = Eigen::VectorXd::Zero(dataset.num_classes);
          std::vector<int> batch = bl;
          batch.insert(batch.end(), bu.begin(), bu.end());
          for (int i : batch)
            p_batch += predict_proba(theta, dataset.features.row(i).transpose());
          p_batch /= static_cast<double>(batch.size());
          buffer = buffer_update(buffer, {p_batch, PriorProvenance::ModelBased});
          phi = moment_estimator(dataset,
                                 {buffer.p_buffer, PriorProvenance::Buffered},
                                 config.eps_phi)
                    .clamped;
        }
        grad = debiased_batch(theta, dataset, bl, bu, frac_l, frac_u, phi,
                              config.risk)
                   .second;
      }
      if (!grad.all_finite())
        throw DivergenceError("train: non-finite gradient at epoch " +
                              std::to_string(epoch));
      velocity.scale(config.momentum);
      velocity.add_scaled(grad, 1.0);
      Eigen::VectorXd flat =
          theta.flatten() - config.learning_rate * velocity.flatten();
      theta.unflatten(flat);
    }
    const double risk = record(epoch);
    if (!std::isfinite(risk))
      throw DivergenceError("train: non-finite risk at epoch " +
                            std::to_string(epoch));
    rising = (risk > prev_risk) ? rising + 1 : 0;
    if (rising >= 10)
      throw DivergenceError("train: risk increased for 10 consecutive epochs");
    prev_risk = risk;
  }

  result.theta = theta;
  result.phi = phi;
  if (test) {
    MetricsReport final_eval = evaluate(theta, *test);
    final_eval.curves = result.report.curves;
    result.report = final_eval;
  }
  if (true_phi)
    result.report.phi_mse = normalized_phi_mse(result.phi.phi, *true_phi);
  return result;
}

}  // namespace ssmnar
