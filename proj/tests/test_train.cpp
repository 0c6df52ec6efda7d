#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ssmnar/train.hpp"

using namespace ssmnar;

namespace {

// Overlapping two-class mixture with an MNAR mask; shared by several cases.
MaskedDataset mnar_instance(std::uint64_t seed, int per_class, double phi0,
                            double phi1, GaussianMixtureSpec* spec_out = nullptr) {
  GaussianMixtureSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.means = {Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 0)};
  spec.sigma = 1.0;
  spec.counts = {per_class, per_class};
  if (spec_out) *spec_out = spec;
  Rng rng(seed);
  Dataset full = synth_gaussian_mixture(spec, rng);
  Mechanism phi;
  phi.phi = Eigen::Vector2d(phi0, phi1);
  return apply_mask(full, ScenarioSpec{MaskClassBernoulli{phi}, 0}, rng);
}

}  // namespace

TEST_CASE("normalized_phi_mse closed forms") {
  Eigen::Vector2d star(1.0, 0.5);
  CHECK(normalized_phi_mse(star, star) == 0.0);
  CHECK(normalized_phi_mse(2.0 * star, star) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normalized_phi_mse(Eigen::Vector2d(0.5, 0.5), star) ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS_AS(normalized_phi_mse(star, Eigen::Vector2d(0, 0)), ValidationError);
}

TEST_CASE("evaluate: oracle and uniform classifiers") {
  GaussianMixtureSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.means = {Eigen::Vector2d(-8, 0), Eigen::Vector2d(8, 0)};
  spec.sigma = 1.0;
  spec.counts = {100, 100};
  Rng rng(90);
  Dataset test = synth_gaussian_mixture(spec, rng);

  MetricsReport oracle = evaluate(testutil::true_conditional(spec), test);
  CHECK(oracle.accuracy == 1.0);
  CHECK(oracle.test_loss >= 0.0);
  CHECK(oracle.test_loss < 1e-6);

  MetricsReport uniform = evaluate(ModelParams::linear(2, 2), test);
  CHECK(uniform.test_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("evaluate: hand-labeled five-sample test set") {
  Dataset test;
  test.num_classes = 2;
  test.features.resize(5, 1);
  test.features << -1, -2, 1, 2, -0.5;
  test.labels = {0, 0, 1, 1, 1};  // last one deliberately on the wrong side
  test.indicator = {1, 1, 1, 1, 1};
  ModelParams theta = ModelParams::linear(1, 2);
  theta.w1(1, 0) = 4.0;  // predicts class 1 iff x > 0
  MetricsReport report = evaluate(theta, test);
  CHECK(report.accuracy == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(report.per_class_accuracy[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.per_class_accuracy[1] ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("zero epochs returns theta0 unchanged") {
  MaskedDataset m = mnar_instance(91, 100, 0.6, 0.4);
  ModelParams theta0 = ModelParams::linear(2, 2);
  Rng rng(92);
  theta0.randomize(rng, 0.3);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.risk.source = MechanismSource::Mcar;
  TrainResult res = train_debiased(m.data, theta0, cfg, std::nullopt, rng);
  CHECK(res.theta.flatten() == theta0.flatten());
}

TEST_CASE("weighted complete-case SGD separates a well-split mixture") {
  GaussianMixtureSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.means = {Eigen::Vector2d(-5, 0), Eigen::Vector2d(5, 0)};
  spec.sigma = 1.0;
  spec.counts = {400, 400};
  Rng rng(93);
  Dataset full = synth_gaussian_mixture(spec, rng);
  MaskedDataset m = apply_mask(full, ScenarioSpec{MaskMcar{0.4}, 0}, rng);
  Dataset test = synth_gaussian_mixture(spec, rng);

  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.risk.lambda = 0.0;  // reduces to weighted complete-case SGD
  cfg.risk.source = MechanismSource::Fixed;
  const double rate = static_cast<double>(m.data.labeled_count()) / m.data.size();
  TrainResult res = train_debiased(m.data, ModelParams::linear(2, 2), cfg,
                                   Mechanism::constant(2, rate), rng, &test);
  CHECK(res.report.accuracy > 0.99);
}

TEST_CASE("train requires phi for the fixed source") {
  MaskedDataset m = mnar_instance(94, 50, 0.6, 0.4);
  TrainConfig cfg;
  cfg.risk.source = MechanismSource::Fixed;
  Rng rng(95);
  CHECK_THROWS_AS(
      train_debiased(m.data, ModelParams::linear(2, 2), cfg, std::nullopt, rng),
      ValidationError);
}

TEST_CASE("determinism: identical seeds reproduce identical reports") {
  MaskedDataset m = mnar_instance(96, 150, 0.8, 0.3);
  Dataset test = mnar_instance(97, 100, 1.0, 1.0).data;
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.risk.source = MechanismSource::MomentBuffered;

  auto run = [&]() {
    Rng rng(123);
    return train_debiased(m.data, ModelParams::linear(2, 2), cfg, std::nullopt,
                          rng, &test);
  };
  TrainResult a = run();
  TrainResult b = run();
  CHECK(a.theta.flatten() == b.theta.flatten());
  CHECK(a.phi.phi == b.phi.phi);
  CHECK(a.report.accuracy == b.report.accuracy);
  REQUIRE(a.report.curves.size() == b.report.curves.size());
  for (std::size_t i = 0; i < a.report.curves.size(); ++i)
    CHECK(a.report.curves[i].train_risk == b.report.curves[i].train_risk);
}

TEST_CASE("plug-in equivalence: fixed phi from a frozen-buffer run matches") {
  // With buffer momentum 1 the buffered prior never moves, so the moment
  // phi is constant through training; rerunning with that phi fixed must
  // reproduce the trajectory exactly (same seed, same batch draws).
  MaskedDataset m = mnar_instance(98, 200, 0.8, 0.3);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.buffer_momentum = 1.0;
  cfg.risk.source = MechanismSource::MomentBuffered;

  Rng r1(321);
  TrainResult buffered =
      train_debiased(m.data, ModelParams::linear(2, 2), cfg, std::nullopt, r1);

  TrainConfig fixed_cfg = cfg;
  fixed_cfg.risk.source = MechanismSource::Fixed;
  Rng r2(321);
  TrainResult fixed = train_debiased(m.data, ModelParams::linear(2, 2), fixed_cfg,
                                     buffered.phi, r2);
  CHECK((fixed.theta.flatten() - buffered.theta.flatten()).cwiseAbs().maxCoeff() <
        1e-6);
}

TEST_CASE("MCAR source at lambda=0 matches classical SSL's supervised term") {
  // With phi = n_l/n the supervised parts of the debiased and classical
  // risks coincide exactly; at lambda = 0 the full traces are equal.
  Rng data_rng(99);
  GaussianMixtureSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.means = {Eigen::Vector2d(-1.5, 0), Eigen::Vector2d(1.5, 0)};
  spec.sigma = 1.0;
  spec.counts = {200, 200};
  Dataset full = synth_gaussian_mixture(spec, data_rng);
  MaskedDataset m = apply_mask(full, ScenarioSpec{MaskMcar{0.5}, 0}, data_rng);

  ModelParams theta = ModelParams::linear(2, 2);
  theta.randomize(data_rng, 0.3);
  RiskConfig rc;
  rc.lambda = 0.0;
  const double rate = static_cast<double>(m.data.labeled_count()) / m.data.size();
  Mechanism phi = Mechanism::constant(2, rate);
  CHECK(debiased_ssl_risk(theta, m.data, phi, rc).first ==
        doctest::Approx(ssl_risk(theta, m.data, rc).first).epsilon(1e-12));

  // And the one-epoch training traces agree step for step.
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.risk.lambda = 0.0;
  cfg.risk.source = MechanismSource::Mcar;
  Rng r1(555);
  TrainResult mcar_run = train_debiased(m.data, theta, cfg, std::nullopt, r1);

  TrainConfig fixed_cfg = cfg;
  fixed_cfg.risk.source = MechanismSource::Fixed;
  Rng r2(555);
  TrainResult fixed_run = train_debiased(m.data, theta, fixed_cfg, phi, r2);
  CHECK(mcar_run.theta.flatten() == fixed_run.theta.flatten());
}

TEST_CASE("phi mse is reported against sealed truth only when requested") {
  MaskedDataset m = mnar_instance(100, 150, 0.8, 0.3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.risk.source = MechanismSource::MomentBuffered;
  Rng rng(101);
  TrainResult without =
      train_debiased(m.data, ModelParams::linear(2, 2), cfg, std::nullopt, rng);
  CHECK(!without.report.phi_mse.has_value());

  Rng rng2(101);
  TrainResult with_truth =
      train_debiased(m.data, ModelParams::linear(2, 2), cfg, std::nullopt, rng2,
                     nullptr, &*m.truth.true_phi);
  REQUIRE(with_truth.report.phi_mse.has_value());
  CHECK(*with_truth.report.phi_mse >= 0.0);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.check(), ValidationError);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.check(), ValidationError);
  cfg = TrainConfig{};
  cfg.eval_every = 0;
  CHECK_THROWS_AS(cfg.check(), ValidationError);
}
