#pragma once

#include <optional>

#include "ssmnar/core.hpp"
#include "ssmnar/mechanism.hpp"
#include "ssmnar/model.hpp"
#include "ssmnar/rng.hpp"
#include "ssmnar/stats.hpp"

namespace ssmnar {

struct McarTestConfig {
  double alpha = 0.05;
  bool freeze_theta = false;  // frozen-theta regime (theory-backed reference)
  MleConfig mle;              // used when theta is jointly optimized
};

struct TestReport {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  bool reject = false;
  bool theta_frozen = false;  // chi-squared reference is proved only here
  double nll_unrestricted = 0.0;
  double nll_restricted = 0.0;
  Mechanism phi_unrestricted;
  Mechanism phi_restricted;
};

// Likelihood-ratio test of phi constant across classes (MCAR) against a
// free per-class mechanism. The restricted optimum in phi is the closed
// form n_l/n, so the restricted fit only optimizes theta (or nothing in
// the frozen-theta regime). The statistic is floored at 0.
TestReport lr_test(const Dataset& dataset, const ModelParams& theta,
                   const McarTestConfig& config, Rng& rng);

}  // namespace ssmnar
