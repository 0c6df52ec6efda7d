#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "helpers.hpp"
#include "ssmnar/core.hpp"
#include "ssmnar/io.hpp"

using namespace ssmnar;

namespace {

Dataset tiny_labeled() {
  Dataset ds;
  ds.num_classes = 2;
  ds.features.resize(3, 2);
  ds.features << 0.1, -0.5, 1.25, 2.0, -3.0, 0.0;
  ds.labels = {0, 1, 0};
  ds.indicator = {1, 1, 1};
  return ds;
}

}  // namespace

TEST_CASE("validate accepts a fully labeled dataset") {
  CHECK_NOTHROW(validate(tiny_labeled()));
}

TEST_CASE("validate rejects indicator set with absent label") {
  Dataset ds = tiny_labeled();
  ds.labels[1] = kMissingLabel;  // but indicator stays 1
  CHECK_THROWS_AS(validate(ds), ValidationError);
}

TEST_CASE("validate rejects label present with indicator clear") {
  Dataset ds = tiny_labeled();
  ds.indicator[2] = 0;  // label still present
  CHECK_THROWS_AS(validate(ds), ValidationError);
}

TEST_CASE("validate rejects a dataset with no labeled samples") {
  Dataset ds = tiny_labeled();
  for (int i = 0; i < ds.size(); ++i) {
    ds.labels[i] = kMissingLabel;
    ds.indicator[i] = 0;
  }
  CHECK_THROWS_AS(validate(ds), ValidationError);
}

TEST_CASE("validate rejects out-of-range labels") {
  Dataset ds = tiny_labeled();
  ds.labels[0] = 2;  // K = 2, valid indices are 0 and 1
  CHECK_THROWS_AS(validate(ds), ValidationError);
}

TEST_CASE("error message names the offending index") {
  Dataset ds = tiny_labeled();
  ds.labels[1] = kMissingLabel;
  try {
    validate(ds);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("content_sorted_indices is invariant to row permutation") {
  Rng rng(7);
  Dataset ds = testutil::random_dataset(40, 3, 4, rng);

  // Permute the rows and check both orders visit the same content.
  std::vector<int> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  Dataset shuffled = ds;
  for (int i = 0; i < ds.size(); ++i) {
    shuffled.features.row(i) = ds.features.row(perm[i]);
    shuffled.labels[i] = ds.labels[perm[i]];
    shuffled.indicator[i] = ds.indicator[perm[i]];
  }

  const auto a = content_sorted_indices(ds);
  const auto b = content_sorted_indices(shuffled);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(ds.features.row(a[i]) == shuffled.features.row(b[i]));
    CHECK(ds.labels[a[i]] == shuffled.labels[b[i]]);
    CHECK(ds.indicator[a[i]] == shuffled.indicator[b[i]]);
  }
}

TEST_CASE("dataset file round-trip is lossless") {
  Rng rng(11);
  Dataset ds = testutil::random_dataset(25, 3, 4, rng, 0.5);
  // Exercise awkward feature values.
  ds.features(0, 0) = 1.0 / 3.0;
  ds.features(1, 1) = -1e-17;
  ds.features(2, 2) = 12345678.987654321;

  const std::string path =
      (std::filesystem::temp_directory_path() / "ssmnar_roundtrip.txt").string();
  write_dataset(path, ds);
  Dataset back = read_dataset(path);
  std::remove(path.c_str());

  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim() == ds.dim());
  CHECK(back.num_classes == ds.num_classes);
  CHECK(back.features == ds.features);  // exact: 17 significant digits
  CHECK(back.labels == ds.labels);
  CHECK(back.indicator == ds.indicator);
}

TEST_CASE("truth file round-trip") {
  SealedTruth truth;
  truth.labels = {0, 2, 1, 1};
  truth.true_phi = Eigen::Vector3d(0.5, 0.25, 1.0 / 3.0);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ssmnar_truth.txt").string();
  write_truth(path, truth, 3);
  SealedTruth back = read_truth(path);
  std::remove(path.c_str());
  CHECK(back.labels == truth.labels);
  REQUIRE(back.true_phi.has_value());
  CHECK((*back.true_phi - *truth.true_phi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model checkpoint round-trip, both architectures") {
  Rng rng(3);
  for (auto make : {+[] { return ModelParams::linear(4, 3); },
                    +[] { return ModelParams::hidden(4, 3, 5); }}) {
    ModelParams theta = make();
    theta.randomize(rng);
    const std::string path =
        (std::filesystem::temp_directory_path() / "ssmnar_model.txt").string();
    save_model(path, theta);
    ModelParams back = load_model(path);
    std::remove(path.c_str());
    CHECK(back.arch == theta.arch);
    CHECK(back.flatten() == theta.flatten());
  }
}

TEST_CASE("rng determinism and stream splitting") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

  Rng base(42);
  Rng s1 = base.split(1);
  Rng s1_again = base.split(1);
  Rng s2 = base.split(2);
  CHECK(s1.uniform() == s1_again.uniform());
  CHECK(s1.split(0).uniform() != s2.split(0).uniform());
}
