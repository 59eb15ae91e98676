#include <doctest.h>

#include <cmath>
#include <limits>

#include "lcft/loss.hpp"

using namespace lcft;

TEST_CASE("squared error") {
  CHECK(loss_mse(0.5, 0.5) == 0.0);
  CHECK(loss_mse(0.3, 2.0) == doctest::Approx(2.89).epsilon(1e-15));
  CHECK(loss_mse(0.0, 1.0) == 1.0);
  CHECK_THROWS_AS(loss_mse(std::nan(""), 1.0), DomainError);
}

TEST_CASE("generalized cross-entropy") {
  CHECK(loss_xent_generalized(0.5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_xent_generalized(0.5, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_xent_generalized(0.8, 2.0) == doctest::Approx(-1.163151).epsilon(1e-6));
  CHECK_THROWS_AS(loss_xent_generalized(std::nan(""), 1.0), DomainError);
  CHECK_THROWS_AS(loss_xent_generalized(0.5, std::numeric_limits<double>::infinity()),
                  DomainError);
}

TEST_CASE("binary labels reproduce standard binary cross-entropy exactly") {
  for (double p : {1e-3, 0.1, 0.37, 0.5, 0.92, 0.999}) {
    CHECK(loss_xent_generalized(p, 1.0) == -std::log(p));
    CHECK(loss_xent_generalized(p, 0.0) == -std::log(1.0 - p));
  }
}

TEST_CASE("predictions are clamped before the log") {
  CHECK(std::isfinite(loss_xent_generalized(0.0, 1.0)));
  CHECK(loss_xent_generalized(0.0, 1.0) == doctest::Approx(-std::log(kProbEpsilon)));
  CHECK(std::isfinite(loss_xent_generalized(1.0, -0.5)));
}

TEST_CASE("logit gradient matches finite differences of the loss through a sigmoid") {
  const auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (LossKind kind : {LossKind::MeanSquaredError, LossKind::CrossEntropy}) {
    for (double z : {-2.0, -0.3, 0.0, 0.8, 1.7}) {
      for (double y : {-0.5, 0.0, 0.4, 1.0, 2.0}) {
        const double h = 1e-6;
        const double fd =
            (loss_value(kind, sig(z + h), y) - loss_value(kind, sig(z - h), y)) / (2 * h);
        CHECK(loss_grad_logit(kind, sig(z), y) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
  // p = sigmoid(w) at w = 0 with label 1: dL/dw = p - 1.
  CHECK(loss_grad_logit(LossKind::CrossEntropy, 0.5, 1.0) == -0.5);
}

TEST_CASE("loss names") {
  CHECK(parse_loss_kind("mse") == LossKind::MeanSquaredError);
  CHECK(parse_loss_kind(to_string(LossKind::CrossEntropy)) == LossKind::CrossEntropy);
  CHECK_THROWS_AS(parse_loss_kind("hinge"), ConfigError);
}
