#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "lcft/errors.hpp"

namespace lcft {

enum class LossKind { MeanSquaredError, CrossEntropy };

// Predictions are clamped into [kProbEpsilon, 1 - kProbEpsilon] before any log.
inline constexpr double kProbEpsilon = 1e-7;

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

template <typename Scalar>
Scalar clamp_probability(Scalar p) {
  return std::clamp(p, Scalar(kProbEpsilon), Scalar(1.0 - kProbEpsilon));
}

// (label - pred)^2. Labels may be any real number.
template <typename Scalar>
Scalar loss_mse(Scalar pred, Scalar label) {
  if (!std::isfinite(pred) || !std::isfinite(label)) {
    throw DomainError("loss_mse: non-finite input");
  }
  const Scalar diff = label - pred;
  return diff * diff;
}

// Negative log-likelihood with a generalized label:
//   -(y ln p + (1 - y) ln(1 - p)).
// For y outside [0, 1] the value can be negative; the aggregate minimum over a
// user's samples is still interior whenever the mean label lies in (0, 1).
template <typename Scalar>
Scalar loss_xent_generalized(Scalar pred, Scalar label) {
  if (std::isnan(pred) || !std::isfinite(label)) {
    throw DomainError("loss_xent_generalized: non-finite input");
  }
  const Scalar p = clamp_probability(pred);
  return -(label * std::log(p) + (Scalar(1) - label) * std::log(Scalar(1) - p));
}

template <typename Scalar>
Scalar loss_value(LossKind kind, Scalar pred, Scalar label) {
  return kind == LossKind::MeanSquaredError ? loss_mse(pred, label)
                                            : loss_xent_generalized(pred, label);
}

// dL/dz for p = sigmoid(z), fused so that the cross-entropy case reduces to
// p - y without dividing by p(1 - p). Inside the clamp region the loss is flat
// in p, so the derivative is zero there.
template <typename Scalar>
Scalar loss_grad_logit(LossKind kind, Scalar pred, Scalar label) {
  if (kind == LossKind::MeanSquaredError) {
    return Scalar(2) * (pred - label) * pred * (Scalar(1) - pred);
  }
  if (pred < Scalar(kProbEpsilon) || pred > Scalar(1.0 - kProbEpsilon)) {
    return Scalar(0);
  }
  return pred - label;
}

}  // namespace lcft
