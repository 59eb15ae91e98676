#include "lcft/loss.hpp"

namespace lcft {

std::string_view to_string(LossKind kind) {
  return kind == LossKind::MeanSquaredError ? "mse" : "xent";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse") return LossKind::MeanSquaredError;
  if (name == "xent" || name == "cross_entropy") return LossKind::CrossEntropy;
  throw ConfigError("unknown loss kind: " + std::string(name));
}

}  // namespace lcft
