#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcft/dataset.hpp"
#include "lcft/params.hpp"
#include "lcft/tape.hpp"

namespace lcft {

enum class ModelKind { LR, WideDeepLite, DinLite };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Parameter array names shared by all model kinds.
namespace param_names {
inline constexpr std::string_view kUserEmbedding = "emb.user";
inline constexpr std::string_view kItemEmbedding = "emb.item";
inline constexpr std::string_view kCategoryEmbedding = "emb.category";
inline constexpr std::string_view kLrWeight = "lr.weight";
inline constexpr std::string_view kLrBias = "lr.bias";
inline constexpr std::string_view kWideWeight = "wide.weight";
inline constexpr std::string_view kAttentionProjection = "att.proj";
std::string mlp_weight(std::size_t layer);
std::string mlp_bias(std::size_t layer);
bool is_embedding(std::string_view name);
}  // namespace param_names

struct ModelConfig {
  ModelKind kind = ModelKind::LR;
  Vocab vocab;
  Index embed_dim = 16;
  std::vector<Index> hidden{64, 32};  // ReLU layers before the final 1-unit layer
  // When false the user id is not a model input and there is no user table.
  bool use_user_feature = true;

  Index num_fields() const { return use_user_feature ? 4 : 3; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Parameters of one CTR model plus the metadata needed to rebuild its graph.
//
//   LR            sigmoid(w . (e_user + e_item + e_cat + mean(history)) + b)
//   WideDeepLite  sigmoid(wide . x + MLP(x)),  x = [e_user, e_item, e_cat, mean(history)]
//   DinLite       as WideDeepLite with history pooled by softmax attention whose
//                 scores are <e_hist_j, e_item P>
struct ModelParams {
  ModelConfig config;
  ParameterSet params;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Embeddings ~ U(-0.01, 0.01); weights Glorot-uniform; biases 0.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

// Feature columns for a batch; history ids are flattened with per-sample offsets.
struct BatchInputs {
  std::vector<Index> user_ids;
  std::vector<Index> item_ids;
  std::vector<Index> category_ids;
  std::vector<Index> history_ids;
  std::vector<Index> history_offsets;  // size batch + 1

  std::size_t size() const { return user_ids.size(); }
};

BatchInputs make_batch(std::span<const Sample> samples);
BatchInputs make_batch(std::span<const Sample* const> samples);

// Records the model graph on a fresh tape. The returned tape references
// `model.params`, which must stay alive and unchanged until backward runs.
struct ForwardPass {
  GradientTape tape;
  GradientTape::NodeId output;
  const Matrix& predictions() const { return tape.value(output); }
};

ForwardPass forward(const ModelParams& model, const BatchInputs& batch);

std::vector<double> predict(const ModelParams& model, std::span<const Sample> samples);

// Parameters a batch can update: embedding rows by id, dense arrays wholesale.
struct TouchedSet {
  std::map<std::string, std::vector<Index>, std::less<>> rows;  // sorted, unique
  std::vector<std::string> dense;                               // sorted, unique

  void merge(const TouchedSet& other);
  bool touches_row(std::string_view table, Index row) const;
  bool touches_dense(std::string_view name) const;
  friend bool operator==(const TouchedSet&, const TouchedSet&) = default;
};

TouchedSet touched_rows(const ModelConfig& config, std::span<const Sample> batch);

}  // namespace lcft
