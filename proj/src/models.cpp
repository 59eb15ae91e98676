#include "lcft/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace lcft {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LR:
      return "lr";
    case ModelKind::WideDeepLite:
      return "widedeep";
    case ModelKind::DinLite:
      return "din";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "lr") return ModelKind::LR;
  if (name == "widedeep" || name == "wide_deep") return ModelKind::WideDeepLite;
  if (name == "din") return ModelKind::DinLite;
  throw ConfigError("unknown model kind: " + std::string(name));
}

namespace param_names {

std::string mlp_weight(std::size_t layer) { return "mlp." + std::to_string(layer) + ".weight"; }
std::string mlp_bias(std::size_t layer) { return "mlp." + std::to_string(layer) + ".bias"; }

bool is_embedding(std::string_view name) { return name.starts_with("emb."); }

}  // namespace param_names

namespace {

namespace pn = param_names;

Matrix uniform_matrix(Index rows, Index cols, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  return m;
}

Matrix glorot(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_matrix(fan_in, fan_out, limit, rng);
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  const Index d = config.embed_dim;
  if (d < 1) throw ConfigError("init_model: embed_dim must be >= 1");
  if ((config.use_user_feature && config.vocab.num_users < 1) || config.vocab.num_items < 1 || config.vocab.num_categories < 1) {
    throw ConfigError("init_model: vocabulary sizes must be >= 1");
  }
  for (Index h : config.hidden) {
    if (h < 1) throw ConfigError("init_model: hidden sizes must be >= 1");
  }

  std::mt19937_64 rng(seed);
  ModelParams model;
  model.config = config;
  ParameterSet& p = model.params;
  if (config.use_user_feature) {
    p.add(std::string(pn::kUserEmbedding), uniform_matrix(config.vocab.num_users, d, 0.01, rng));
  }
  p.add(std::string(pn::kItemEmbedding), uniform_matrix(config.vocab.num_items, d, 0.01, rng));
  p.add(std::string(pn::kCategoryEmbedding),
        uniform_matrix(config.vocab.num_categories, d, 0.01, rng));

  if (config.kind == ModelKind::LR) {
    p.add(std::string(pn::kLrWeight), glorot(d, 1, rng));
    p.add(std::string(pn::kLrBias), Matrix::Zero(1, 1));
    return model;
  }

  const Index input = config.num_fields() * d;
  p.add(std::string(pn::kWideWeight), glorot(input, 1, rng));
  Index fan_in = input;
  std::size_t layer = 0;
  for (Index h : config.hidden) {
    p.add(pn::mlp_weight(layer), glorot(fan_in, h, rng));
    p.add(pn::mlp_bias(layer), Matrix::Zero(1, h));
    fan_in = h;
    ++layer;
  }
  p.add(pn::mlp_weight(layer), glorot(fan_in, 1, rng));
  p.add(pn::mlp_bias(layer), Matrix::Zero(1, 1));
  if (config.kind == ModelKind::DinLite) {
    p.add(std::string(pn::kAttentionProjection), glorot(d, d, rng));
  }
  return model;
}

namespace {

template <typename Get>
BatchInputs make_batch_impl(std::size_t n, Get&& get) {
  BatchInputs b;
  b.user_ids.reserve(n);
  b.item_ids.reserve(n);
  b.category_ids.reserve(n);
  b.history_offsets.reserve(n + 1);
  b.history_offsets.push_back(0);
  for (std::size_t k = 0; k < n; ++k) {
    const Sample& s = get(k);
    b.user_ids.push_back(s.user_id);
    b.item_ids.push_back(s.item_id);
    b.category_ids.push_back(s.category_id);
    b.history_ids.insert(b.history_ids.end(), s.history.begin(), s.history.end());
    b.history_offsets.push_back(static_cast<Index>(b.history_ids.size()));
  }
  return b;
}

}  // namespace

BatchInputs make_batch(std::span<const Sample> samples) {
  return make_batch_impl(samples.size(), [&](std::size_t k) -> const Sample& { return samples[k]; });
}

BatchInputs make_batch(std::span<const Sample* const> samples) {
  return make_batch_impl(samples.size(),
                         [&](std::size_t k) -> const Sample& { return *samples[k]; });
}

ForwardPass forward(const ModelParams& model, const BatchInputs& batch) {
  if (batch.size() == 0) throw InputError("forward: empty batch");
  if (batch.history_offsets.size() != batch.size() + 1) {
    throw ContractError("forward: history offsets do not match the batch size");
  }
  GradientTape tape(model.params);
  const bool with_user = model.config.use_user_feature;
  const auto item = tape.lookup(pn::kItemEmbedding, batch.item_ids);
  const auto category = tape.lookup(pn::kCategoryEmbedding, batch.category_ids);
  const auto history = tape.lookup(pn::kItemEmbedding, batch.history_ids);

  GradientTape::NodeId logit{};
  if (model.config.kind == ModelKind::LR) {
    const auto pooled = tape.segment_pool(history, batch.history_offsets, PoolKind::Mean);
    auto summed = tape.add(tape.add(item, category), pooled);
    if (with_user) summed = tape.add(tape.lookup(pn::kUserEmbedding, batch.user_ids), summed);
    logit = tape.affine(summed, tape.parameter(pn::kLrWeight), tape.parameter(pn::kLrBias));
  } else {
    GradientTape::NodeId pooled{};
    if (model.config.kind == ModelKind::DinLite) {
      const auto query = tape.matmul(item, tape.parameter(pn::kAttentionProjection));
      pooled = tape.attention_pool(history, query, batch.history_offsets);
    } else {
      pooled = tape.segment_pool(history, batch.history_offsets, PoolKind::Mean);
    }
    std::vector<GradientTape::NodeId> parts;
    if (with_user) parts.push_back(tape.lookup(pn::kUserEmbedding, batch.user_ids));
    parts.insert(parts.end(), {item, category, pooled});
    const auto x = tape.concat_cols(parts);
    const auto wide = tape.matmul(x, tape.parameter(pn::kWideWeight));
    auto h = x;
    const std::size_t layers = model.config.hidden.size();
    for (std::size_t layer = 0; layer < layers; ++layer) {
      h = tape.relu(tape.affine(h, tape.parameter(pn::mlp_weight(layer)),
                                tape.parameter(pn::mlp_bias(layer))));
    }
    const auto deep = tape.affine(h, tape.parameter(pn::mlp_weight(layers)),
                                  tape.parameter(pn::mlp_bias(layers)));
    logit = tape.add(wide, deep);
  }
  const auto output = tape.sigmoid(logit);
  return ForwardPass{std::move(tape), output};
}

std::vector<double> predict(const ModelParams& model, std::span<const Sample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const auto chunk = samples.subspan(start, std::min(kChunk, samples.size() - start));
    const ForwardPass pass = forward(model, make_batch(chunk));
    const Matrix& p = pass.predictions();
    for (Index k = 0; k < p.rows(); ++k) out.push_back(p(k, 0));
  }
  return out;
}

void TouchedSet::merge(const TouchedSet& other) {
  for (const auto& [name, rows] : other.rows) {
    auto& mine = this->rows[name];
    std::vector<Index> merged;
    merged.reserve(mine.size() + rows.size());
    std::set_union(mine.begin(), mine.end(), rows.begin(), rows.end(), std::back_inserter(merged));
    mine = std::move(merged);
  }
  std::vector<std::string> merged;
  std::set_union(dense.begin(), dense.end(), other.dense.begin(), other.dense.end(),
                 std::back_inserter(merged));
  dense = std::move(merged);
}

bool TouchedSet::touches_row(std::string_view table, Index row) const {
  auto it = rows.find(table);
  return it != rows.end() && std::binary_search(it->second.begin(), it->second.end(), row);
}

bool TouchedSet::touches_dense(std::string_view name) const {
  return std::binary_search(dense.begin(), dense.end(), name);
}

TouchedSet touched_rows(const ModelConfig& config, std::span<const Sample> batch) {
  if (batch.empty()) throw InputError("touched_rows: empty batch");
  std::set<Index> users, items, categories;
  for (const Sample& s : batch) {
    users.insert(s.user_id);
    items.insert(s.item_id);
    categories.insert(s.category_id);
    items.insert(s.history.begin(), s.history.end());
  }
  TouchedSet t;
  if (config.use_user_feature) {
    t.rows[std::string(pn::kUserEmbedding)].assign(users.begin(), users.end());
  }
  t.rows[std::string(pn::kItemEmbedding)].assign(items.begin(), items.end());
  t.rows[std::string(pn::kCategoryEmbedding)].assign(categories.begin(), categories.end());
  if (config.kind == ModelKind::LR) {
    t.dense = {std::string(pn::kLrBias), std::string(pn::kLrWeight)};
  } else {
    t.dense.push_back(std::string(pn::kWideWeight));
    for (std::size_t layer = 0; layer <= config.hidden.size(); ++layer) {
      t.dense.push_back(pn::mlp_weight(layer));
      t.dense.push_back(pn::mlp_bias(layer));
    }
    if (config.kind == ModelKind::DinLite) {
      t.dense.push_back(std::string(pn::kAttentionProjection));
    }
  }
  std::sort(t.dense.begin(), t.dense.end());
  return t;
}

}  // namespace lcft
