#include "lcft/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lcft {

void SynthConfig::validate() const {
  if (num_users < 1 || num_items < 1 || num_categories < 1 || latent_dim < 1) {
    throw ConfigError("synth: user, item, category and latent counts must be >= 1");
  }
  if (min_samples < 1 || max_samples < min_samples) {
    throw ConfigError("synth: need 1 <= min_samples <= max_samples");
  }
  if (pool_size < 1) throw ConfigError("synth: pool_size must be >= 1");
  if (!(explore_rate >= 0.0 && explore_rate <= 1.0)) {
    throw ConfigError("synth: explore_rate must lie in [0, 1]");
  }
  if (!(tail_exponent > 0.0)) throw ConfigError("synth: tail_exponent must be > 0");
  if (bias_scale < 0.0 || popularity_scale < 0.0 || taste_scale < 0.0 || item_scale < 0.0 ||
      category_scale < 0.0) {
    throw ConfigError("synth: scales must be non-negative");
  }
  if (time_span < 1) throw ConfigError("synth: time_span must be >= 1");
}

TrueCtrOracle::TrueCtrOracle(Matrix user_factors, Matrix item_factors, Vector user_bias,
                             std::vector<Index> item_category)
    : user_factors_(std::move(user_factors)),
      item_factors_(std::move(item_factors)),
      user_bias_(std::move(user_bias)),
      item_category_(std::move(item_category)) {
  if (user_factors_.cols() != item_factors_.cols() || user_bias_.size() != user_factors_.rows() ||
      static_cast<Index>(item_category_.size()) != item_factors_.rows()) {
    throw ContractError("TrueCtrOracle: inconsistent factor shapes");
  }
}

double TrueCtrOracle::logit(Index user, Index item) const {
  if (user < 0 || user >= num_users() || item < 0 || item >= num_items()) {
    throw InputError("TrueCtrOracle: id out of range");
  }
  return user_factors_.row(user).dot(item_factors_.row(item)) + user_bias_(user);
}

double TrueCtrOracle::operator()(Index user, Index item) const {
  return 1.0 / (1.0 + std::exp(-logit(user, item)));
}

Index TrueCtrOracle::category_of(Index item) const {
  if (item < 0 || item >= num_items()) throw InputError("TrueCtrOracle: item out of range");
  return item_category_[static_cast<std::size_t>(item)];
}

double TrueCtrOracle::user_bias(Index user) const {
  if (user < 0 || user >= num_users()) throw InputError("TrueCtrOracle: user out of range");
  return user_bias_(user);
}

SynthData synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index k = cfg.latent_dim;
  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(k));

  // Latent structure: categories, items, the shared taste direction, users.
  Matrix centres(cfg.num_categories, k);
  for (Index c = 0; c < centres.size(); ++c) centres.data()[c] = cfg.category_scale * normal(rng);
  std::vector<Index> item_category(static_cast<std::size_t>(cfg.num_items));
  std::uniform_int_distribution<Index> pick_category(0, cfg.num_categories - 1);
  Matrix items(cfg.num_items, k);
  for (Index i = 0; i < cfg.num_items; ++i) {
    const Index c = pick_category(rng);
    item_category[static_cast<std::size_t>(i)] = c;
    for (Index d = 0; d < k; ++d) {
      items(i, d) = (centres(c, d) + cfg.item_scale * normal(rng)) * inv_sqrt_k;
    }
  }
  RowVector shared(k);
  for (Index d = 0; d < k; ++d) shared(d) = normal(rng);
  std::student_t_distribution<double> tail(cfg.tail_exponent);
  Matrix users(cfg.num_users, k);
  Vector bias(cfg.num_users);
  for (Index u = 0; u < cfg.num_users; ++u) {
    for (Index d = 0; d < k; ++d) {
      users(u, d) = cfg.popularity_scale * shared(d) + cfg.taste_scale * normal(rng);
    }
    bias(u) = cfg.bias_location + cfg.bias_scale * tail(rng);
  }
  TrueCtrOracle oracle(std::move(users), std::move(items), std::move(bias), item_category);

  // Impressions.
  std::uniform_int_distribution<Index> pick_count(cfg.min_samples, cfg.max_samples);
  std::uniform_int_distribution<std::int64_t> pick_time(0, cfg.time_span - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<Index> pick_any(0, cfg.num_items - 1);
  std::vector<Index> all_items(static_cast<std::size_t>(cfg.num_items));
  std::iota(all_items.begin(), all_items.end(), Index{0});
  const Index pool_size = std::min(cfg.pool_size, cfg.num_items);

  SynthData out;
  out.datasets.reserve(static_cast<std::size_t>(cfg.num_users));
  for (Index u = 0; u < cfg.num_users; ++u) {
    // Partial Fisher-Yates: the first pool_size entries form the user's pool.
    for (Index j = 0; j < pool_size; ++j) {
      std::uniform_int_distribution<Index> pick(j, cfg.num_items - 1);
      std::swap(all_items[static_cast<std::size_t>(j)],
                all_items[static_cast<std::size_t>(pick(rng))]);
    }
    std::uniform_int_distribution<Index> pick_from_pool(0, pool_size - 1);
    const Index n = pick_count(rng);
    std::vector<std::int64_t> times(static_cast<std::size_t>(n));
    for (auto& t : times) t = pick_time(rng);
    std::sort(times.begin(), times.end());

    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    std::vector<Index> clicked;
    for (Index s = 0; s < n; ++s) {
      Sample x;
      x.user_id = u;
      if (cfg.explore_rate > 0.0 && coin(rng) < cfg.explore_rate) {
        x.item_id = pick_any(rng);
      } else {
        x.item_id = all_items[static_cast<std::size_t>(pick_from_pool(rng))];
      }
      x.category_id = item_category[static_cast<std::size_t>(x.item_id)];
      const std::size_t keep = std::min(cfg.max_history, clicked.size());
      x.history.assign(clicked.end() - static_cast<std::ptrdiff_t>(keep), clicked.end());
      x.label = coin(rng) < oracle(u, x.item_id) ? 1.0 : 0.0;
      x.timestamp = times[static_cast<std::size_t>(s)];
      if (x.label == 1.0) clicked.push_back(x.item_id);
      samples.push_back(std::move(x));
    }
    out.datasets.emplace_back(u, std::move(samples));
  }
  out.oracle = std::move(oracle);
  out.vocab = Vocab{cfg.num_users, cfg.num_items, cfg.num_categories};
  return out;
}

}  // namespace lcft
