#pragma once

#include <cstdint>
#include <vector>

#include "lcft/dataset.hpp"
#include "lcft/tensor.hpp"

namespace lcft {

// Synthetic implicit-feedback generator. The true click probability is
//   p(u, i) = sigmoid(<z_u, z_i> + b_u)
// where z_u = popularity_scale * mu + taste_scale * eps_u shares a common
// taste direction mu (item popularity) plus a personal deviation, z_i sits near
// its category centre, and the user bias b_u = bias_location + bias_scale * t
// with t Student-t distributed with `tail_exponent` degrees of freedom. The
// bias spreads the users' local CTRs into a long tail around the global CTR.
struct SynthConfig {
  Index num_users = 2000;
  Index num_items = 1000;
  Index num_categories = 20;
  Index latent_dim = 8;
  Index min_samples = 30;
  Index max_samples = 90;
  double bias_location = -1.0;
  double bias_scale = 1.5;
  double tail_exponent = 2.0;
  double popularity_scale = 1.0;
  double taste_scale = 0.5;
  double item_scale = 1.0;      // spread of items around their category centre
  double category_scale = 1.0;  // spread of the category centres
  Index pool_size = 24;         // distinct items each user is exposed to
  double explore_rate = 0.3;    // chance an impression shows a random catalogue item instead
  std::int64_t time_span = 1'000'000;
  std::size_t max_history = kDefaultMaxHistory;
  std::uint64_t seed = 1;

  // Throws ConfigError on degenerate settings.
  void validate() const;
};

class TrueCtrOracle {
 public:
  TrueCtrOracle() = default;
  TrueCtrOracle(Matrix user_factors, Matrix item_factors, Vector user_bias,
                std::vector<Index> item_category);

  double operator()(Index user, Index item) const;
  double logit(Index user, Index item) const;
  Index category_of(Index item) const;
  double user_bias(Index user) const;
  Index num_users() const { return user_factors_.rows(); }
  Index num_items() const { return item_factors_.rows(); }

  friend bool operator==(const TrueCtrOracle&, const TrueCtrOracle&) = default;

 private:
  Matrix user_factors_;
  Matrix item_factors_;
  Vector user_bias_;
  std::vector<Index> item_category_;
};

struct SynthData {
  std::vector<UserDataset> datasets;  // ascending user id
  TrueCtrOracle oracle;
  Vocab vocab;
};

SynthData synth_generate(const SynthConfig& cfg);

}  // namespace lcft
