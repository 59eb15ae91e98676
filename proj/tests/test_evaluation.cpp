#include <doctest.h>

#include <cmath>
#include <random>

#include "lcft/evaluation.hpp"
#include "support/oracles.hpp"

using namespace lcft;

namespace {

UserEval entry(Index user, Index m, std::optional<double> value, double local_ctr = 0.3) {
  UserEval e;
  e.user_id = user;
  e.test_size = m;
  e.auc = value;
  e.local_ctr = local_ctr;
  return e;
}

}  // namespace

TEST_CASE("auc examples") {
  const std::vector<double> labels{0, 0, 1, 1};
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, labels) == 1.0);
  CHECK(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, labels) == 0.0);
  CHECK(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, labels) == 0.5);
  CHECK_FALSE(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 1}).has_value());
  CHECK_THROWS(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 0.5}));
}

TEST_CASE("auc equals brute-force pair counting") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> p(200), y(200);
    for (std::size_t k = 0; k < p.size(); ++k) {
      // Coarse values force many ties.
      p[k] = trial % 2 ? std::round(unit(rng) * 8.0) / 8.0 : unit(rng);
      y[k] = unit(rng) < 0.3 ? 1.0 : 0.0;
    }
    CHECK(auc(p, y).value() == oracle::pairwise_auc(p, y).value());
  }
}

TEST_CASE("auc is invariant under a monotone transform") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> p(100), q(100), y(100);
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = unit(rng);
    q[k] = std::exp(3.0 * p[k]) - 7.0;
    y[k] = k % 3 == 0;
  }
  CHECK(auc(p, y).value() == auc(q, y).value());
}

TEST_CASE("user average auc") {
  const std::vector<UserEval> one{entry(0, 5, 0.7)};
  CHECK(user_avg_auc(one) == 0.7);
  const std::vector<UserEval> two{entry(0, 1, 1.0), entry(1, 3, 0.5)};
  CHECK(user_avg_auc(two) == doctest::Approx(0.625));
  const std::vector<UserEval> with_gap{entry(0, 1, 1.0), entry(1, 3, 0.5), entry(2, 100, std::nullopt)};
  CHECK(user_avg_auc(with_gap) == doctest::Approx(0.625));
  CHECK(undefined_auc_count(with_gap) == 1);
  const std::vector<UserEval> none{entry(0, 3, std::nullopt)};
  CHECK_THROWS_AS(user_avg_auc(none), ReportError);
}

TEST_CASE("user average auc on a ten-user fixture") {
  std::vector<UserEval> users;
  double num = 0.0, den = 0.0;
  for (Index u = 0; u < 10; ++u) {
    const Index m = 3 + 7 * u % 11;
    const double a = 0.4 + 0.05 * static_cast<double>(u);
    users.push_back(entry(u, m, a));
    num += static_cast<double>(m) * a;
    den += static_cast<double>(m);
  }
  CHECK(user_avg_auc(users) == doctest::Approx(num / den).epsilon(1e-14));
}

TEST_CASE("drift buckets") {
  const std::vector<double> edges{0.0, 0.1, 0.2, 1.0};
  const double wg = 0.3;
  std::vector<UserEval> base, better;
  const double ctrs[] = {0.3, 0.35, 0.15, 0.45, 0.6, 0.05, 0.95};
  for (Index u = 0; u < 7; ++u) {
    base.push_back(entry(u, 10, 0.6, ctrs[u]));
    const bool far = std::abs(ctrs[u] - wg) > 0.2;
    better.push_back(entry(u, 10, far ? 0.65 : 0.6, ctrs[u]));
  }
  SUBCASE("identical inputs") {
    for (const auto& b : drift_buckets(base, base, edges, wg, BucketAxis::AbsDrift))
      CHECK(b.mean_improvement == 0.0);
  }
  SUBCASE("differences confined to the outer bucket") {
    const auto buckets = drift_buckets(better, base, edges, wg, BucketAxis::AbsDrift);
    REQUIRE(buckets.size() == 3);
    CHECK(buckets[0].count == 2);
    CHECK(buckets[0].mean_improvement == 0.0);
    CHECK(buckets[1].count == 2);
    CHECK(buckets[1].mean_improvement == 0.0);
    CHECK(buckets[2].count == 3);
    CHECK(buckets[2].mean_improvement == doctest::Approx(0.05));
  }
  SUBCASE("single bucket is the unweighted mean difference") {
    std::vector<UserEval> mixed = base;
    mixed[0].auc = 0.9;
    mixed[0].test_size = 1000;
    const std::vector<double> whole{0.0, 1.0};
    const auto buckets = drift_buckets(mixed, base, whole, wg);
    CHECK(buckets[0].mean_improvement == doctest::Approx(0.3 / 7.0));
  }
  SUBCASE("empty buckets are NaN and mismatched users are refused") {
    const std::vector<double> fine{0.0, 0.01, 1.0};
    const std::vector<UserEval> one{entry(0, 3, 0.5, 0.5)};
    CHECK(std::isnan(drift_buckets(one, one, fine, wg)[0].mean_improvement));
    std::vector<UserEval> other = base;
    other[2].user_id = 99;
    CHECK_THROWS_AS(drift_buckets(base, other, edges, wg), ContractError);
    CHECK_THROWS_AS(drift_buckets(base, one, edges, wg), ContractError);
  }
}

TEST_CASE("win tie loss") {
  std::vector<UserEval> a, b;
  for (Index u = 0; u < 5; ++u) {
    a.push_back(entry(u, 4, 0.5));
    b.push_back(entry(u, 4, 0.5));
  }
  WinTieLoss all_ties = win_tie_loss(a, b);
  CHECK(all_ties.ties == 5);
  for (auto& e : a) *e.auc += 0.01;
  CHECK(win_tie_loss(a, b).wins == 5);

  a[0].auc = 0.4;
  a[1].auc = 0.5 + 5e-7;
  a[2].auc = std::nullopt;
  const WinTieLoss mixed = win_tie_loss(a, b);
  CHECK(mixed.wins == 2);
  CHECK(mixed.ties == 1);
  CHECK(mixed.losses == 1);
  CHECK(mixed.total() == 4);
  b.pop_back();
  CHECK_THROWS_AS(win_tie_loss(a, b), ContractError);
}

TEST_CASE("ranking order") {
  RankingCase rc{{1, 2, 3}, {0.4, 0.3, 0.35}, {0.5, 0.35, 0.6}};
  CHECK(ranking_order(rc, RankBy::Predicted) == std::vector<Index>{3, 1, 2});
  CHECK(ranking_order(rc, RankBy::True) == std::vector<Index>{1, 3, 2});
  rc.predicted_ctr = {0.6, 0.35, 0.4};
  CHECK(ranking_order(rc, RankBy::Predicted) == std::vector<Index>{1, 3, 2});
  rc.predicted_ctr = {0.53, 0.35, 0.47};
  CHECK(ranking_order(rc, RankBy::Predicted) == std::vector<Index>{1, 3, 2});
  rc.predicted_ctr = {0.5, 0.5, 0.1};
  CHECK(ranking_order(rc, RankBy::Predicted) == std::vector<Index>{1, 2, 3});
  rc.item_ids = {1, 1, 3};
  CHECK_THROWS_AS(ranking_order(rc, RankBy::True), InputError);
  rc.item_ids = {1, 2};
  CHECK_THROWS_AS(ranking_order(rc, RankBy::True), InputError);
}
