#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "lcft/correction.hpp"

using namespace lcft;

namespace {

UserDataset counts(Index user, int pos, int neg) {
  std::vector<Sample> s;
  for (int k = 0; k < pos + neg; ++k) {
    Sample x;
    x.user_id = user;
    x.item_id = k;
    x.label = k < pos ? 1.0 : 0.0;
    x.timestamp = k;
    s.push_back(x);
  }
  return UserDataset(user, std::move(s));
}

CorrectionTable two_halves() {
  return CorrectionTable{{{0.0, 0.5, {2.0, 0.0}}, {0.5, 1.0, {0.5, 0.0}}}};
}

}  // namespace

TEST_CASE("equivalent ctr in closed form") {
  CHECK(equivalent_ctr_closed(1.0, 0.0, 0.3) == doctest::Approx(0.3));
  CHECK(equivalent_ctr_closed(2.0, 0.0, 0.25) == doctest::Approx(0.5));
  CHECK(equivalent_ctr_closed(1.0, 1.0 / 3.0, 0.25) == doctest::Approx(0.5));
}

TEST_CASE("equivalent ctr by direct minimization") {
  CHECK(std::abs(equivalent_ctr_numeric(1.0, 0.0, 5, 5, LossKind::MeanSquaredError) - 0.5) < 1e-6);
  CHECK(std::abs(equivalent_ctr_numeric(2.0, 0.0, 1, 3, LossKind::CrossEntropy) - 0.5) < 1e-4);
  CHECK(std::abs(equivalent_ctr_numeric(1.0, 1.0 / 3.0, 1, 3, LossKind::MeanSquaredError) - 0.5) <
        1e-4);
  CHECK_THROWS_AS(equivalent_ctr_numeric(3.0, 0.5, 1, 0, LossKind::CrossEntropy), DomainError);
}

TEST_CASE("closed and numeric forms agree on random admissible tuples") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<Index> count(1, 40);
  int checked = 0;
  while (checked < 50) {
    const Index pos = count(rng), neg = count(rng);
    const double alpha = 0.2 + 2.8 * unit(rng);
    const double beta = -0.5 + (alpha + 0.5) * unit(rng) * 0.9;
    const double w = static_cast<double>(pos) / static_cast<double>(pos + neg);
    const double closed = equivalent_ctr_closed(alpha, beta, w);
    if (closed <= 0.02 || closed >= 0.98) continue;
    for (LossKind loss : {LossKind::MeanSquaredError, LossKind::CrossEntropy}) {
      CHECK(std::abs(equivalent_ctr_numeric(alpha, beta, pos, neg, loss) - closed) < 1e-4);
    }
    ++checked;
  }
}

TEST_CASE("soft corrections") {
  CHECK(soft_correct(PolicyKind::ScalePositive, 0.25, 0.5) == CorrectedLabels{2.0, 0.0});
  const CorrectedLabels shift = soft_correct(PolicyKind::ShiftNegative, 0.25, 0.5);
  CHECK(shift.alpha == 1.0);
  CHECK(shift.beta == doctest::Approx(1.0 / 3.0));
  for (PolicyKind p : {PolicyKind::None, PolicyKind::ScalePositive, PolicyKind::ShiftNegative,
                       PolicyKind::Soft1, PolicyKind::Soft2}) {
    CHECK(soft_correct(p, 0.3, 0.3) == kIdentityLabels);
  }
  CHECK(soft_correct(PolicyKind::None, 0.1, 0.7) == kIdentityLabels);
}

TEST_CASE("soft1 and soft2 pick opposite branches") {
  // w_i above w_g.
  CHECK(soft_correct(PolicyKind::Soft1, 0.6, 0.3) == soft_correct(PolicyKind::ScalePositive, 0.6, 0.3));
  CHECK(soft_correct(PolicyKind::Soft2, 0.6, 0.3) == soft_correct(PolicyKind::ShiftNegative, 0.6, 0.3));
  // w_i below w_g.
  CHECK(soft_correct(PolicyKind::Soft1, 0.1, 0.3) == soft_correct(PolicyKind::ShiftNegative, 0.1, 0.3));
  CHECK(soft_correct(PolicyKind::Soft2, 0.1, 0.3) == soft_correct(PolicyKind::ScalePositive, 0.1, 0.3));
}

TEST_CASE("degenerate local ctrs") {
  CHECK_THROWS_AS(soft_correct(PolicyKind::ScalePositive, 0.0, 0.3), DomainError);
  CHECK_THROWS_AS(soft_correct(PolicyKind::ShiftNegative, 1.0, 0.3), DomainError);
  for (PolicyKind p : {PolicyKind::Soft1, PolicyKind::Soft2}) {
    CHECK(soft_correct(p, 0.0, 0.3) == soft_correct(PolicyKind::ShiftNegative, 0.0, 0.3));
    CHECK(soft_correct(p, 1.0, 0.3) == soft_correct(PolicyKind::ScalePositive, 1.0, 0.3));
  }
  CHECK_THROWS_AS(soft_correct(PolicyKind::Soft1, std::nan(""), 0.3), DomainError);
}

TEST_CASE("every soft correction aligns the equivalent ctr with the global ctr") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  for (int k = 0; k < 2000; ++k) {
    const double wi = unit(rng), wg = unit(rng);
    for (PolicyKind p : {PolicyKind::ScalePositive, PolicyKind::ShiftNegative, PolicyKind::Soft1,
                         PolicyKind::Soft2}) {
      const CorrectedLabels l = soft_correct(p, wi, wg);
      CHECK(std::abs(equivalent_ctr_closed(l.alpha, l.beta, wi) - wg) < 1e-12);
      // Raising w_i toward w_g never moves a label away from identity.
      if (wi < wg) CHECK((l.alpha >= 1.0 && l.beta >= 0.0));
      if (wi > wg) CHECK((l.alpha <= 1.0 && l.beta <= 0.0));
    }
  }
}

TEST_CASE("applying corrections rewrites labels only") {
  const UserDataset d = counts(4, 1, 3);
  const auto same = apply_correction(d, kIdentityLabels);
  CHECK(same == d.samples());

  const auto scaled = apply_correction(d, soft_correct(PolicyKind::ScalePositive, 0.25, 0.5));
  REQUIRE(scaled.size() == 4);
  CHECK(scaled[0].label == 2.0);
  for (int k = 1; k < 4; ++k) CHECK(scaled[k].label == 0.0);

  const auto shifted = apply_correction(d, CorrectedLabels{1.0, 1.0 / 3.0});
  CHECK(shifted[0].label == 1.0);
  CHECK(shifted[3].label == doctest::Approx(1.0 / 3.0));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(shifted[k].item_id == d.samples()[k].item_id);
    CHECK(shifted[k].timestamp == d.samples()[k].timestamp);
  }
  CHECK(d.local_ctr() == 0.25);
}

TEST_CASE("hard lookups") {
  const CorrectionTable full{{{0.0, 1.0, {1.5, -0.25}}}};
  for (double w : {0.0, 0.3, 1.0}) CHECK(hard_lookup(full, w) == CorrectedLabels{1.5, -0.25});

  const CorrectionTable halves = two_halves();
  CHECK(hard_lookup(halves, 0.49) == CorrectedLabels{2.0, 0.0});
  CHECK(hard_lookup(halves, 0.5) == CorrectedLabels{0.5, 0.0});
  CHECK(hard_lookup(halves, 1.0) == CorrectedLabels{0.5, 0.0});

  const CorrectionTable three{{{0.0, 0.3, {2.0, 0.0}}, {0.3, 0.7, {1.0, 0.0}}, {0.7, 1.0, {0.75, 0.0}}}};
  CHECK(hard_lookup(three, 0.72) == CorrectedLabels{0.75, 0.0});

  const CorrectionPolicy policy = CorrectionPolicy::hard(three);
  CHECK(corrected_labels(policy, 0.1, 0.9) == CorrectedLabels{2.0, 0.0});
  CHECK_THROWS(CorrectionPolicy(PolicyKind::Hard));
}

TEST_CASE("tables must partition the unit interval") {
  CHECK_NOTHROW(two_halves().validate());
  CHECK_THROWS_AS((CorrectionTable{{{0.0, 0.4, {1, 0}}, {0.5, 1.0, {1, 0}}}}.validate()), ContractError);
  CHECK_THROWS_AS((CorrectionTable{{{0.0, 0.9, {1, 0}}}}.validate()), ContractError);
  CHECK_THROWS_AS((CorrectionTable{{{0.0, 1.0, {0.2, 0.5}}}}.validate()), ContractError);
  CHECK_THROWS_AS(CorrectionTable{}.validate(), ContractError);
}

TEST_CASE("table text round trip is exact") {
  CorrectionTable t{{{0.0, 0.1, {1.0 / 3.0, -0.1}}, {0.1, 1.0, {2.0, 0.2}}}};
  std::stringstream s;
  write_table(s, t);
  CHECK(read_table(s) == t);
  std::istringstream bad("# lo hi alpha beta\n0 1 2\n");
  CHECK_THROWS(read_table(bad));
}

TEST_CASE("grouping by local ctr") {
  const std::vector<double> ctrs{0.1, 0.49, 0.5, 1.0, 0.2};
  const std::vector<double> edges{0.0, 0.5, 1.0};
  const auto groups = group_by_local_ctr(ctrs, edges);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].members == std::vector<std::size_t>{0, 1, 4});
  CHECK(groups[1].members == std::vector<std::size_t>{2, 3});
  CHECK(groups[0].mean_local_ctr == doctest::Approx((0.1 + 0.49 + 0.2) / 3));
}

TEST_CASE("identity-only grid gives an identity table") {
  const std::vector<double> ctrs{0.1, 0.6};
  const std::vector<double> edges{0.0, 0.5, 1.0};
  const auto groups = group_by_local_ctr(ctrs, edges);
  const std::vector<CorrectedLabels> grid{kIdentityLabels};
  const CorrectionTable t =
      build_hard_table(groups, grid, 0.3, [](const CtrGroup&, CorrectedLabels) { return 0.7; });
  REQUIRE(t.entries.size() == 2);
  for (const auto& e : t.entries) CHECK(e.labels == kIdentityLabels);
}

TEST_CASE("hard table equals an exhaustive search") {
  const std::vector<double> ctrs{0.05, 0.1, 0.15, 0.3, 0.8, 0.9};
  const std::vector<double> edges{0.0, 0.2, 0.6, 1.0};
  const auto groups = group_by_local_ctr(ctrs, edges);
  const std::vector<CorrectedLabels> grid = default_hard_grid();
  const double wg = 0.3;
  // Score peaks where the group's equivalent ctr hits a group-specific target.
  const auto evaluate = [&](const CtrGroup& g, CorrectedLabels l) {
    if (g.members.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double target = 0.2 + 0.25 * g.lo;
    return 1.0 - std::abs(equivalent_ctr_closed(l.alpha, l.beta, g.mean_local_ctr) - target);
  };
  for (unsigned threads : {1u, 3u}) {
    const CorrectionTable t = build_hard_table(groups, grid, wg, evaluate, threads);
    REQUIRE(t.entries.size() == groups.size());
    for (std::size_t k = 0; k < groups.size(); ++k) {
      CorrectedLabels best = kIdentityLabels;
      double best_score = -INFINITY;
      double best_gap = INFINITY;
      bool any = false;
      for (const CorrectedLabels& l : grid) {
        const double score = evaluate(groups[k], l);
        if (std::isnan(score)) continue;
        const double gap =
            std::abs(equivalent_ctr_closed(l.alpha, l.beta, groups[k].mean_local_ctr) - wg);
        if (!any || score > best_score || (score == best_score && gap < best_gap)) {
          best = l;
          best_score = score;
          best_gap = gap;
          any = true;
        }
      }
      CHECK(t.entries[k].labels == best);
      CHECK(t.entries[k].lo == groups[k].lo);
    }
  }
}

TEST_CASE("default hard grid") {
  const auto grid = default_hard_grid();
  CHECK(grid.size() == 47);
  for (const auto& l : grid) CHECK(l.alpha > l.beta);
  CHECK(std::find(grid.begin(), grid.end(), kIdentityLabels) != grid.end());
}
