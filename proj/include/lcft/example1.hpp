#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "lcft/config.hpp"
#include "lcft/correction.hpp"

namespace lcft {

// Three items I1, I2, I3 with true CTRs 0.3, 0.1, 0.2 for one user. The cloud
// model predicts 0.5, 0.35, 0.6 (global CTR 0.5). The user has m impressions
// each of I1 and I3 with 0.3m and 0.2m clicks, so the local CTR is 0.25, and
// none of I2. Each variant starts from the cloud predictions and fits only the
// item embeddings.
struct Example1Variant {
  std::string name;  // cloud, local, scale_positive, shift_negative
  CorrectedLabels labels;
  std::array<double, 3> predictions{};
  std::vector<Index> ranking;  // item numbers 1..3, best first
};

struct Example1Result {
  double global_ctr = 0.0;
  double local_ctr = 0.0;
  std::array<double, 3> true_ctr{};
  std::vector<Example1Variant> variants;
  std::vector<std::string> failures;  // one line per unmet expectation

  bool passed() const { return failures.empty(); }
  const Example1Variant& variant(std::string_view name) const;
};

Example1Result run_example1(const Example1Config& config);
void print_example1(std::ostream& out, const Example1Result& result);

}  // namespace lcft
