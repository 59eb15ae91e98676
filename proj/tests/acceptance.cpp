// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lcft/commands.hpp"
#include "lcft/correction.hpp"
#include "lcft/evaluation.hpp"
#include "lcft/example1.hpp"
#include "lcft/manifest.hpp"
#include "lcft/synth.hpp"
#include "lcft/training.hpp"
#include "support/oracles.hpp"

using namespace lcft;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lcft_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict example1() {
  const Example1Result r = run_example1(Example1Config{});
  const auto& scale = r.variant("scale_positive").predictions;
  const auto& shift = r.variant("shift_negative").predictions;
  std::string detail = format("scale (%.3f, %.3f, %.3f) shift (%.3f, %.3f, %.3f)", scale[0],
                              scale[1], scale[2], shift[0], shift[1], shift[2]);
  for (const auto& f : r.failures) detail += "; " + f;
  return {r.passed(), detail};
}

Verdict alignment() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  int pairs = 0;
  while (pairs < 10'000) {
    const double wi = unit(rng), wg = unit(rng);
    if (wi <= 0.0 || wg <= 0.0) continue;
    for (PolicyKind p : {PolicyKind::ScalePositive, PolicyKind::ShiftNegative, PolicyKind::Soft1,
                         PolicyKind::Soft2}) {
      const CorrectedLabels l = soft_correct(p, wi, wg);
      worst = std::max(worst, std::abs(wi * l.alpha + (1.0 - wi) * l.beta - wg));
    }
    ++pairs;
  }
  return {worst <= 1e-12, format("%d pairs x 4 policies, worst |gap| %.3g", pairs, worst)};
}

Verdict equivalent_ctr() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<Index> count(1, 60);
  double worst = 0.0;
  int tuples = 0;
  while (tuples < 200) {
    const Index pos = count(rng), neg = count(rng);
    const double alpha = -0.5 + 3.5 * unit(rng);
    const double beta = -0.5 + 3.5 * unit(rng);
    if (!(alpha > beta)) continue;
    const double w = static_cast<double>(pos) / static_cast<double>(pos + neg);
    const double closed = equivalent_ctr_closed(alpha, beta, w);
    // Admissible: the cross-entropy minimum is interior.
    if (!(closed > 0.01 && closed < 0.99)) continue;
    for (LossKind loss : {LossKind::MeanSquaredError, LossKind::CrossEntropy}) {
      worst = std::max(worst, std::abs(equivalent_ctr_numeric(alpha, beta, pos, neg, loss) - closed));
    }
    ++tuples;
  }
  return {worst < 1e-4, format("%d tuples x 2 losses, worst |diff| %.3g", tuples, worst)};
}

Verdict gradients() {
  std::string detail;
  bool pass = true;
  for (ModelKind kind : {ModelKind::LR, ModelKind::WideDeepLite, ModelKind::DinLite}) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const LossKind loss = seed % 2 ? LossKind::CrossEntropy : LossKind::MeanSquaredError;
      worst = std::max(worst, oracle::check_model_case(kind, seed, loss).worst);
    }
    pass = pass && worst < oracle::kFdTolerance;
    detail += format("%s%s worst rel err %.2g", detail.empty() ? "" : ", ",
                     std::string(to_string(kind)).c_str(), worst);
  }
  return {pass, "100 cases each: " + detail};
}

Verdict auc_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 1000);
  int mismatches = 0;
  int tie_heavy = 0;
  for (int fixture = 0; fixture < 100; ++fixture) {
    const int n = size(rng);
    const int levels = fixture % 3 == 0 ? 1 + fixture % 7 : 0;  // few distinct scores
    if (levels > 0) ++tie_heavy;
    std::vector<double> p(n), y(n);
    const double rate = 0.05 + 0.9 * unit(rng);
    for (int k = 0; k < n; ++k) {
      p[k] = levels > 0 ? std::floor(unit(rng) * levels) / levels : unit(rng);
      y[k] = unit(rng) < rate ? 1.0 : 0.0;
    }
    y[0] = 1.0;
    y[1] = 0.0;
    if (auc(p, y) != oracle::pairwise_auc(p, y)) ++mismatches;
  }
  return {mismatches == 0, format("100 fixtures (%d tie-heavy), %d mismatches", tie_heavy, mismatches)};
}

Verdict sparse_updates() {
  SynthConfig cfg;
  cfg.num_users = 500;
  cfg.seed = 31;
  const SynthData data = synth_generate(cfg);
  const double wg = global_stats(data.datasets).global_ctr;
  Index checked_rows = 0;
  Index violations = 0;
  std::size_t users = 0;
  for (ModelKind kind : {ModelKind::LR, ModelKind::WideDeepLite, ModelKind::DinLite}) {
    ModelConfig mc;
    mc.kind = kind;
    mc.vocab = data.vocab;
    mc.embed_dim = 8;
    mc.hidden = {16, 8};
    OptimizerConfig cloud;
    cloud.learning_rate = 0.5;
    const ModelParams global = train_cloud(data.datasets, mc, LossKind::CrossEntropy, cloud, 1).model;
    OptimizerConfig opt;
    opt.kind = OptimizerKind::Adam;
    opt.learning_rate = 0.03;
    opt.epochs = 2;
    opt.seed = 9;
    std::vector<Index> counts(data.datasets.size(), 0), bad(data.datasets.size(), 0);
    run_lcft_each(data.datasets, CorrectionPolicy(PolicyKind::Soft1), global, wg, opt,
                  FinetuneOptions{}, 0, [&](std::size_t k, UserOutcome& o) {
                    if (!o.result) return;
                    for (const auto& [name, before] : global.params.arrays()) {
                      if (!param_names::is_embedding(name)) continue;
                      const Matrix& after = o.result->model.params.at(name);
                      for (Index row = 0; row < before.rows(); ++row) {
                        if (o.result->touched.touches_row(name, row)) continue;
                        ++counts[k];
                        if (std::memcmp(after.row(row).eval().data(), before.row(row).eval().data(),
                                        sizeof(double) * before.cols()) != 0) {
                          ++bad[k];
                        }
                      }
                    }
                  });
    for (std::size_t k = 0; k < counts.size(); ++k) {
      checked_rows += counts[k];
      violations += bad[k];
    }
    users += data.datasets.size();
  }
  return {violations == 0 && checked_rows > 0,
          format("%zu user runs over 3 models, %lld untouched rows checked, %lld changed", users,
                 static_cast<long long>(checked_rows), static_cast<long long>(violations))};
}

// Per-user AUCs of one report, keyed by column name.
struct PerUser {
  std::vector<double> drift;
  std::vector<double> test_size;
  std::map<std::string, std::vector<std::optional<double>>> auc;
};

PerUser read_per_user(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) header.push_back(cell);
  }
  PerUser out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    for (std::size_t c = 0; std::getline(row, cell, ','); ++c) {
      if (header[c] == "drift") out.drift.push_back(std::stod(cell));
      if (header[c] == "test_size") out.test_size.push_back(std::stod(cell));
      if (header[c].rfind("auc_", 0) == 0) {
        out.auc[header[c].substr(4)].push_back(cell == "NA" ? std::nullopt : std::optional(std::stod(cell)));
      }
    }
  }
  return out;
}

double weighted_auc(const PerUser& u, const std::string& model, double min_drift) {
  double num = 0.0, den = 0.0;
  const auto& a = u.auc.at(model);
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k] || std::abs(u.drift[k]) <= min_drift) continue;
    num += u.test_size[k] * *a[k];
    den += u.test_size[k];
  }
  return num / den;
}

std::vector<double> bucket_means(const PerUser& u, const std::string& a, const std::string& b,
                                 const std::vector<double>& edges) {
  std::vector<double> sum(edges.size() - 1, 0.0), n(edges.size() - 1, 0.0);
  for (std::size_t k = 0; k < u.drift.size(); ++k) {
    const auto& x = u.auc.at(a)[k];
    const auto& y = u.auc.at(b)[k];
    if (!x || !y) continue;
    const Index bucket = bucket_index(edges, std::abs(u.drift[k]));
    if (bucket < 0) continue;
    sum[bucket] += *x - *y;
    n[bucket] += 1.0;
  }
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] /= n[k];
  return sum;
}

void run_pipeline(const ExperimentConfig& c, const fs::path& dir, bool with_synth) {
  std::ostringstream log;
  if (with_synth) cmd_synth(c, dir, log);
  cmd_train(c, dir, log);
  cmd_finetune(c, dir, log);
  cmd_report(c, dir, log);
}

Verdict drift_property() {
  int a = 0, b = 0, c = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig config;
    config.reseed(seed);
    config.policies = {"soft1", "soft2"};
    const fs::path dir = scratch("drift_" + std::to_string(seed));
    run_pipeline(config, dir, true);
    const PerUser u = read_per_user(dir / out_files::kPerUser);

    const double local_far = weighted_auc(u, "none", 0.15);
    const double cloud_far = weighted_auc(u, "cloud", 0.15);
    const double local = weighted_auc(u, "none", -1.0);
    const double soft1 = weighted_auc(u, "soft1", -1.0);
    const double soft2 = weighted_auc(u, "soft2", -1.0);
    const std::string best = soft1 >= soft2 ? "soft1" : "soft2";
    const auto gains = bucket_means(u, best, "none", config.report.drift_edges);

    const bool pa = local_far < cloud_far;
    const bool pb = std::max(soft1, soft2) > local;
    const bool pc = gains[0] <= gains[1] && gains[1] <= gains[2];
    a += pa;
    b += pb;
    c += pc;
    detail += format("\n    seed %llu: users %zu far-drift local %.4f vs cloud %.4f [%c]; %s %.4f vs "
                     "local %.4f [%c]; gains %+.4f %+.4f %+.4f [%c]",
                     static_cast<unsigned long long>(seed), u.drift.size(), local_far, cloud_far,
                     pa ? 'y' : 'n', best.c_str(), std::max(soft1, soft2), local, pb ? 'y' : 'n',
                     gains[0], gains[1], gains[2], pc ? 'y' : 'n');
    fs::remove_all(dir);
  }
  return {a >= 4 && b == 5 && c >= 4, format("(a) %d/5 (b) %d/5 (c) %d/5", a, b, c) + detail};
}

Verdict determinism() {
  ExperimentConfig config;
  config.reseed(3);
  config.synth.num_users = 500;
  config.policies = {"soft1", "soft2", "hard"};
  const fs::path first = scratch("det_a");
  const fs::path second = scratch("det_b");
  run_pipeline(config, first, true);
  const std::string once = slurp(first / kManifestName);
  run_pipeline(config, first, false);
  const std::string again = slurp(first / kManifestName);
  run_pipeline(config, second, true);
  const std::string elsewhere = slurp(second / kManifestName);

  const Manifest m = Manifest::parse(once);
  Index stale = 0;
  for (const auto& [rel, hash] : m.files) {
    if (git_blob_hash_file(first / rel) != hash) ++stale;
  }
  fs::remove_all(first);
  fs::remove_all(second);
  const bool pass = once == again && once == elsewhere && stale == 0 && m.files.size() > 10;
  return {pass, format("%zu files hashed; rerun %s, fresh directory %s, %lld stale entries",
                       m.files.size(), once == again ? "identical" : "DIFFERENT",
                       once == elsewhere ? "identical" : "DIFFERENT", static_cast<long long>(stale))};
}

struct Criterion {
  int id;
  double limit_seconds;  // 0: no limit
  std::function<Verdict()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, 5.0, example1},      {2, 1.0, alignment},         {3, 30.0, equivalent_ctr},
      {4, 120.0, gradients},   {5, 0.0, auc_oracle},        {6, 0.0, sparse_updates},
      {7, 900.0, drift_property}, {8, 0.0, determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0.0 && seconds >= c.limit_seconds) {
      v.pass = false;
      v.detail += format(" (over the %.0f s limit)", c.limit_seconds);
    }
    std::cout << "criterion " << c.id << ": " << (v.pass ? "PASS" : "FAIL") << " ["
              << format("%.2f s", seconds) << "] " << v.detail << std::endl;
    failures += !v.pass;
  }
  std::cout << (failures == 0 ? "all criteria passed" : format("%d criteria failed", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
