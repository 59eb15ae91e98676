#include "lcft/example1.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "lcft/evaluation.hpp"
#include "lcft/training.hpp"

namespace lcft {

namespace {

constexpr std::array<double, 3> kTrueCtr{0.3, 0.1, 0.2};
constexpr std::array<double, 3> kCloudCtr{0.5, 0.35, 0.6};
constexpr double kGlobalCtr = 0.5;

double logit(double p) { return std::log(p / (1.0 - p)); }

ModelParams cloud_model() {
  ModelConfig config;
  config.kind = ModelKind::LR;
  config.embed_dim = 1;
  config.use_user_feature = false;
  config.vocab = Vocab{1, 3, 1};
  ModelParams model = init_model(config, 0);
  auto& p = model.params;
  p.at(std::string(param_names::kCategoryEmbedding)).setZero();
  p.at(std::string(param_names::kLrWeight)).setConstant(1.0);
  p.at(std::string(param_names::kLrBias)).setZero();
  Matrix& items = p.at(std::string(param_names::kItemEmbedding));
  for (Index i = 0; i < 3; ++i) items(i, 0) = logit(kCloudCtr[static_cast<std::size_t>(i)]);
  return model;
}

// m impressions each of items 0 and 2 with 0.3m and 0.2m clicks.
UserDataset local_data(Index m) {
  std::vector<Sample> samples;
  std::int64_t t = 0;
  for (Index item : {Index{0}, Index{2}}) {
    const Index clicks = (item == 0 ? 3 : 2) * m / 10;
    for (Index k = 0; k < m; ++k) {
      Sample s;
      s.item_id = item;
      s.label = k < clicks ? 1.0 : 0.0;
      s.timestamp = t++;
      samples.push_back(std::move(s));
    }
  }
  return UserDataset(0, std::move(samples));
}

std::array<double, 3> predictions_of(const ModelParams& model) {
  std::vector<Sample> probe(3);
  for (Index i = 0; i < 3; ++i) probe[static_cast<std::size_t>(i)].item_id = i;
  const auto p = predict(model, probe);
  return {p[0], p[1], p[2]};
}

std::vector<Index> ranking_of(const std::array<double, 3>& predictions) {
  RankingCase rc;
  rc.item_ids = {1, 2, 3};
  rc.true_ctr.assign(kTrueCtr.begin(), kTrueCtr.end());
  rc.predicted_ctr.assign(predictions.begin(), predictions.end());
  return ranking_order(rc, RankBy::Predicted);
}

std::string ranking_text(const std::vector<Index>& r) {
  std::string s = "{";
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (k > 0) s += ", ";
    s += "I" + std::to_string(r[k]);
  }
  return s + "}";
}

void expect_ranking(Example1Result& result, const Example1Variant& v,
                    const std::vector<Index>& expected) {
  if (v.ranking != expected) {
    result.failures.push_back(v.name + ": ranking " + ranking_text(v.ranking) + ", expected " +
                              ranking_text(expected));
  }
}

void expect_near(Example1Result& result, const Example1Variant& v,
                 const std::array<double, 3>& expected, double tolerance) {
  for (std::size_t k = 0; k < 3; ++k) {
    if (std::abs(v.predictions[k] - expected[k]) > tolerance) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s: I%zu predicted %.4f, expected %.2f +- %.2f",
                    v.name.c_str(), k + 1, v.predictions[k], expected[k], tolerance);
      result.failures.emplace_back(buf);
    }
  }
}

}  // namespace

const Example1Variant& Example1Result::variant(std::string_view name) const {
  for (const auto& v : variants) {
    if (v.name == name) return v;
  }
  throw ContractError("example1: no variant named " + std::string(name));
}

Example1Result run_example1(const Example1Config& config) {
  if (config.samples_per_item < 10 || config.samples_per_item % 10 != 0) {
    throw ConfigError("example1: samples_per_item must be a positive multiple of 10");
  }
  Example1Result result;
  result.global_ctr = kGlobalCtr;
  result.true_ctr = kTrueCtr;
  const ModelParams cloud = cloud_model();
  const UserDataset local = local_data(config.samples_per_item);
  result.local_ctr = local.local_ctr();

  OptimizerConfig opt;
  opt.kind = OptimizerKind::SGD;
  opt.learning_rate = config.learning_rate;
  opt.epochs = config.epochs;
  opt.batch_size = local.size();
  FinetuneOptions options;
  options.loss = config.loss;
  options.frozen = {std::string(param_names::kCategoryEmbedding),
                    std::string(param_names::kLrWeight), std::string(param_names::kLrBias)};

  Example1Variant base{"cloud", kIdentityLabels, predictions_of(cloud), {}};
  base.ranking = ranking_of(base.predictions);
  result.variants.push_back(base);

  const std::pair<const char*, PolicyKind> runs[] = {{"local", PolicyKind::None},
                                                     {"scale_positive", PolicyKind::ScalePositive},
                                                     {"shift_negative", PolicyKind::ShiftNegative}};
  for (const auto& [name, kind] : runs) {
    Example1Variant v;
    v.name = name;
    v.labels = corrected_labels(CorrectionPolicy(kind), result.local_ctr, kGlobalCtr);
    const auto samples = apply_correction(local, v.labels);
    const FinetuneResult fit = finetune_user(cloud, samples, 0, opt, options);
    v.predictions = predictions_of(fit.model);
    v.ranking = ranking_of(v.predictions);
    result.variants.push_back(std::move(v));
  }

  expect_ranking(result, result.variant("cloud"), {3, 1, 2});
  expect_ranking(result, result.variant("local"), {2, 1, 3});
  expect_near(result, result.variant("scale_positive"), {0.6, 0.35, 0.4}, 0.05);
  expect_ranking(result, result.variant("scale_positive"), {1, 3, 2});
  expect_near(result, result.variant("shift_negative"), {0.53, 0.35, 0.47}, 0.02);
  expect_ranking(result, result.variant("shift_negative"), {1, 3, 2});
  return result;
}

void print_example1(std::ostream& out, const Example1Result& r) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "global CTR %.4f, local CTR %.4f\n", r.global_ctr, r.local_ctr);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-16s %7s %7s %7s %7s %7s  %s\n", "variant", "alpha", "beta",
                "I1", "I2", "I3", "ranking");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-16s %7s %7s %7.4f %7.4f %7.4f  %s\n", "true", "-", "-",
                r.true_ctr[0], r.true_ctr[1], r.true_ctr[2], "{I1, I3, I2}");
  out << buf;
  for (const auto& v : r.variants) {
    std::snprintf(buf, sizeof buf, "%-16s %7.4f %7.4f %7.4f %7.4f %7.4f  %s\n", v.name.c_str(),
                  v.labels.alpha, v.labels.beta, v.predictions[0], v.predictions[1],
                  v.predictions[2], ranking_text(v.ranking).c_str());
    out << buf;
  }
  for (const auto& f : r.failures) out << "FAIL " << f << '\n';
  out << (r.passed() ? "example1: PASS\n" : "example1: FAIL\n");
}

}  // namespace lcft
