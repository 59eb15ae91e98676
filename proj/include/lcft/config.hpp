#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lcft/evaluation.hpp"
#include "lcft/loss.hpp"
#include "lcft/models.hpp"
#include "lcft/optim.hpp"
#include "lcft/synth.hpp"
#include "lcft/training.hpp"

namespace lcft {

inline constexpr int kConfigSchemaVersion = 1;

// One value of the config document. Numbers keep their source token so that
// integers wider than a double's mantissa survive.
struct ConfigValue {
  enum class Kind { Boolean, Number, String, Array };
  Kind kind = Kind::String;
  std::string text;
  bool boolean = false;
  std::vector<ConfigValue> items;
  std::size_t line = 0;
};

// A small TOML subset:
//   # comment
//   key = value
//   [section]          later keys become "section.key"
// Values are numbers, "strings", true/false, or one-line arrays [a, b, ...].
// Getters remember which keys were read so unknown keys can be rejected.
class ConfigDocument {
 public:
  static ConfigDocument parse(std::istream& in);
  static ConfigDocument parse(std::string_view text);
  static ConfigDocument load(const std::filesystem::path& path);

  bool contains(std::string_view key) const;

  double number(std::string_view key, double fallback) const;
  std::int64_t integer(std::string_view key, std::int64_t fallback) const;
  std::uint64_t unsigned_integer(std::string_view key, std::uint64_t fallback) const;
  bool boolean(std::string_view key, bool fallback) const;
  std::string string(std::string_view key, std::string fallback) const;
  std::vector<double> numbers(std::string_view key, std::vector<double> fallback) const;
  std::vector<std::int64_t> integers(std::string_view key, std::vector<std::int64_t> fallback) const;
  std::vector<std::string> strings(std::string_view key, std::vector<std::string> fallback) const;

  // Throws ConfigError naming the first key no getter asked for.
  void reject_unused() const;

 private:
  const ConfigValue* find(std::string_view key) const;

  std::map<std::string, ConfigValue, std::less<>> values_;
  mutable std::set<std::string, std::less<>> used_;
};

struct HardConfig {
  std::vector<double> group_edges{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> alphas;  // empty: the default grid
  std::vector<double> betas;
  double validation_fraction = 0.2;  // newest share of each training set held out

  std::vector<CorrectedLabels> grid() const;
};

struct ReportConfig {
  std::vector<double> drift_edges{0.0, 0.05, 0.15, 1.0};
  std::vector<double> ctr_edges{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double tie_tolerance = kTieTolerance;
};

struct Example1Config {
  Index samples_per_item = 40;
  int epochs = 3000;
  double learning_rate = 4.0;
  LossKind loss = LossKind::CrossEntropy;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: all cores

  std::filesystem::path data_path;  // empty: samples.tsv in the output directory
  SynthConfig synth;
  std::int64_t split_cutoff = 700'000;  // timestamps <= cutoff are training data
  std::size_t min_train = 8;

  ModelConfig model;  // vocab is filled in from the data
  LossKind loss = LossKind::CrossEntropy;
  OptimizerConfig cloud;
  OptimizerConfig finetune;
  bool embeddings_only = true;
  std::vector<std::string> frozen;
  std::vector<std::string> policies{"none", "soft1", "soft2"};

  HardConfig hard;
  ReportConfig report;
  Example1Config example1;

  ExperimentConfig();

  // Sets the master seed and every stream derived from it.
  void reseed(std::uint64_t value);
  FinetuneOptions finetune_options() const;
  void validate() const;
};

// Relative paths inside the document resolve against `base_dir`.
ExperimentConfig experiment_from_document(const ConfigDocument& doc,
                                          const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Every resolved setting in document form; parsing it back yields the same
// config.
std::string to_config_text(const ExperimentConfig& config);

}  // namespace lcft
