#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lcft/config.hpp"
#include "lcft/dataset.hpp"

namespace lcft {

// Files written under the output directory.
namespace out_files {
inline constexpr const char* kSamples = "samples.tsv";
inline constexpr const char* kStats = "stats.txt";
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kCheckpoint = "model.ckpt";
inline constexpr const char* kTrainLog = "train.log";
inline constexpr const char* kStoreDir = "finetune";
inline constexpr const char* kHardTable = "finetune/hard_table.txt";
inline constexpr const char* kPerUser = "per_user.csv";
inline constexpr const char* kSummary = "summary.csv";
inline constexpr const char* kFig2 = "fig2_data.csv";
inline constexpr const char* kFig3 = "fig3_data.csv";
}  // namespace out_files

inline constexpr const char* kCloudStore = "cloud";

// The dataset every command after `synth` works on: the chronological split,
// users without both a train and a test part (or with fewer than min_train
// training samples) dropped.
struct ExperimentData {
  TrainTestSplit split;
  Vocab vocab;  // of the whole file, so test ids are in range
  GlobalStats train_stats;
};

ExperimentData load_experiment_data(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir);

// Policy names in run order: "none" first, then the configured ones.
std::vector<std::string> finetune_policies(const ExperimentConfig& config);

// (b - a) / a as a signed percentage with two decimals, e.g. "+1.23%".
std::string relative_improvement(double a, double b);

// Each command writes into `out_dir`, refreshes config.txt and the manifest,
// and logs progress to `log`.
void cmd_synth(const ExperimentConfig& config, const std::filesystem::path& out_dir,
               std::ostream& log);
void cmd_train(const ExperimentConfig& config, const std::filesystem::path& out_dir,
               std::ostream& log);
void cmd_finetune(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                  std::ostream& log);
void cmd_report(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                std::ostream& log);
// Returns true when every expectation holds.
bool cmd_example1(const ExperimentConfig& config, std::ostream& out);

}  // namespace lcft
