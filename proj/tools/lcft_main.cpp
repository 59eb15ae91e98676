#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lcft/commands.hpp"
#include "lcft/errors.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> policies;
};

lcft::ExperimentConfig resolve(const Options& o) {
  lcft::ExperimentConfig c;
  if (!o.config.empty()) c = lcft::load_experiment(o.config);
  if (o.seed) c.reseed(*o.seed);
  if (!o.policies.empty()) c.policies = o.policies;
  c.validate();
  return c;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const lcft::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const lcft::DataError*>(&e) || dynamic_cast<const lcft::InputError*>(&e) ||
      dynamic_cast<const lcft::ReportError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const lcft::DomainError*>(&e) || dynamic_cast<const lcft::TrainingError*>(&e)) {
    return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-correction fine-tuning simulator"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", opts.config, "Experiment config file (schema = 1)")
        ->check(CLI::ExistingFile);
    auto* out = sub->add_option("--out", opts.out, "Output directory");
    if (needs_out) out->required();
    sub->add_option("--seed", opts.seed, "Master seed, overrides the config");
    sub->add_option("--policy", opts.policies, "Correction policies, comma separated")
        ->delimiter(',');
  };
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* train = app.add_subcommand("train", "Train the cloud model");
  auto* finetune = app.add_subcommand("finetune", "Fine-tune every user under each policy");
  auto* report = app.add_subcommand("report", "Write the comparison CSVs");
  auto* example1 = app.add_subcommand("example1", "Run the three-item toy example");
  for (auto* sub : {synth, train, finetune, report}) add_common(sub, true);
  add_common(example1, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const lcft::ExperimentConfig config = resolve(opts);
    if (synth->parsed()) lcft::cmd_synth(config, opts.out, std::cout);
    if (train->parsed()) lcft::cmd_train(config, opts.out, std::cout);
    if (finetune->parsed()) lcft::cmd_finetune(config, opts.out, std::cout);
    if (report->parsed()) lcft::cmd_report(config, opts.out, std::cout);
    if (example1->parsed()) return lcft::cmd_example1(config, std::cout) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
