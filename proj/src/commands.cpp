#include "lcft/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "lcft/checkpoint.hpp"
#include "lcft/evaluation.hpp"
#include "lcft/example1.hpp"
#include "lcft/manifest.hpp"
#include "lcft/parallel.hpp"
#include "lcft/synth.hpp"
#include "lcft/training.hpp"

namespace lcft {

namespace fs = std::filesystem;

namespace {

// Shortest text that reads back to the same double.
std::string num(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string fixed(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string opt_fixed(const std::optional<double>& x) { return x ? fixed(*x) : "NA"; }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw ConfigError("write failed: " + path.string());
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Writes config.txt and folds the listed outputs into the manifest.
void record(const ExperimentConfig& config, const fs::path& out_dir,
            const std::vector<std::string>& outputs) {
  const std::string text = to_config_text(config);
  {
    const fs::path path = out_dir / out_files::kConfig;
    auto out = open_out(path);
    out << text;
    close_out(out, path);
  }
  const fs::path manifest_path = out_dir / kManifestName;
  Manifest m = Manifest::load(manifest_path);
  m.seed = config.seed;
  m.config_hash = git_blob_hash(text);
  m.add_file(out_dir, out_files::kConfig);
  for (const auto& f : outputs) m.add_file(out_dir, f);
  m.save(manifest_path);
}

std::string store_users(std::string_view policy) { return std::string(policy) + ".users.tsv"; }
std::string store_preds(std::string_view policy) { return std::string(policy) + ".pred.tsv"; }

struct StoreUser {
  Index user_id = 0;
  double local_ctr = 0.0;
  CorrectedLabels labels;
  long steps = 0;
  double final_loss = 0.0;
  std::string status = "ok";
  std::vector<double> predictions;  // one per test sample
};

std::string one_line(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; },
                  ' ');
  return s;
}

// Two files per policy: per-user outcomes and per-test-sample predictions.
std::vector<std::string> write_store(const fs::path& out_dir, std::string_view policy,
                                     const std::vector<StoreUser>& users,
                                     const TrainTestSplit& split) {
  const std::string users_rel = std::string(out_files::kStoreDir) + "/" + store_users(policy);
  const std::string preds_rel = std::string(out_files::kStoreDir) + "/" + store_preds(policy);
  {
    auto out = open_out(out_dir / users_rel);
    out << "# user_id\tlocal_ctr\talpha\tbeta\tsteps\tfinal_loss\tstatus\n";
    for (const auto& u : users) {
      out << u.user_id << '\t' << num(u.local_ctr) << '\t' << num(u.labels.alpha) << '\t'
          << num(u.labels.beta) << '\t' << u.steps << '\t' << num(u.final_loss) << '\t'
          << one_line(u.status) << '\n';
    }
    close_out(out, out_dir / users_rel);
  }
  {
    auto out = open_out(out_dir / preds_rel);
    out << "# user_id\tindex\tlabel\tprediction\n";
    for (std::size_t k = 0; k < users.size(); ++k) {
      const auto& test = split.test[k].samples();
      for (std::size_t j = 0; j < test.size(); ++j) {
        out << users[k].user_id << '\t' << j << '\t' << (test[j].label == 1.0 ? 1 : 0) << '\t'
            << num(users[k].predictions[j]) << '\n';
      }
    }
    close_out(out, out_dir / preds_rel);
  }
  return {users_rel, preds_rel};
}

// Hard policy: per local-CTR group, pick the grid labels that maximise the
// held-out AUC when each member fine-tunes on the older part of its training
// data and is scored on the newest part.
CorrectionTable build_table(const ExperimentConfig& config, const ExperimentData& data,
                            const ModelParams& global, unsigned threads) {
  const auto& train = data.split.train;
  struct Holdout {
    std::optional<UserDataset> fit;
    std::vector<Sample> validation;
  };
  std::vector<Holdout> holdouts(train.size());
  std::vector<double> local_ctrs;
  for (std::size_t i = 0; i < train.size(); ++i) {
    local_ctrs.push_back(train[i].local_ctr());
    std::vector<Sample> samples = train[i].samples();
    std::stable_sort(samples.begin(), samples.end(),
                     [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; });
    const auto n = samples.size();
    const auto held = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.hard.validation_fraction * n)));
    if (held >= n) continue;
    holdouts[i].validation.assign(samples.end() - static_cast<std::ptrdiff_t>(held), samples.end());
    samples.resize(n - held);
    holdouts[i].fit.emplace(train[i].user_id(), std::move(samples));
  }
  const auto groups = group_by_local_ctr(local_ctrs, config.hard.group_edges);
  const auto grid = config.hard.grid();
  const FinetuneOptions options = config.finetune_options();
  const GroupEvaluator evaluate = [&](const CtrGroup& group, CorrectedLabels labels) {
    double weighted = 0.0;
    double weight = 0.0;
    for (std::size_t i : group.members) {
      const Holdout& h = holdouts[i];
      if (!h.fit) continue;
      const auto samples = apply_correction(*h.fit, labels);
      try {
        const auto fit = finetune_user(global, samples, h.fit->user_id(), config.finetune, options);
        std::vector<double> labels_raw;
        for (const Sample& s : h.validation) labels_raw.push_back(s.label);
        const auto a = auc(predict(fit.model, h.validation), labels_raw);
        if (!a) continue;
        const auto m = static_cast<double>(h.validation.size());
        weighted += m * *a;
        weight += m;
      } catch (const TrainingError&) {
        continue;
      }
    }
    return weight > 0.0 ? weighted / weight : std::nan("");
  };
  return build_hard_table(groups, grid, data.train_stats.global_ctr, evaluate, threads);
}

struct LoadedStore {
  std::string name;
  std::vector<UserEval> entries;
};

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) out.push_back(field);
  return out;
}

// Reads a store back and scores it against the test split.
LoadedStore load_store(const fs::path& out_dir, const std::string& name,
                       const ExperimentData& data) {
  const fs::path dir = out_dir / out_files::kStoreDir;
  const fs::path users_path = dir / store_users(name);
  const fs::path preds_path = dir / store_preds(name);
  if (!fs::exists(users_path) || !fs::exists(preds_path)) {
    throw ReportError("missing result store for '" + name + "' in " + dir.string() +
                      " (run finetune first)");
  }
  const auto& test = data.split.test;
  const auto& train = data.split.train;
  LoadedStore store;
  store.name = name;

  std::map<Index, bool> fallback;
  {
    std::ifstream in(users_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      const auto f = fields_of(line);
      if (f.size() != 7) throw ReportError(users_path.string() + ": malformed row");
      fallback[std::stoll(f[0])] = f[6] != "ok" && f[6] != "global";
    }
  }

  std::ifstream in(preds_path);
  std::string line;
  std::vector<std::vector<double>> preds(test.size());
  std::map<Index, std::size_t> index_of;
  for (std::size_t k = 0; k < test.size(); ++k) index_of[test[k].user_id()] = k;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = fields_of(line);
    if (f.size() != 4) throw ReportError(preds_path.string() + ": malformed row");
    const auto it = index_of.find(std::stoll(f[0]));
    if (it == index_of.end()) {
      throw ReportError(preds_path.string() + ": user " + f[0] + " is not in the test data");
    }
    const auto& samples = test[it->second].samples();
    const auto j = static_cast<std::size_t>(std::stoull(f[1]));
    if (j != preds[it->second].size() || j >= samples.size() ||
        (samples[j].label == 1.0) != (f[2] == "1")) {
      throw ReportError(preds_path.string() + ": predictions do not match the test data for user " +
                        f[0]);
    }
    preds[it->second].push_back(std::stod(f[3]));
  }
  for (std::size_t k = 0; k < test.size(); ++k) {
    const auto& samples = test[k].samples();
    if (preds[k].size() != samples.size()) {
      throw ReportError(preds_path.string() + ": incomplete predictions for user " +
                        std::to_string(test[k].user_id()));
    }
    std::vector<double> labels;
    for (const Sample& s : samples) labels.push_back(s.label);
    UserEval e;
    e.user_id = test[k].user_id();
    e.test_size = static_cast<Index>(samples.size());
    e.auc = auc(preds[k], labels);
    e.local_ctr = train[k].local_ctr();
    e.policy = name;
    e.fallback = fallback[e.user_id];
    store.entries.push_back(std::move(e));
  }
  return store;
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& config, const fs::path& out_dir) {
  const fs::path path = config.data_path.empty() ? out_dir / out_files::kSamples : config.data_path;
  if (!fs::exists(path)) throw ConfigError("data file not found: " + path.string());
  const auto all = load_tsv(path);
  ExperimentData data;
  data.vocab = vocab_of(all);
  data.split = filter_min_train(split_by_timestamp(all, config.split_cutoff), config.min_train);
  if (data.split.train.empty()) {
    throw DataError("no user has both training and test data at cutoff " +
                    std::to_string(config.split_cutoff));
  }
  data.train_stats = global_stats(data.split.train);
  return data;
}

std::vector<std::string> finetune_policies(const ExperimentConfig& config) {
  std::vector<std::string> out{"none"};
  for (const auto& p : config.policies) {
    const std::string name(to_string(parse_policy_kind(p)));
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

std::string relative_improvement(double a, double b) {
  if (!(a != 0.0) || !std::isfinite(a) || !std::isfinite(b)) return "NA";
  const double pct = 100.0 * (b - a) / a;
  char buf[32];
  if (std::abs(pct) < 0.005) return "0.00%";
  std::snprintf(buf, sizeof buf, "%+.2f%%", pct);
  return buf;
}

void cmd_synth(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  prepare_dir(out_dir);
  const SynthData data = synth_generate(config.synth);
  write_tsv(out_dir / out_files::kSamples, data.datasets);
  const GlobalStats g = global_stats(data.datasets);
  const auto hist = local_ctr_histogram(data.datasets, config.report.ctr_edges);
  {
    const fs::path path = out_dir / out_files::kStats;
    auto out = open_out(path);
    out << "users " << g.num_users << '\n'
        << "samples " << g.n_total << '\n'
        << "clicks " << g.n_pos << '\n'
        << "global_ctr " << num(g.global_ctr) << '\n'
        << "# local CTR histogram: lo hi users\n";
    for (std::size_t k = 0; k < hist.size(); ++k) {
      out << "bucket " << num(config.report.ctr_edges[k]) << ' '
          << num(config.report.ctr_edges[k + 1]) << ' ' << hist[k] << '\n';
    }
    close_out(out, path);
  }
  record(config, out_dir, {out_files::kSamples, out_files::kStats});
  log << "synth: " << g.num_users << " users, " << g.n_total << " samples, global CTR "
      << fixed(g.global_ctr, 4) << '\n';
}

void cmd_train(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  prepare_dir(out_dir);
  const ExperimentData data = load_experiment_data(config, out_dir);
  ModelConfig mc = config.model;
  mc.vocab = data.vocab;
  const CloudResult cloud = train_cloud(data.split.train, mc, config.loss, config.cloud,
                                        config.cloud.seed);
  write_checkpoint(out_dir / out_files::kCheckpoint, cloud.model);

  std::vector<Sample> pooled;
  std::vector<double> labels;
  for (const auto& d : data.split.train) {
    for (const Sample& s : d.samples()) {
      pooled.push_back(s);
      labels.push_back(s.label);
    }
  }
  const auto train_auc = auc(predict(cloud.model, pooled), labels);
  {
    const fs::path path = out_dir / out_files::kTrainLog;
    auto out = open_out(path);
    out << "users " << data.split.train.size() << '\n'
        << "train_samples " << pooled.size() << '\n'
        << "global_ctr " << num(data.train_stats.global_ctr) << '\n';
    for (std::size_t e = 0; e < cloud.epoch_loss.size(); ++e) {
      out << "epoch " << e + 1 << " loss " << num(cloud.epoch_loss[e]) << '\n';
    }
    out << "train_auc " << (train_auc ? num(*train_auc) : "NA") << '\n';
    close_out(out, path);
  }
  record(config, out_dir, {out_files::kCheckpoint, out_files::kTrainLog});
  log << "train: " << pooled.size() << " samples, final loss " << fixed(cloud.epoch_loss.back())
      << ", train AUC " << opt_fixed(train_auc) << '\n';
}

void cmd_finetune(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  const ExperimentData data = load_experiment_data(config, out_dir);
  const fs::path ckpt = out_dir / out_files::kCheckpoint;
  if (!fs::exists(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string() + " (run train)");
  const ModelParams global = read_checkpoint(ckpt);
  if (global.config.vocab.num_items != data.vocab.num_items ||
      global.config.vocab.num_categories != data.vocab.num_categories ||
      (global.config.use_user_feature && global.config.vocab.num_users != data.vocab.num_users)) {
    throw DataError("checkpoint vocabulary does not match the data");
  }
  prepare_dir(out_dir / out_files::kStoreDir);
  const auto& train = data.split.train;
  const auto& test = data.split.test;
  const double w_g = data.train_stats.global_ctr;
  const unsigned threads = resolve_threads(config.threads);
  std::vector<std::string> outputs;

  {
    std::vector<StoreUser> users(train.size());
    for (std::size_t k = 0; k < train.size(); ++k) {
      users[k].user_id = train[k].user_id();
      users[k].local_ctr = train[k].local_ctr();
      users[k].status = "global";
      users[k].predictions = predict(global, test[k].samples());
    }
    auto files = write_store(out_dir, kCloudStore, users, data.split);
    outputs.insert(outputs.end(), files.begin(), files.end());
  }

  const FinetuneOptions options = config.finetune_options();
  for (const std::string& name : finetune_policies(config)) {
    const PolicyKind kind = parse_policy_kind(name);
    CorrectionPolicy policy;
    if (kind != PolicyKind::Hard) {
      policy = CorrectionPolicy(kind);
    } else {
      CorrectionTable table = build_table(config, data, global, threads);
      write_table(out_dir / out_files::kHardTable, table);
      outputs.emplace_back(out_files::kHardTable);
      policy = CorrectionPolicy::hard(std::move(table));
    }
    std::vector<StoreUser> users(train.size());
    run_lcft_each(train, policy, global, w_g, config.finetune, options, threads,
                  [&](std::size_t k, UserOutcome& o) {
                    StoreUser& u = users[k];
                    u.user_id = o.user_id;
                    u.local_ctr = o.local_ctr;
                    u.labels = o.labels;
                    if (o.result) {
                      u.steps = o.result->steps;
                      u.final_loss = o.result->final_loss;
                      u.predictions = predict(o.result->model, test[k].samples());
                    } else {
                      u.status = "failed: " + o.error;
                      u.predictions = predict(global, test[k].samples());
                    }
                  });
    std::size_t failed = 0;
    constexpr std::size_t kShownFailures = 5;
    for (const auto& u : users) {
      if (u.status == "ok") continue;
      if (++failed <= kShownFailures) {
        log << "finetune[" << name << "]: user " << u.user_id << ' ' << u.status << '\n';
      }
    }
    if (failed > kShownFailures) {
      log << "finetune[" << name << "]: ... " << failed - kShownFailures
          << " more failures, see the users store\n";
    }
    if (failed == users.size()) {
      throw TrainingError("fine-tuning failed for every user under policy " + name, 0);
    }
    auto files = write_store(out_dir, name, users, data.split);
    outputs.insert(outputs.end(), files.begin(), files.end());
    log << "finetune[" << name << "]: " << users.size() - failed << " users fine-tuned, " << failed
        << " fell back to the global model\n";
  }
  record(config, out_dir, outputs);
}

void cmd_report(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  const ExperimentData data = load_experiment_data(config, out_dir);
  const double w_g = data.train_stats.global_ctr;
  std::vector<LoadedStore> stores;
  stores.push_back(load_store(out_dir, kCloudStore, data));
  for (const auto& p : finetune_policies(config)) stores.push_back(load_store(out_dir, p, data));
  const LoadedStore& cloud = stores[0];
  const LoadedStore& local = stores[1];
  const double tol = config.report.tie_tolerance;

  {
    const fs::path path = out_dir / out_files::kPerUser;
    auto out = open_out(path);
    out << "user_id,local_ctr,drift,test_size";
    for (const auto& s : stores) out << ",auc_" << s.name;
    out << '\n';
    for (std::size_t k = 0; k < cloud.entries.size(); ++k) {
      const UserEval& e = cloud.entries[k];
      out << e.user_id << ',' << fixed(e.local_ctr) << ',' << fixed(e.local_ctr - w_g) << ','
          << e.test_size;
      for (const auto& s : stores) out << ',' << opt_fixed(s.entries[k].auc);
      out << '\n';
    }
    close_out(out, path);
  }

  std::vector<double> averages;
  for (const auto& s : stores) averages.push_back(user_avg_auc(s.entries));
  {
    const fs::path path = out_dir / out_files::kSummary;
    auto out = open_out(path);
    out << "model,auc_avg,users,undefined_auc,fallbacks,vs_cloud,vs_local,wins_vs_local,"
           "ties_vs_local,losses_vs_local\n";
    for (std::size_t k = 0; k < stores.size(); ++k) {
      const auto& s = stores[k];
      const auto wtl = win_tie_loss(s.entries, local.entries, tol);
      const auto fallbacks = std::count_if(s.entries.begin(), s.entries.end(),
                                           [](const UserEval& e) { return e.fallback; });
      out << s.name << ',' << fixed(averages[k]) << ',' << s.entries.size() << ','
          << undefined_auc_count(s.entries) << ',' << fallbacks << ','
          << relative_improvement(averages[0], averages[k]) << ','
          << relative_improvement(averages[1], averages[k]) << ',' << wtl.wins << ','
          << wtl.ties << ',' << wtl.losses << '\n';
    }
    close_out(out, path);
  }

  // Local against cloud, then every corrected policy against local and cloud.
  std::vector<std::pair<const LoadedStore*, const LoadedStore*>> comparisons{{&local, &cloud}};
  for (std::size_t k = 2; k < stores.size(); ++k) {
    comparisons.emplace_back(&stores[k], &local);
    comparisons.emplace_back(&stores[k], &cloud);
  }
  {
    const fs::path path = out_dir / out_files::kFig2;
    auto out = open_out(path);
    out << "model,baseline,axis,lo,hi,users,mean_auc_gain\n";
    const std::pair<const char*, BucketAxis> axes[] = {{"local_ctr", BucketAxis::LocalCtr},
                                                       {"abs_drift", BucketAxis::AbsDrift}};
    for (const auto& [a, b] : comparisons) {
      for (const auto& [axis_name, axis] : axes) {
        const auto& edges =
            axis == BucketAxis::LocalCtr ? config.report.ctr_edges : config.report.drift_edges;
        for (const auto& bucket : drift_buckets(a->entries, b->entries, edges, w_g, axis)) {
          out << a->name << ',' << b->name << ',' << axis_name << ',' << num(bucket.lo) << ','
              << num(bucket.hi) << ',' << bucket.count << ','
              << (bucket.count > 0 ? fixed(bucket.mean_improvement) : "NA") << '\n';
        }
      }
    }
    close_out(out, path);
  }
  {
    const fs::path path = out_dir / out_files::kFig3;
    auto out = open_out(path);
    out << "model,baseline,wins,ties,losses,win_share,tie_share,loss_share\n";
    for (const auto& [a, b] : comparisons) {
      const auto wtl = win_tie_loss(a->entries, b->entries, tol);
      const double n = static_cast<double>(std::max<Index>(wtl.total(), 1));
      out << a->name << ',' << b->name << ',' << wtl.wins << ',' << wtl.ties << ',' << wtl.losses
          << ',' << fixed(wtl.wins / n) << ',' << fixed(wtl.ties / n) << ','
          << fixed(wtl.losses / n) << '\n';
    }
    close_out(out, path);
  }
  record(config, out_dir,
         {out_files::kPerUser, out_files::kSummary, out_files::kFig2, out_files::kFig3});
  for (std::size_t k = 0; k < stores.size(); ++k) {
    log << "report: " << stores[k].name << " AUC_avg " << fixed(averages[k]) << " ("
        << relative_improvement(averages[1], averages[k]) << " vs local)\n";
  }
}

bool cmd_example1(const ExperimentConfig& config, std::ostream& out) {
  const Example1Result result = run_example1(config.example1);
  print_example1(out, result);
  return result.passed();
}

}  // namespace lcft
