#include "lcft/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

namespace lcft {

UserDataset::UserDataset(Index user_id, std::vector<Sample> samples)
    : user_id_(user_id), samples_(std::move(samples)) {
  for (const Sample& s : samples_) {
    if (s.user_id != user_id_) {
      throw DataError("sample of user " + std::to_string(s.user_id) + " in dataset of user " +
                      std::to_string(user_id_));
    }
    if (s.label == 1.0) {
      ++n_pos_;
    } else if (s.label == 0.0) {
      ++n_neg_;
    } else {
      throw DataError("raw label must be 0 or 1 (user " + std::to_string(user_id_) + ")");
    }
  }
}

double UserDataset::local_ctr() const {
  const Index total = n_pos_ + n_neg_;
  return total == 0 ? 0.0 : static_cast<double>(n_pos_) / static_cast<double>(total);
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename Int>
Int parse_int(std::string_view field, const char* what, std::size_t line) {
  Int value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(field) + "'", line);
  }
  if (value < 0) throw ParseError(std::string("negative ") + what, line);
  return value;
}

std::vector<UserDataset> group_by_user(std::vector<Sample> samples) {
  std::map<Index, std::vector<Sample>> by_user;
  for (Sample& s : samples) by_user[s.user_id].push_back(std::move(s));
  std::vector<UserDataset> out;
  out.reserve(by_user.size());
  for (auto& [user, list] : by_user) out.emplace_back(user, std::move(list));
  return out;
}

}  // namespace

std::vector<UserDataset> parse_tsv(std::istream& in, int schema_version) {
  if (schema_version != kTsvSchemaVersion) {
    throw ConfigError("unsupported TSV schema version " + std::to_string(schema_version));
  }
  std::vector<Sample> samples;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 6) {
      throw ParseError("expected 6 tab-separated fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    Sample s;
    s.user_id = parse_int<Index>(fields[0], "user_id", line_no);
    s.item_id = parse_int<Index>(fields[1], "item_id", line_no);
    s.category_id = parse_int<Index>(fields[2], "category_id", line_no);
    if (fields[3] != "-") {
      for (std::string_view h : split(fields[3], '|')) {
        s.history.push_back(parse_int<Index>(h, "history id", line_no));
      }
      if (s.history.size() > kDefaultMaxHistory) {
        s.history.erase(s.history.begin(),
                        s.history.end() - static_cast<std::ptrdiff_t>(kDefaultMaxHistory));
      }
    }
    if (fields[4] == "1") {
      s.label = 1.0;
    } else if (fields[4] == "0") {
      s.label = 0.0;
    } else {
      throw DataError("line " + std::to_string(line_no) + ": label must be 0 or 1, got '" +
                      std::string(fields[4]) + "'");
    }
    s.timestamp = parse_int<std::int64_t>(fields[5], "timestamp", line_no);
    samples.push_back(std::move(s));
  }
  return group_by_user(std::move(samples));
}

std::vector<UserDataset> load_tsv(const std::filesystem::path& path, int schema_version) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file: " + path.string());
  return parse_tsv(in, schema_version);
}

void write_tsv(std::ostream& out, std::span<const UserDataset> datasets) {
  for (const UserDataset& d : datasets) {
    for (const Sample& s : d.samples()) {
      out << s.user_id << '\t' << s.item_id << '\t' << s.category_id << '\t';
      if (s.history.empty()) {
        out << '-';
      } else {
        for (std::size_t k = 0; k < s.history.size(); ++k) {
          if (k > 0) out << '|';
          out << s.history[k];
        }
      }
      out << '\t' << (s.label == 1.0 ? '1' : '0') << '\t' << s.timestamp << '\n';
    }
  }
}

void write_tsv(const std::filesystem::path& path, std::span<const UserDataset> datasets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_tsv(out, datasets);
  if (!out) throw ConfigError("write failed: " + path.string());
}

TrainTestSplit split_by_timestamp(std::span<const UserDataset> datasets, std::int64_t cutoff) {
  if (cutoff < 0) throw ContractError("split_by_timestamp: cutoff must be non-negative");
  TrainTestSplit out;
  for (const UserDataset& d : datasets) {
    std::vector<Sample> train;
    std::vector<Sample> test;
    for (const Sample& s : d.samples()) {
      (s.timestamp <= cutoff ? train : test).push_back(s);
    }
    if (train.empty() || test.empty()) continue;
    out.train.emplace_back(d.user_id(), std::move(train));
    out.test.emplace_back(d.user_id(), std::move(test));
  }
  return out;
}

TrainTestSplit filter_min_train(TrainTestSplit split, std::size_t min_train_samples) {
  TrainTestSplit out;
  for (std::size_t k = 0; k < split.train.size(); ++k) {
    if (split.train[k].size() < min_train_samples) continue;
    out.train.push_back(std::move(split.train[k]));
    out.test.push_back(std::move(split.test[k]));
  }
  return out;
}

GlobalStats global_stats(std::span<const UserDataset> datasets) {
  GlobalStats g;
  g.num_users = static_cast<Index>(datasets.size());
  for (const UserDataset& d : datasets) {
    g.n_pos += d.n_pos();
    g.n_total += d.n_pos() + d.n_neg();
  }
  if (g.n_total == 0) throw DataError("global_stats: no samples");
  if (g.n_pos == 0 || g.n_pos == g.n_total) {
    throw DataError("global_stats: pooled labels are all one class");
  }
  g.global_ctr = static_cast<double>(g.n_pos) / static_cast<double>(g.n_total);
  return g;
}

Vocab vocab_of(std::span<const UserDataset> datasets) {
  Vocab v;
  for (const UserDataset& d : datasets) {
    for (const Sample& s : d.samples()) {
      v.num_users = std::max(v.num_users, s.user_id + 1);
      v.num_items = std::max(v.num_items, s.item_id + 1);
      v.num_categories = std::max(v.num_categories, s.category_id + 1);
      for (Index h : s.history) v.num_items = std::max(v.num_items, h + 1);
    }
  }
  return v;
}

Index bucket_index(std::span<const double> edges, double x) {
  if (edges.size() < 2 || x < edges.front() || x > edges.back()) return -1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), x);
  Index k = static_cast<Index>(it - edges.begin()) - 1;
  const Index last = static_cast<Index>(edges.size()) - 2;
  return std::min(k, last);
}

std::vector<Index> local_ctr_histogram(std::span<const UserDataset> datasets,
                                       std::span<const double> edges) {
  if (edges.size() < 2) throw ContractError("histogram: need at least two edges");
  std::vector<Index> counts(edges.size() - 1, 0);
  for (const UserDataset& d : datasets) {
    const Index k = bucket_index(edges, d.local_ctr());
    if (k >= 0) ++counts[static_cast<std::size_t>(k)];
  }
  return counts;
}

}  // namespace lcft
