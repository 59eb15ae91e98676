#include "lcft/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lcft {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

ConfigError error_at(std::size_t line, const std::string& what) {
  return ConfigError("config line " + std::to_string(line) + ": " + what);
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.';
    if (!ok) return false;
  }
  return key.front() != '.' && key.back() != '.';
}

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '\\' && quoted) {
      ++k;
    } else if (line[k] == '"') {
      quoted = !quoted;
    } else if (line[k] == '#' && !quoted) {
      return line.substr(0, k);
    }
  }
  return line;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value();
    skip_space();
    if (pos_ != text_.size()) throw error_at(line_, "unexpected text after value");
    return v;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  ConfigValue parse_value() {
    skip_space();
    if (pos_ >= text_.size()) throw error_at(line_, "missing value");
    ConfigValue v;
    v.line = line_;
    const char c = text_[pos_];
    if (c == '"') {
      v.kind = ConfigValue::Kind::String;
      v.text = parse_string();
    } else if (c == '[') {
      v.kind = ConfigValue::Kind::Array;
      ++pos_;
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ']') {
        ++pos_;
        return v;
      }
      while (true) {
        ConfigValue item = parse_value();
        if (item.kind == ConfigValue::Kind::Array) throw error_at(line_, "nested arrays");
        v.items.push_back(std::move(item));
        skip_space();
        if (pos_ >= text_.size()) throw error_at(line_, "unterminated array");
        if (text_[pos_] == ']') {
          ++pos_;
          break;
        }
        if (text_[pos_] != ',') throw error_at(line_, "expected ',' in array");
        ++pos_;
      }
    } else {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
             text_[pos_] != ' ' && text_[pos_] != '\t') {
        ++pos_;
      }
      const std::string_view token = text_.substr(start, pos_ - start);
      if (token == "true" || token == "false") {
        v.kind = ConfigValue::Kind::Boolean;
        v.boolean = token == "true";
      } else {
        double x = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), x);
        if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(x)) {
          throw error_at(line_, "invalid value '" + std::string(token) + "'");
        }
        v.kind = ConfigValue::Kind::Number;
      }
      v.text = std::string(token);
    }
    return v;
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size()) {
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        const char e = text_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: throw error_at(line_, std::string("unknown escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    throw error_at(line_, "unterminated string");
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

const char* kind_name(ConfigValue::Kind k) {
  switch (k) {
    case ConfigValue::Kind::Boolean: return "boolean";
    case ConfigValue::Kind::Number: return "number";
    case ConfigValue::Kind::String: return "string";
    case ConfigValue::Kind::Array: return "array";
  }
  return "?";
}

void expect(const ConfigValue& v, ConfigValue::Kind kind, std::string_view key) {
  if (v.kind != kind) {
    throw error_at(v.line, "'" + std::string(key) + "' must be a " + kind_name(kind) + ", got " +
                               kind_name(v.kind));
  }
}

double as_number(const ConfigValue& v, std::string_view key) {
  expect(v, ConfigValue::Kind::Number, key);
  double x = 0.0;
  std::from_chars(v.text.data(), v.text.data() + v.text.size(), x);
  return x;
}

template <typename Int>
Int as_integer(const ConfigValue& v, std::string_view key) {
  expect(v, ConfigValue::Kind::Number, key);
  Int x{};
  const auto [ptr, ec] = std::from_chars(v.text.data(), v.text.data() + v.text.size(), x);
  if (ec != std::errc() || ptr != v.text.data() + v.text.size()) {
    throw error_at(v.line, "'" + std::string(key) + "' must be an integer in range");
  }
  return x;
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::istream& in) {
  ConfigDocument doc;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw error_at(line_no, "malformed section header");
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) throw error_at(line_no, "invalid section name");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw error_at(line_no, "expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw error_at(line_no, "invalid key '" + std::string(key) + "'");
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    ConfigValue value = ValueParser(trim(line.substr(eq + 1)), line_no).parse_all();
    if (!doc.values_.emplace(full, std::move(value)).second) {
      throw error_at(line_no, "duplicate key '" + full + "'");
    }
  }
  return doc;
}

ConfigDocument ConfigDocument::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  return parse(in);
}

const ConfigValue* ConfigDocument::find(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(std::string(key));
  return &it->second;
}

bool ConfigDocument::contains(std::string_view key) const { return values_.contains(key); }

double ConfigDocument::number(std::string_view key, double fallback) const {
  const auto* v = find(key);
  return v ? as_number(*v, key) : fallback;
}

std::int64_t ConfigDocument::integer(std::string_view key, std::int64_t fallback) const {
  const auto* v = find(key);
  return v ? as_integer<std::int64_t>(*v, key) : fallback;
}

std::uint64_t ConfigDocument::unsigned_integer(std::string_view key, std::uint64_t fallback) const {
  const auto* v = find(key);
  return v ? as_integer<std::uint64_t>(*v, key) : fallback;
}

bool ConfigDocument::boolean(std::string_view key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  expect(*v, ConfigValue::Kind::Boolean, key);
  return v->boolean;
}

std::string ConfigDocument::string(std::string_view key, std::string fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  expect(*v, ConfigValue::Kind::String, key);
  return v->text;
}

std::vector<double> ConfigDocument::numbers(std::string_view key,
                                            std::vector<double> fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  expect(*v, ConfigValue::Kind::Array, key);
  std::vector<double> out;
  for (const auto& item : v->items) out.push_back(as_number(item, key));
  return out;
}

std::vector<std::int64_t> ConfigDocument::integers(std::string_view key,
                                                   std::vector<std::int64_t> fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  expect(*v, ConfigValue::Kind::Array, key);
  std::vector<std::int64_t> out;
  for (const auto& item : v->items) out.push_back(as_integer<std::int64_t>(item, key));
  return out;
}

std::vector<std::string> ConfigDocument::strings(std::string_view key,
                                                 std::vector<std::string> fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  expect(*v, ConfigValue::Kind::Array, key);
  std::vector<std::string> out;
  for (const auto& item : v->items) {
    expect(item, ConfigValue::Kind::String, key);
    out.push_back(item.text);
  }
  return out;
}

void ConfigDocument::reject_unused() const {
  for (const auto& [key, value] : values_) {
    if (!used_.contains(key)) throw error_at(value.line, "unknown key '" + key + "'");
  }
}

std::vector<CorrectedLabels> HardConfig::grid() const {
  if (alphas.empty() && betas.empty()) return default_hard_grid();
  if (alphas.empty() || betas.empty()) {
    throw ConfigError("hard: give both alphas and betas, or neither");
  }
  std::vector<CorrectedLabels> out;
  for (double a : alphas) {
    for (double b : betas) {
      if (a > b) out.push_back({a, b});
    }
  }
  if (out.empty()) throw ConfigError("hard: grid has no candidate with alpha > beta");
  return out;
}

ExperimentConfig::ExperimentConfig() {
  model.kind = ModelKind::LR;
  model.embed_dim = 8;
  model.use_user_feature = false;
  cloud.kind = OptimizerKind::SGD;
  cloud.learning_rate = 1.0;
  cloud.lr_decay = 0.1;
  cloud.epochs = 2;
  cloud.batch_size = 32;
  finetune.kind = OptimizerKind::Adam;
  finetune.learning_rate = 0.03;
  finetune.epochs = 3;
  finetune.batch_size = 32;
  reseed(seed);
}

void ExperimentConfig::reseed(std::uint64_t value) {
  seed = value;
  synth.seed = value;
  cloud.seed = value;
  finetune.seed = value;
}

FinetuneOptions ExperimentConfig::finetune_options() const {
  FinetuneOptions o;
  o.loss = loss;
  o.embeddings_only = embeddings_only;
  o.frozen = frozen;
  return o;
}

namespace {

void check_edges(const std::vector<double>& edges, const char* what) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0) {
    throw ConfigError(std::string(what) + ": edges must run from 0 to 1");
  }
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1])) {
      throw ConfigError(std::string(what) + ": edges must be strictly increasing");
    }
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  synth.validate();
  cloud.validate();
  finetune.validate();
  if (model.embed_dim < 1) throw ConfigError("model: embed_dim must be >= 1");
  for (Index h : model.hidden) {
    if (h < 1) throw ConfigError("model: hidden sizes must be >= 1");
  }
  if (split_cutoff < 0) throw ConfigError("split: cutoff must be >= 0");
  for (const auto& p : policies) parse_policy_kind(p);
  check_edges(hard.group_edges, "hard.group_edges");
  check_edges(report.ctr_edges, "report.ctr_edges");
  check_edges(report.drift_edges, "report.drift_edges");
  hard.grid();
  if (!(hard.validation_fraction > 0.0 && hard.validation_fraction < 1.0)) {
    throw ConfigError("hard: validation_fraction must lie in (0, 1)");
  }
  if (!(report.tie_tolerance >= 0.0)) throw ConfigError("report: tie_tolerance must be >= 0");
  if (example1.samples_per_item < 10 || example1.samples_per_item % 10 != 0) {
    throw ConfigError("example1: samples_per_item must be a positive multiple of 10");
  }
  if (example1.epochs < 1 || !(example1.learning_rate > 0.0)) {
    throw ConfigError("example1: epochs and learning_rate must be positive");
  }
}

namespace {

void read_optimizer(const ConfigDocument& doc, const std::string& section, OptimizerConfig& o) {
  o.kind = parse_optimizer_kind(doc.string(section + ".optimizer", std::string(to_string(o.kind))));
  o.learning_rate = doc.number(section + ".learning_rate", o.learning_rate);
  o.lr_decay = doc.number(section + ".lr_decay", o.lr_decay);
  o.beta1 = doc.number(section + ".beta1", o.beta1);
  o.beta2 = doc.number(section + ".beta2", o.beta2);
  o.epsilon = doc.number(section + ".epsilon", o.epsilon);
  const auto batch = doc.integer(section + ".batch_size", static_cast<std::int64_t>(o.batch_size));
  if (batch < 1) throw ConfigError(section + ".batch_size must be >= 1");
  o.batch_size = static_cast<std::size_t>(batch);
  o.epochs = static_cast<int>(doc.integer(section + ".epochs", o.epochs));
  o.seed = doc.unsigned_integer(section + ".seed", o.seed);
}

}  // namespace

ExperimentConfig experiment_from_document(const ConfigDocument& doc,
                                          const std::filesystem::path& base_dir) {
  const auto schema = doc.integer("schema", -1);
  if (schema == -1) throw ConfigError("config: missing 'schema' (expected 1)");
  if (schema != kConfigSchemaVersion) {
    throw ConfigError("config: unsupported schema " + std::to_string(schema));
  }

  ExperimentConfig c;
  c.reseed(doc.unsigned_integer("seed", c.seed));
  const auto threads = doc.integer("threads", 0);
  if (threads < 0) throw ConfigError("threads must be >= 0");
  c.threads = static_cast<unsigned>(threads);
  c.loss = parse_loss_kind(doc.string("loss", std::string(to_string(c.loss))));

  const std::string data = doc.string("data.path", "");
  if (!data.empty()) {
    const std::filesystem::path p(data);
    c.data_path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
  c.split_cutoff = doc.integer("split.cutoff", c.split_cutoff);
  const auto min_train = doc.integer("split.min_train", static_cast<std::int64_t>(c.min_train));
  if (min_train < 0) throw ConfigError("split.min_train must be >= 0");
  c.min_train = static_cast<std::size_t>(min_train);

  SynthConfig& s = c.synth;
  s.num_users = doc.integer("synth.num_users", s.num_users);
  s.num_items = doc.integer("synth.num_items", s.num_items);
  s.num_categories = doc.integer("synth.num_categories", s.num_categories);
  s.latent_dim = doc.integer("synth.latent_dim", s.latent_dim);
  s.min_samples = doc.integer("synth.min_samples", s.min_samples);
  s.max_samples = doc.integer("synth.max_samples", s.max_samples);
  s.bias_location = doc.number("synth.bias_location", s.bias_location);
  s.bias_scale = doc.number("synth.bias_scale", s.bias_scale);
  s.tail_exponent = doc.number("synth.tail_exponent", s.tail_exponent);
  s.popularity_scale = doc.number("synth.popularity_scale", s.popularity_scale);
  s.taste_scale = doc.number("synth.taste_scale", s.taste_scale);
  s.item_scale = doc.number("synth.item_scale", s.item_scale);
  s.category_scale = doc.number("synth.category_scale", s.category_scale);
  s.pool_size = doc.integer("synth.pool_size", s.pool_size);
  s.explore_rate = doc.number("synth.explore_rate", s.explore_rate);
  s.time_span = doc.integer("synth.time_span", s.time_span);
  const auto history = doc.integer("synth.max_history", static_cast<std::int64_t>(s.max_history));
  if (history < 0) throw ConfigError("synth.max_history must be >= 0");
  s.max_history = static_cast<std::size_t>(history);
  s.seed = doc.unsigned_integer("synth.seed", s.seed);

  c.model.kind = parse_model_kind(doc.string("model.kind", std::string(to_string(c.model.kind))));
  c.model.embed_dim = doc.integer("model.embed_dim", c.model.embed_dim);
  std::vector<std::int64_t> hidden(c.model.hidden.begin(), c.model.hidden.end());
  hidden = doc.integers("model.hidden", hidden);
  c.model.hidden.assign(hidden.begin(), hidden.end());
  c.model.use_user_feature = doc.boolean("model.user_feature", c.model.use_user_feature);

  read_optimizer(doc, "cloud", c.cloud);
  read_optimizer(doc, "finetune", c.finetune);
  c.embeddings_only = doc.boolean("finetune.embeddings_only", c.embeddings_only);
  c.frozen = doc.strings("finetune.frozen", c.frozen);
  c.policies = doc.strings("finetune.policies", c.policies);

  c.hard.group_edges = doc.numbers("hard.group_edges", c.hard.group_edges);
  c.hard.alphas = doc.numbers("hard.alphas", c.hard.alphas);
  c.hard.betas = doc.numbers("hard.betas", c.hard.betas);
  c.hard.validation_fraction = doc.number("hard.validation_fraction", c.hard.validation_fraction);

  c.report.drift_edges = doc.numbers("report.drift_edges", c.report.drift_edges);
  c.report.ctr_edges = doc.numbers("report.ctr_edges", c.report.ctr_edges);
  c.report.tie_tolerance = doc.number("report.tie_tolerance", c.report.tie_tolerance);

  c.example1.samples_per_item = doc.integer("example1.samples_per_item", c.example1.samples_per_item);
  c.example1.epochs = static_cast<int>(doc.integer("example1.epochs", c.example1.epochs));
  c.example1.learning_rate = doc.number("example1.learning_rate", c.example1.learning_rate);
  c.example1.loss =
      parse_loss_kind(doc.string("example1.loss", std::string(to_string(c.example1.loss))));

  doc.reject_unused();
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return experiment_from_document(ConfigDocument::load(path), path.parent_path());
}

namespace {

std::string fmt(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, ptr);
  // Keep numbers recognisable as floats when they happen to be integral.
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

template <typename T, typename F>
std::string list(const std::vector<T>& xs, F&& f) {
  std::string out = "[";
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k > 0) out += ", ";
    out += f(xs[k]);
  }
  return out + "]";
}

void write_optimizer(std::ostream& out, const char* section, const OptimizerConfig& o) {
  out << "\n[" << section << "]\n"
      << "optimizer = " << quote(to_string(o.kind)) << '\n'
      << "learning_rate = " << fmt(o.learning_rate) << '\n'
      << "lr_decay = " << fmt(o.lr_decay) << '\n'
      << "beta1 = " << fmt(o.beta1) << '\n'
      << "beta2 = " << fmt(o.beta2) << '\n'
      << "epsilon = " << fmt(o.epsilon) << '\n'
      << "batch_size = " << o.batch_size << '\n'
      << "epochs = " << o.epochs << '\n'
      << "seed = " << o.seed << '\n';
}

}  // namespace

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream out;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  out << "schema = " << kConfigSchemaVersion << '\n'
      << "seed = " << c.seed << '\n'
      << "threads = " << c.threads << '\n'
      << "loss = " << quote(to_string(c.loss)) << '\n';
  out << "\n[data]\npath = " << quote(c.data_path.generic_string()) << '\n';
  out << "\n[split]\ncutoff = " << c.split_cutoff << "\nmin_train = " << c.min_train << '\n';
  const SynthConfig& s = c.synth;
  out << "\n[synth]\n"
      << "num_users = " << s.num_users << '\n'
      << "num_items = " << s.num_items << '\n'
      << "num_categories = " << s.num_categories << '\n'
      << "latent_dim = " << s.latent_dim << '\n'
      << "min_samples = " << s.min_samples << '\n'
      << "max_samples = " << s.max_samples << '\n'
      << "bias_location = " << fmt(s.bias_location) << '\n'
      << "bias_scale = " << fmt(s.bias_scale) << '\n'
      << "tail_exponent = " << fmt(s.tail_exponent) << '\n'
      << "popularity_scale = " << fmt(s.popularity_scale) << '\n'
      << "taste_scale = " << fmt(s.taste_scale) << '\n'
      << "item_scale = " << fmt(s.item_scale) << '\n'
      << "category_scale = " << fmt(s.category_scale) << '\n'
      << "pool_size = " << s.pool_size << '\n'
      << "explore_rate = " << fmt(s.explore_rate) << '\n'
      << "time_span = " << s.time_span << '\n'
      << "max_history = " << s.max_history << '\n'
      << "seed = " << s.seed << '\n';
  out << "\n[model]\n"
      << "kind = " << quote(to_string(c.model.kind)) << '\n'
      << "embed_dim = " << c.model.embed_dim << '\n'
      << "hidden = " << list(c.model.hidden, [](Index h) { return std::to_string(h); }) << '\n'
      << "user_feature = " << b(c.model.use_user_feature) << '\n';
  write_optimizer(out, "cloud", c.cloud);
  write_optimizer(out, "finetune", c.finetune);
  out << "embeddings_only = " << b(c.embeddings_only) << '\n'
      << "frozen = " << list(c.frozen, quote) << '\n'
      << "policies = " << list(c.policies, quote) << '\n';
  out << "\n[hard]\n"
      << "group_edges = " << list(c.hard.group_edges, fmt) << '\n'
      << "alphas = " << list(c.hard.alphas, fmt) << '\n'
      << "betas = " << list(c.hard.betas, fmt) << '\n'
      << "validation_fraction = " << fmt(c.hard.validation_fraction) << '\n';
  out << "\n[report]\n"
      << "drift_edges = " << list(c.report.drift_edges, fmt) << '\n'
      << "ctr_edges = " << list(c.report.ctr_edges, fmt) << '\n'
      << "tie_tolerance = " << fmt(c.report.tie_tolerance) << '\n';
  out << "\n[example1]\n"
      << "samples_per_item = " << c.example1.samples_per_item << '\n'
      << "epochs = " << c.example1.epochs << '\n'
      << "learning_rate = " << fmt(c.example1.learning_rate) << '\n'
      << "loss = " << quote(to_string(c.example1.loss)) << '\n';
  return out.str();
}

}  // namespace lcft
