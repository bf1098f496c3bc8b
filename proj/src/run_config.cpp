// SPDX-License-Identifier: Apache-2.0
#include "cad/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cad/errors.hpp"
#include "cad/log.hpp"
#include "cad/rng.hpp"

namespace cad::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) { return nlohmann::json(v).dump(); }

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&, const fs::path& base)> set;
  std::function<std::string(const RunConfig&)> get;
};

fs::path resolve(const std::string& v, const fs::path& base) {
  if (v.empty()) return {};
  fs::path p(v);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

const std::vector<Field>& fields() {
  using R = RunConfig;
  static const std::vector<Field> table = {
      {"corpus", [](R& c, const std::string& v, const fs::path& b) { c.corpus = resolve(v, b); },
       [](const R& c) { return c.corpus.string(); }},
      {"output_dir", [](R& c, const std::string& v, const fs::path& b) { c.output_dir = resolve(v, b); },
       [](const R& c) { return c.output_dir.string(); }},
      {"word_vectors", [](R& c, const std::string& v, const fs::path& b) { c.word_vectors = resolve(v, b); },
       [](const R& c) { return c.word_vectors.string(); }},
      {"features", [](R& c, const std::string& v, const fs::path& b) { c.features = resolve(v, b); },
       [](const R& c) { return c.features.string(); }},
      {"log_level",
       [](R& c, const std::string& v, const fs::path&) {
         if (!log::parse_level(v)) throw ConfigError("log_level: unknown level '" + v + "'");
         c.log_level = v;
       },
       [](const R& c) { return c.log_level; }},
      {"seed", [](R& c, const std::string& v, const fs::path&) { c.train.seed = to_size("seed", v); },
       [](const R& c) { return std::to_string(c.train.seed); }},
      {"lr0", [](R& c, const std::string& v, const fs::path&) { c.train.lr0 = to_double("lr0", v); },
       [](const R& c) { return fmt(c.train.lr0); }},
      {"decay_factor",
       [](R& c, const std::string& v, const fs::path&) { c.train.decay_factor = to_double("decay_factor", v); },
       [](const R& c) { return fmt(c.train.decay_factor); }},
      {"decay_every",
       [](R& c, const std::string& v, const fs::path&) { c.train.decay_every = to_size("decay_every", v); },
       [](const R& c) { return std::to_string(c.train.decay_every); }},
      {"max_epochs", [](R& c, const std::string& v, const fs::path&) { c.train.max_epochs = to_size("max_epochs", v); },
       [](const R& c) { return std::to_string(c.train.max_epochs); }},
      {"patience", [](R& c, const std::string& v, const fs::path&) { c.train.patience = to_size("patience", v); },
       [](const R& c) { return std::to_string(c.train.patience); }},
      {"beta1", [](R& c, const std::string& v, const fs::path&) { c.train.adam.beta1 = to_double("beta1", v); },
       [](const R& c) { return fmt(c.train.adam.beta1); }},
      {"beta2", [](R& c, const std::string& v, const fs::path&) { c.train.adam.beta2 = to_double("beta2", v); },
       [](const R& c) { return fmt(c.train.adam.beta2); }},
      {"adam_eps", [](R& c, const std::string& v, const fs::path&) { c.train.adam.eps = to_double("adam_eps", v); },
       [](const R& c) { return fmt(c.train.adam.eps); }},
      {"active_classes",
       [](R& c, const std::string& v, const fs::path&) { c.train.active_classes = eval::parse_active_classes(v); },
       [](const R& c) { return eval::format_active_classes(c.train.active_classes); }},
      {"clip_norm", [](R& c, const std::string& v, const fs::path&) { c.train.clip_norm = to_double("clip_norm", v); },
       [](const R& c) { return fmt(c.train.clip_norm); }},
      {"freeze_embeddings",
       [](R& c, const std::string& v, const fs::path&) {
         c.train.freeze_embeddings = to_bool("freeze_embeddings", v);
       },
       [](const R& c) { return std::string(c.train.freeze_embeddings ? "true" : "false"); }},
      {"stop_metric",
       [](R& c, const std::string& v, const fs::path&) {
         if (v == "wa")
           c.train.stop_metric = train::StopMetric::WA;
         else if (v == "uwa")
           c.train.stop_metric = train::StopMetric::UWA;
         else
           throw ConfigError("stop_metric: expected wa or uwa, got '" + v + "'");
       },
       [](const R& c) { return std::string(c.train.stop_metric == train::StopMetric::WA ? "wa" : "uwa"); }},
      {"record_timing",
       [](R& c, const std::string& v, const fs::path&) { c.train.record_timing = to_bool("record_timing", v); },
       [](const R& c) { return std::string(c.train.record_timing ? "true" : "false"); }},
      {"dropout", [](R& c, const std::string& v, const fs::path&) { c.model.dropout = to_double("dropout", v); },
       [](const R& c) { return fmt(c.model.dropout); }},
      {"max_tokens", [](R& c, const std::string& v, const fs::path&) { c.model.max_tokens = to_size("max_tokens", v); },
       [](const R& c) { return std::to_string(c.model.max_tokens); }},
      {"word_dim", [](R& c, const std::string& v, const fs::path&) { c.model.word_dim = to_size("word_dim", v); },
       [](const R& c) { return std::to_string(c.model.word_dim); }},
      {"context_dim",
       [](R& c, const std::string& v, const fs::path&) { c.model.context_dim = to_size("context_dim", v); },
       [](const R& c) { return std::to_string(c.model.context_dim); }},
      {"utterance_feature_dim",
       [](R& c, const std::string& v, const fs::path&) {
         c.model.utterance_feature_dim = to_size("utterance_feature_dim", v);
       },
       [](const R& c) { return std::to_string(c.model.utterance_feature_dim); }},
      {"hidden_dim", [](R& c, const std::string& v, const fs::path&) { c.model.hidden_dim = to_size("hidden_dim", v); },
       [](const R& c) { return std::to_string(c.model.hidden_dim); }},
      {"encoding_dim",
       [](R& c, const std::string& v, const fs::path&) { c.model.encoding_dim = to_size("encoding_dim", v); },
       [](const R& c) { return std::to_string(c.model.encoding_dim); }},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

// Keys that do not influence results; left out of the hash and of the copy
// stored in checkpoints so that reruns into another directory match.
bool affects_results(const std::string& key) { return key != "output_dir" && key != "log_level"; }

std::string env_name(const std::string& key) {
  std::string name = "CAD_";
  for (char ch : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  return name;
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

RunConfig RunConfig::parse(const std::string& text, const fs::path& base_dir, const EnvLookup& env) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(std::string_view(body).substr(0, eq)), value = trim(std::string_view(body).substr(eq + 1));
    const Field* f = find_field(key);
    if (!f) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    f->set(c, value, base_dir);
  }
  if (env) {
    for (const Field& f : fields())
      if (auto v = env(env_name(f.key))) f.set(c, trim(*v), fs::current_path());
  }
  if (c.corpus.empty()) throw ConfigError("corpus is not set");
  if (c.output_dir.empty()) throw ConfigError("output_dir is not set");
  c.model.validate();
  c.train.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  fs::path base = fs::absolute(path).parent_path();
  return parse(text, base, process_env);
}

void RunConfig::validate_paths() const {
  auto need = [](const fs::path& p, const char* what) {
    if (!p.empty() && !fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  need(corpus, "corpus");
  need(word_vectors, "word_vectors");
  need(features, "features");
  if (fs::exists(output_dir) && !fs::is_directory(output_dir))
    throw ConfigError("output_dir is not a directory: " + output_dir.string());
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::string identity;
  for (const Field& f : fields())
    if (affects_results(f.key)) identity += f.key + " = " + f.get(*this) + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(identity)));
  return buf;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const Field& f : fields())
    if (affects_results(f.key)) j[f.key] = f.get(*this);
  j["config_hash"] = hash();
  return j;
}

}  // namespace cad::cli
