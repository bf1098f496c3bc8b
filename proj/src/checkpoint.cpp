// SPDX-License-Identifier: Apache-2.0
#include "cad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cad/errors.hpp"
#include "cad/rng.hpp"

namespace cad::model {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string canonical_config(const ModelConfig& c) {
  std::ostringstream out;
  out << "word_dim=" << c.word_dim << '\n'
      << "context_dim=" << c.context_dim << '\n'
      << "utterance_feature_dim=" << c.utterance_feature_dim << '\n'
      << "hidden_dim=" << c.hidden_dim << '\n'
      << "encoding_dim=" << c.encoding_dim << '\n'
      << "num_classes=" << c.num_classes << '\n'
      << "max_tokens=" << c.max_tokens << '\n'
      << "dropout=" << ordered_json(c.dropout).dump() << '\n';
  return out.str();
}

std::string config_hash(const ModelConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_config(c))));
  return buf;
}

fs::path blob_path(const fs::path& manifest) {
  fs::path p = manifest;
  p.replace_extension(".bin");
  return p;
}

namespace {

ordered_json config_json(const ModelConfig& c) {
  return ordered_json{{"word_dim", c.word_dim},
                      {"context_dim", c.context_dim},
                      {"utterance_feature_dim", c.utterance_feature_dim},
                      {"hidden_dim", c.hidden_dim},
                      {"encoding_dim", c.encoding_dim},
                      {"num_classes", c.num_classes},
                      {"max_tokens", c.max_tokens},
                      {"dropout", c.dropout}};
}

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig c;
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.context_dim = j.at("context_dim").get<std::size_t>();
  c.utterance_feature_dim = j.at("utterance_feature_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.encoding_dim = j.at("encoding_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.max_tokens = j.at("max_tokens").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_checkpoint(const fs::path& manifest, const ModelParams& params, const embed::Vocabulary& vocab,
                     const ordered_json& run_config) {
  std::string blob;
  ordered_json tensors = ordered_json::array();
  for (const Parameter* p : params.parameters()) {
    const Tensor& t = p->value();
    tensors.push_back({{"name", p->name()}, {"shape", t.shape()}, {"offset", blob.size()}});
    for (double v : t.data()) put_le(blob, v);
  }
  ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = config_json(params.config);
  j["config_hash"] = config_hash(params.config);
  j["vocabulary"] = vocab.tokens();
  j["run_config"] = run_config;
  j["blob"] = blob_path(manifest).filename().string();
  j["blob_bytes"] = blob.size();
  j["tensors"] = std::move(tensors);
  write_bytes(blob_path(manifest), blob);
  write_bytes(manifest, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& manifest) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_bytes(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest.string() + ": malformed checkpoint manifest: " + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw VersionError(manifest.string() + ": checkpoint format " + std::to_string(version) + ", expected " +
                         std::to_string(kCheckpointFormatVersion));
    ModelConfig config = config_from_json(j.at("config"));
    const std::string stored = j.at("config_hash").get<std::string>();
    if (stored != config_hash(config))
      throw VersionError(manifest.string() + ": config hash " + stored + " does not match its config (" +
                         config_hash(config) + ")");
    config.validate();

    Checkpoint ck;
    ck.vocab = embed::Vocabulary::from_tokens(j.at("vocabulary").get<std::vector<std::string>>());
    ck.run_config = j.at("run_config");
    Rng scratch(0);
    ck.params = ModelParams::initialize(config, ck.vocab.size(), scratch);

    const std::string blob = read_bytes(manifest.parent_path() / j.at("blob").get<std::string>());
    if (blob.size() != j.at("blob_bytes").get<std::size_t>())
      throw DataError(manifest.string() + ": blob is " + std::to_string(blob.size()) + " bytes, manifest says " +
                      std::to_string(j.at("blob_bytes").get<std::size_t>()));
    const auto& table = j.at("tensors");
    auto params = ck.params.parameters();
    if (table.size() != params.size())
      throw VersionError(manifest.string() + ": " + std::to_string(table.size()) + " tensors, architecture has " +
                         std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter& p = *params[k];
      const auto& entry = table[k];
      if (entry.at("name").get<std::string>() != p.name() ||
          entry.at("shape").get<numkit::Shape>() != p.value().shape())
        throw VersionError(manifest.string() + ": tensor " + entry.at("name").get<std::string>() +
                           " does not match " + p.name() + " " + numkit::shape_str(p.value().shape()));
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = p.value().size();
      if (offset + 8 * n > blob.size()) throw DataError(manifest.string() + ": blob truncated at " + p.name());
      auto* src = reinterpret_cast<const unsigned char*>(blob.data() + offset);
      for (std::size_t i = 0; i < n; ++i) p.value()[i] = get_le(src + 8 * i);
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest.string() + ": invalid checkpoint manifest: " + e.what());
  }
}

}  // namespace cad::model
