#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "deepck/classifier.hpp"

namespace deepck {

/// A trained classifier restored from a model directory: exactly one of the two is set.
struct LoadedModel {
  std::string mode;  // "context" or "baseline"
  std::optional<ContextClassifier> context;
  std::optional<BaselineClassifier> baseline;
};

namespace detail {

inline nlohmann::json descriptor_json(const lm::BackendDescriptor& d) {
  return {{"name", d.name},
          {"vocab_size", d.vocab_size},
          {"hidden_dim", d.hidden_dim},
          {"context_window", d.context_window},
          {"supports_encoding", d.supports_encoding},
          {"supports_training", d.supports_training}};
}

inline void write_model_dir(const std::filesystem::path& dir, const std::string& mode, const ClassifierConfig& config,
                            const nn::EncoderBackend& encoder, const nn::ParamList& params) {
  std::filesystem::create_directories(dir);
  const nlohmann::json manifest{{"format", "deepck-model-1"},
                                {"mode", mode},
                                {"encoder", "transformer"},
                                {"backend", descriptor_json(encoder.descriptor())},
                                {"config", config},
                                {"seed", config.seed}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  std::ofstream vocab(dir / "vocab.txt");
  encoder.vocabulary().save(vocab);
  std::ofstream bin(dir / "params.bin", std::ios::binary);
  nn::save_params(bin, params);
  if (!bin) throw Error("could not write " + (dir / "params.bin").string());
}

}  // namespace detail

inline void save_model(const std::filesystem::path& dir, const ContextClassifier& model) {
  detail::write_model_dir(dir, "context", model.config(), model.encoder(), model.parameters());
}

inline void save_model(const std::filesystem::path& dir, const BaselineClassifier& model) {
  detail::write_model_dir(dir, "baseline", model.config(), model.encoder(), model.parameters());
}

inline LoadedModel load_model(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ParseError(0, "missing " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("model manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "deepck-model-1") throw ParseError(0, "unknown model format");
  if (manifest.value("encoder", "") != "transformer") throw ParseError(0, "unsupported encoder type");
  ClassifierConfig config;
  try {
    config = manifest.at("config").get<ClassifierConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("model config: ") + e.what());
  }
  std::ifstream vf(dir / "vocab.txt");
  if (!vf) throw ParseError(0, "missing " + (dir / "vocab.txt").string());
  const auto vocab = lm::Vocabulary::load(vf);
  auto encoder = std::make_shared<nn::TransformerEncoder>(vocab, config.encoder_shape(), config.seed);
  if (encoder->descriptor().vocab_size != manifest.at("backend").at("vocab_size").get<std::size_t>())
    throw ParseError(0, "vocabulary does not match model manifest");

  LoadedModel out;
  out.mode = manifest.at("mode").get<std::string>();
  nn::ParamList params;
  if (out.mode == "context") {
    out.context.emplace(encoder, config);
    params = out.context->parameters();
  } else if (out.mode == "baseline") {
    out.baseline.emplace(encoder, config);
    params = out.baseline->parameters();
  } else {
    throw ParseError(0, "unknown model mode '" + out.mode + "'");
  }
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw ParseError(0, "missing " + (dir / "params.bin").string());
  nn::load_params(bin, params);
  return out;
}

}  // namespace deepck
