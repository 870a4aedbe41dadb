#include "convcl/model.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "convcl/errors.hpp"

namespace convcl {

using ordered_json = nlohmann::ordered_json;

ConversationModel::ConversationModel(const EncoderConfig& config, Vocab vocab)
    : config_(config),
      vocab_(std::move(vocab)),
      encoder_(config_, vocab_, params_),
      scorer_(BilinearScorer::create(params_, config_.state_hidden, config_.utterance_dim())) {}

void ConversationModel::initialize(std::uint64_t seed) {
  Rng rng(seed);
  encoder_.initialize(params_, rng);
  scorer_.initialize(params_, rng);
}

namespace {

constexpr std::string_view kFormat = "convcl-checkpoint";
constexpr int kVersion = 1;

ordered_json encoder_config_to_json(const EncoderConfig& c) {
  return {{"char_dim", c.char_dim},
          {"word_dim", c.word_dim},
          {"char_hidden", c.char_hidden},
          {"utterance_hidden", c.utterance_hidden},
          {"state_hidden", c.state_hidden},
          {"max_utterance_tokens", c.max_utterance_tokens},
          {"embedding_init_bound", c.embedding_init_bound}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.char_dim = j.at("char_dim");
  c.word_dim = j.at("word_dim");
  c.char_hidden = j.at("char_hidden");
  c.utterance_hidden = j.at("utterance_hidden");
  c.state_hidden = j.at("state_hidden");
  c.max_utterance_tokens = j.at("max_utterance_tokens");
  c.embedding_init_bound = j.at("embedding_init_bound");
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ConversationModel& model,
                     const CheckpointMeta& meta) {
  ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["fingerprint"] = meta.fingerprint;
  j["encoder"] = encoder_config_to_json(model.config());
  j["vocab"] = model.vocab().dump();
  ordered_json params = ordered_json::array();
  for (const auto& info : model.params().infos()) {
    const auto values = model.params().values(model.params().find(info.name));
    params.push_back({{"name", info.name},
                      {"shape", info.shape},
                      {"values", std::vector<double>(values.begin(), values.end())}});
  }
  j["params"] = std::move(params);
  const auto& cs = meta.consolidation;
  auto vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  j["consolidation"] = {{"mode", to_string(cs.config().mode)},
                        {"c", cs.config().c},
                        {"lambda", cs.config().decay},
                        {"zeta", cs.config().damping},
                        {"omega", vec(cs.omega())},
                        {"delta", vec(cs.delta())},
                        {"importance", vec(cs.importance())},
                        {"anchor", vec(cs.anchor())}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != kFormat || j.at("version") != kVersion) {
      throw ConfigError(path.string() + " is not a version-1 convcl checkpoint");
    }
    LoadedCheckpoint out;
    out.model = std::make_unique<ConversationModel>(encoder_config_from_json(j.at("encoder")),
                                                    Vocab::parse(j.at("vocab").get<std::string>()));
    ParamStore& store = out.model->params();
    for (const auto& p : j.at("params")) {
      const std::string name = p.at("name");
      const ParamId id = store.find(name);
      if (id.index >= store.num_params()) throw ConfigError("checkpoint parameter '" + name + "' unknown");
      const auto values = p.at("values").get<std::vector<double>>();
      if (p.at("shape").get<Shape>() != store.info(id).shape || values.size() != store.info(id).size) {
        throw AlignmentError("checkpoint parameter '" + name + "' has the wrong shape");
      }
      std::copy(values.begin(), values.end(), store.values(id).begin());
    }
    out.meta.fingerprint = j.at("fingerprint");
    const auto& c = j.at("consolidation");
    ConsolidationConfig cfg;
    cfg.mode = parse_consolidation_mode(c.at("mode").get<std::string>());
    cfg.c = c.at("c");
    cfg.decay = c.at("lambda");
    cfg.damping = c.at("zeta");
    out.meta.consolidation = ConsolidationState(cfg, store.size());
    out.meta.consolidation.restore(c.at("omega"), c.at("delta"), c.at("importance"), c.at("anchor"));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace convcl
