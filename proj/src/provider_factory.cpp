#include "gridcity/mock_providers.hpp"
#include "gridcity/service/providers_factory.hpp"

namespace gridcity {

namespace {

bool has_endpoint(const EngineConfig& cfg, const char* channel) {
  auto it = cfg.providers.find(channel);
  return it != cfg.providers.end() && !it->second.endpoint.empty() && it->second.endpoint.rfind("mock", 0) != 0;
}

}  // namespace

ProviderSet build_providers(const EngineConfig& cfg, const ProviderOptions& options) {
  std::shared_ptr<ChatModel> chat;
  if (options.fixtures) chat = ScriptedChat::from_directory(*options.fixtures, std::make_shared<MockChat>(options.seed));
  ProviderSet set = make_mock_providers(options.seed, chat);
  for (const auto& [name, pc] : cfg.providers) set.configs[name] = pc;
  if (options.mock) {
    for (auto& [name, pc] : set.configs) pc.backoff_base_s = 0.0;
    return set;
  }
  if (has_endpoint(cfg, channel::kChat) && !options.fixtures) set.chat = make_http_chat(cfg.providers.at(channel::kChat), "chat");
  if (has_endpoint(cfg, channel::kJudge)) set.judge = make_http_chat(cfg.providers.at(channel::kJudge), "judge");
  if (has_endpoint(cfg, channel::kImageGenerate))
    set.image_generator = make_http_image_generator(cfg.providers.at(channel::kImageGenerate));
  if (has_endpoint(cfg, channel::kImageEdit)) set.image_editor = make_http_image_editor(cfg.providers.at(channel::kImageEdit));
  if (has_endpoint(cfg, channel::kImageToMesh))
    set.mesh_lifter = make_http_mesh_lifter(cfg.providers.at(channel::kImageToMesh));
  if (has_endpoint(cfg, channel::kEmbed)) set.embedder = make_http_embedder(cfg.providers.at(channel::kEmbed));
  return set;
}

}  // namespace gridcity
