#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>

#include "gridcity/config.hpp"
#include "gridcity/providers.hpp"

namespace gridcity {

// Live clients speak a small JSON-over-HTTP protocol. Each channel POSTs
//
//   {"task": ..., "model": ..., "template_id": ..., "prompt": ..., "images": [<base64 png>...]}
//
// to its endpoint, with "Authorization: Bearer $<credential_env>" when set,
// and expects one of
//
//   chat / judge       {"text": "..."}
//   image_generate     {"image_b64": "..."}
//   image_edit         {"image_b64": "..."}
//   image_to_mesh      {"mesh_b64": "...", "bbox": [dx, dy, dz]}
//   embed              {"embedding": [...]}
//
// 408, 429, 5xx and connection errors are transient.

std::shared_ptr<ChatModel> make_http_chat(const ProviderConfig& cfg, std::string task);
std::shared_ptr<ImageGenerator> make_http_image_generator(const ProviderConfig& cfg);
std::shared_ptr<ImageEditor> make_http_image_editor(const ProviderConfig& cfg);
std::shared_ptr<MeshLifter> make_http_mesh_lifter(const ProviderConfig& cfg);
std::shared_ptr<TextEmbedder> make_http_embedder(const ProviderConfig& cfg);

std::string base64_encode(const Bytes& data);
Bytes base64_decode(const std::string& text);

struct ProviderOptions {
  bool mock = false;
  std::uint64_t seed = 0;
  /// Scripted chat replies (`<dir>/<template_id>/*.txt`) layered over the mock.
  std::optional<std::filesystem::path> fixtures;
};

/// Live clients for every channel with a configured endpoint; the offline
/// mocks for the rest, or for everything when options.mock is set.
ProviderSet build_providers(const EngineConfig& cfg, const ProviderOptions& options);

}  // namespace gridcity
