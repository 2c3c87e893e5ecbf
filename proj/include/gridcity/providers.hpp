#pragma once

// Uniform interfaces to external model services, the retry policy wrapped
// around every call, and ModelHub: the single entry point the rest of the
// engine uses to reach a model.

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "gridcity/errors.hpp"
#include "gridcity/image.hpp"
#include "gridcity/mesh.hpp"
#include "gridcity/templates.hpp"

namespace gridcity {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const { return std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0)); }
};

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw EmbeddingError("embedding dimensions differ");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw EmbeddingError("zero-norm embedding");
  return std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0) / (na * nb);
}

/// One logical request to a model. `prompt` is the rendered template;
/// `template_id` and `variables` travel along so mocks can key on them.
struct ModelRequest {
  std::string template_id;
  Variables variables;
  std::string prompt;
  std::vector<Image> images;
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual std::string complete(const ModelRequest& request) = 0;
};

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual Image generate(const ModelRequest& request) = 0;
};

/// `request.images.front()` is the image to edit.
class ImageEditor {
 public:
  virtual ~ImageEditor() = default;
  virtual Image edit(const ModelRequest& request) = 0;
};

class MeshLifter {
 public:
  virtual ~MeshLifter() = default;
  virtual MeshAsset lift(const Image& image) = 0;
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual EmbeddingVector embed(const std::string& text) = 0;
};

struct ProviderConfig {
  std::string endpoint;
  std::string credential_env;
  std::string model;
  double timeout_s = 120.0;
  int max_retries = 2;
  double backoff_base_s = 1.0;
  int max_concurrency = 2;

  void validate() const {
    if (max_retries < 0) throw Error("provider max_retries must be >= 0");
    if (!(timeout_s > 0)) throw Error("provider timeout must be > 0");
    if (max_concurrency < 1) throw Error("provider max_concurrency must be >= 1");
    if (backoff_base_s < 0) throw Error("provider backoff base must be >= 0");
  }
};

/// Runs `call` until it succeeds, retrying TransientProviderError with
/// exponential backoff (base * 2^k seconds). At most max_retries + 1 attempts.
/// `attempts` receives the number of attempts made.
template <class F>
auto call_with_retry(const ProviderConfig& cfg, F&& call, int& attempts) -> decltype(call()) {
  attempts = 0;
  for (;;) {
    ++attempts;
    try {
      return call();
    } catch (const TransientProviderError& e) {
      if (attempts > cfg.max_retries)
        throw ProviderError(std::string(e.what()) + " (gave up after " + std::to_string(attempts) + " attempts)",
                            attempts);
      const double delay = cfg.backoff_base_s * std::pow(2.0, attempts - 1);
      if (delay > 0) std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    } catch (const ProviderError& e) {
      throw ProviderError(e.what(), attempts);
    }
  }
}

/// Call counters for one provider channel.
struct ChannelStats {
  int calls = 0;
  int attempts = 0;
  int failures = 0;
  int last_attempts = 0;
};

/// The set of model services plus per-channel configuration.
struct ProviderSet {
  std::shared_ptr<ChatModel> chat;
  std::shared_ptr<ChatModel> judge;  // falls back to `chat`
  std::shared_ptr<ImageGenerator> image_generator;
  std::shared_ptr<ImageEditor> image_editor;
  std::shared_ptr<MeshLifter> mesh_lifter;
  std::shared_ptr<TextEmbedder> embedder;
  std::map<std::string, ProviderConfig> configs;  // keyed by channel name
};

namespace channel {
inline constexpr const char* kChat = "chat";
inline constexpr const char* kJudge = "judge";
inline constexpr const char* kImageGenerate = "image_generate";
inline constexpr const char* kImageEdit = "image_edit";
inline constexpr const char* kImageToMesh = "image_to_mesh";
inline constexpr const char* kEmbed = "embed";
}  // namespace channel

/// Thread-safe facade over a ProviderSet: renders templates, applies the
/// retry policy and the per-channel concurrency cap, caches embeddings and
/// counts calls.
class ModelHub {
 public:
  ModelHub(ProviderSet providers, TemplateStore templates = {})
      : providers_(std::move(providers)), templates_(std::move(templates)) {
    if (!providers_.judge) providers_.judge = providers_.chat;
    for (const char* name : {channel::kChat, channel::kJudge, channel::kImageGenerate, channel::kImageEdit,
                             channel::kImageToMesh, channel::kEmbed}) {
      const ProviderConfig& cfg = providers_.configs[name];
      cfg.validate();
      gates_.emplace(name, std::make_unique<std::counting_semaphore<1024>>(cfg.max_concurrency));
    }
  }

  const TemplateStore& templates() const { return templates_; }

  std::string chat(std::string_view template_id, const Variables& vars, std::vector<Image> images = {}) {
    auto req = make_request(template_id, vars, std::move(images));
    return run(channel::kChat, [&] { return require(providers_.chat, "chat")->complete(req); });
  }

  std::string judge(std::string_view template_id, const Variables& vars, std::vector<Image> images) {
    auto req = make_request(template_id, vars, std::move(images));
    return run(channel::kJudge, [&] { return require(providers_.judge, "judge")->complete(req); });
  }

  Image generate_image(std::string_view template_id, const Variables& vars) {
    auto req = make_request(template_id, vars, {});
    return run(channel::kImageGenerate, [&] {
      Image img = require(providers_.image_generator, "image generation")->generate(req);
      if (img.empty()) throw ProviderError("image generator returned no image");
      return img;
    });
  }

  Image edit_image(std::string_view template_id, const Variables& vars, const Image& input) {
    if (input.empty()) throw Error("cannot edit an empty image");
    auto req = make_request(template_id, vars, {input});
    return run(channel::kImageEdit, [&] {
      Image img = require(providers_.image_editor, "image editing")->edit(req);
      if (img.empty()) throw ProviderError("image editor returned no image");
      return img;
    });
  }

  MeshAsset image_to_mesh(const Image& image) {
    if (image.empty()) throw Error("cannot lift an empty image");
    return run(channel::kImageToMesh, [&] { return require(providers_.mesh_lifter, "image-to-3D")->lift(image); });
  }

  /// Embeddings are cached per text for the hub's lifetime.
  EmbeddingVector embed(const std::string& text) {
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = embedding_cache_.find(text); it != embedding_cache_.end()) return it->second;
    }
    EmbeddingVector v = run(channel::kEmbed, [&] { return require(providers_.embedder, "embedding")->embed(text); });
    if (v.dim() == 0 || v.norm() == 0.0) throw EmbeddingError("provider returned a zero-norm embedding");
    std::lock_guard lock(cache_mutex_);
    if (embedding_dim_ == 0) embedding_dim_ = v.dim();
    if (v.dim() != embedding_dim_) throw EmbeddingError("embedding dimension changed within a run");
    return embedding_cache_.emplace(text, std::move(v)).first->second;
  }

  ChannelStats stats(const std::string& name) const {
    std::lock_guard lock(stats_mutex_);
    auto it = stats_.find(name);
    return it == stats_.end() ? ChannelStats{} : it->second;
  }

 private:
  template <class P>
  static P* require(const std::shared_ptr<P>& p, const char* what) {
    if (!p) throw ProviderError(std::string("no ") + what + " provider configured");
    return p.get();
  }

  ModelRequest make_request(std::string_view template_id, const Variables& vars, std::vector<Image> images) const {
    ModelRequest req;
    req.template_id = std::string(template_id);
    req.variables = vars;
    req.prompt = templates_.render(template_id, vars);
    req.images = std::move(images);
    return req;
  }

  template <class F>
  auto run(const char* name, F&& call) -> decltype(call()) {
    const ProviderConfig& cfg = providers_.configs.at(name);
    auto& gate = *gates_.at(name);
    int attempts = 0;
    auto record = [&](bool ok) {
      std::lock_guard lock(stats_mutex_);
      auto& s = stats_[name];
      ++s.calls;
      s.attempts += attempts;
      s.last_attempts = attempts;
      if (!ok) ++s.failures;
    };
    try {
      auto result = call_with_retry(
          cfg,
          [&] {
            gate.acquire();
            struct Release {
              std::counting_semaphore<1024>& g;
              ~Release() { g.release(); }
            } release{gate};
            return call();
          },
          attempts);
      record(true);
      return result;
    } catch (...) {
      record(false);
      throw;
    }
  }

  ProviderSet providers_;
  TemplateStore templates_;
  std::map<std::string, std::unique_ptr<std::counting_semaphore<1024>>> gates_;
  mutable std::mutex stats_mutex_;
  std::map<std::string, ChannelStats> stats_;
  std::mutex cache_mutex_;
  std::map<std::string, EmbeddingVector> embedding_cache_;
  std::size_t embedding_dim_ = 0;
};

}  // namespace gridcity
