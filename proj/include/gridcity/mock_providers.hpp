#pragma once

// Deterministic offline stand-ins for every model service. With a fixed seed
// each mock is a pure function of its inputs.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcity/core.hpp"
#include "gridcity/image.hpp"
#include "gridcity/mesh.hpp"
#include "gridcity/providers.hpp"

namespace gridcity {

inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

/// Unit-norm vector drawn from a seeded hash of the text.
class HashEmbedder : public TextEmbedder {
 public:
  explicit HashEmbedder(std::uint64_t seed = 0, std::size_t dim = 64) : seed_(seed), dim_(dim) {}

  EmbeddingVector embed(const std::string& text) override {
    std::uint64_t state = fnv1a64(text, seed_);
    EmbeddingVector v;
    v.values.resize(dim_);
    double norm2 = 0;
    for (auto& x : v.values) {
      x = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
      norm2 += x * x;
    }
    const double norm = std::sqrt(norm2);
    for (auto& x : v.values) x /= norm;
    return v;
  }

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Answers every model role with plausible, schema-valid output derived from
/// a seeded hash of the request variables. Enough to run the whole pipeline
/// offline.
class MockChat : public ChatModel {
 public:
  explicit MockChat(std::uint64_t seed = 0) : seed_(seed) {}

  std::string complete(const ModelRequest& req) override {
    const auto& id = req.template_id;
    if (id == tmpl::kGlobalPlanner) return plan(req.variables);
    if (id == tmpl::kLocalDesigner) return design(req.variables);
    if (id == tmpl::kEvaluateImage) return evaluate(req.variables);
    if (id == tmpl::kExpansion) return expand(req.variables);
    if (id == tmpl::kJudgeVisual)
      return (hash(var(req.variables, "city_instruction") + "|" + var(req.variables, "dimension")) & 1) ? "B" : "A";
    if (id == tmpl::kAlignmentQuery) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.4f", 0.5 + static_cast<double>(hash(req.prompt) % 5000) / 10000.0);
      return buf;
    }
    if (id == tmpl::kReferenceDistill) {
      std::string docs = var(req.variables, "documents");
      return "Reference traits of " + var(req.variables, "reference_city") +
             ": a dense mixed-use core ringed by residential districts, with industry at the edges. " +
             docs.substr(0, std::min<std::size_t>(docs.size(), 400));
    }
    throw ProviderError("mock chat has no behaviour for template '" + id + "'");
  }

 private:
  static std::string var(const Variables& vars, const std::string& key) {
    auto it = vars.find(key);
    return it == vars.end() ? std::string{} : it->second;
  }

  std::uint64_t hash(std::string_view s) const { return fnv1a64(s, seed_); }

  std::string plan(const Variables& vars) const {
    GridSize size{2, 3};
    if (auto forced = var(vars, "grid_size"); !forced.empty()) size = parse_grid_size(forced);
    static const std::vector<std::pair<std::string, std::string>> kinds = {
        {"Central Business District", "Glass office towers and mid-rise commercial blocks around a central avenue."},
        {"Urban Residential District", "Mid-rise apartment blocks with internal courtyards on an orderly street grid."},
        {"Commercial Center", "Shopping arcades, multi-story malls and cafes along wide pedestrian streets."},
        {"Cultural Plaza", "A museum, a theater and a library framing a paved plaza with fountains."},
        {"Industrial Park", "Low-rise warehouses and workshops with loading yards at the city edge."},
        {"Green Park", "A landscaped park with paths and pavilions surrounded by office and residential blocks."}};
    const int cells = size.rows * size.cols;
    const std::string prompt = var(vars, "city_instruction");
    const int n = std::min<int>(cells, 2 + static_cast<int>(hash(prompt) % 3));
    const std::size_t offset = hash(prompt + "#offset") % kinds.size();
    nlohmann::ordered_json areas = nlohmann::ordered_json::object();
    int next = 1;
    for (int k = 0; k < n; ++k) {
      int count = cells / n + (k < cells % n ? 1 : 0);
      std::vector<int> indices;
      for (int i = 0; i < count; ++i) indices.push_back(next++);
      const auto& [name, desc] = kinds[(offset + static_cast<std::size_t>(k)) % kinds.size()];
      areas[name] = {{"Description", desc}, {"Grid Index", indices}};
    }
    nlohmann::ordered_json out = {{"Grid Size", std::to_string(size.rows) + " X " + std::to_string(size.cols)},
                                  {"Areas", areas}};
    return "```json\n" + out.dump(4) + "\n```";
  }

  std::string design(const Variables& vars) const {
    auto area = nlohmann::json::parse(var(vars, "area_json"));
    const std::string name = area.value("Area Name", std::string("Area"));
    const std::string desc = area.value("Description", std::string{});
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& idx : area.at("Grid Index")) {
      const int i = idx.get<int>();
      static const char* forms[] = {"mid-rise", "high-rise", "low-rise", "tower-like"};
      static const char* materials[] = {"glass and steel", "pale concrete", "brick and stone", "terracotta panels"};
      const auto h = hash(name + "#" + std::to_string(i));
      out[std::to_string(i)] = "Grid " + std::to_string(i) + " of the " + name + ": " + forms[h % 4] +
                               " buildings with " + materials[(h >> 8) % 4] + " facades arranged in compact blocks. " +
                               desc;
    }
    return out.dump(2);
  }

  std::string evaluate(const Variables& vars) const {
    const std::string prompt = var(vars, "grid_description");
    const int score = 5 + static_cast<int>(hash(prompt) % 5);
    std::string rewrite = score >= 6 ? prompt : prompt + " Keep five to six distinct buildings, evenly spaced.";
    return "Score: " + std::to_string(score) + "\nReason: mock review\nRewrite: " + rewrite + "\n";
  }

  std::string expand(const Variables& vars) const {
    std::string request = var(vars, "expansion_preference");
    std::vector<std::string> zones;
    if (auto names = var(vars, "zone_names"); !names.empty()) zones = nlohmann::json::parse(names).get<std::vector<std::string>>();
    static const char* relations[] = {"near", "relatively_near", "slightly_near", "far", ""};
    nlohmann::ordered_json rel = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < zones.size(); ++i) {
      const char* r = i == 0 ? "near" : relations[hash(request + "|" + zones[i]) % 5];
      if (*r) rel[zones[i]] = r;
    }
    std::string name = request.empty() ? std::string("New Block") : request;
    if (name.size() > 48) name.resize(48);
    nlohmann::ordered_json out = {
        {"block_name", name + " Block"},
        {"block_description", "A new grid block for " + request +
                                  ": five to six mid-rise buildings arranged around a central courtyard, with facades "
                                  "that continue the material palette of the adjacent districts."},
        {"spatial_relations", rel}};
    return out.dump(4);
  }

  std::uint64_t seed_;
};

/// One scripted reply, or an injected failure.
struct ScriptedReply {
  enum class Kind { kText, kTransientFailure, kPermanentFailure };
  Kind kind = Kind::kText;
  std::string text;
};

/// Returns pre-recorded replies in order, per template id. Once a template's
/// script runs out the fallback model answers (or the call fails).
///
/// Fixture directory format: `<dir>/<template_id>/<name>.txt`, consumed in
/// filename order. A file whose name ends in `.transient` or `.fail` (instead
/// of `.txt`) injects a transient or permanent provider failure.
class ScriptedChat : public ChatModel {
 public:
  explicit ScriptedChat(std::shared_ptr<ChatModel> fallback = nullptr) : fallback_(std::move(fallback)) {}

  static std::shared_ptr<ScriptedChat> from_directory(const std::filesystem::path& dir,
                                                      std::shared_ptr<ChatModel> fallback = nullptr) {
    auto chat = std::make_shared<ScriptedChat>(std::move(fallback));
    for (const auto& sub : std::filesystem::directory_iterator(dir)) {
      if (!sub.is_directory()) continue;
      std::vector<std::filesystem::path> files;
      for (const auto& f : std::filesystem::directory_iterator(sub.path()))
        if (f.is_regular_file()) files.push_back(f.path());
      std::sort(files.begin(), files.end());
      const std::string id = sub.path().filename().string();
      for (const auto& f : files) {
        const auto ext = f.extension().string();
        if (ext == ".transient") {
          chat->push_failure(id, true);
        } else if (ext == ".fail") {
          chat->push_failure(id, false);
        } else if (ext == ".txt") {
          std::ifstream in(f, std::ios::binary);
          std::stringstream ss;
          ss << in.rdbuf();
          chat->push(id, ss.str());
        }
      }
    }
    return chat;
  }

  void push(const std::string& template_id, std::string text) {
    std::lock_guard lock(mutex_);
    script_[template_id].push_back({ScriptedReply::Kind::kText, std::move(text)});
  }

  void push_failure(const std::string& template_id, bool transient) {
    std::lock_guard lock(mutex_);
    script_[template_id].push_back(
        {transient ? ScriptedReply::Kind::kTransientFailure : ScriptedReply::Kind::kPermanentFailure, {}});
  }

  std::string complete(const ModelRequest& req) override {
    ScriptedReply reply;
    {
      std::lock_guard lock(mutex_);
      calls_.push_back(req);
      auto& queue = script_[req.template_id];
      if (queue.empty()) {
        if (!fallback_) throw ProviderError("no scripted reply left for template '" + req.template_id + "'");
        reply.kind = ScriptedReply::Kind::kText;
        reply.text.clear();
      } else {
        reply = std::move(queue.front());
        queue.pop_front();
        if (reply.kind == ScriptedReply::Kind::kText) return reply.text;
      }
    }
    switch (reply.kind) {
      case ScriptedReply::Kind::kTransientFailure:
        throw TransientProviderError("scripted transient failure for '" + req.template_id + "'");
      case ScriptedReply::Kind::kPermanentFailure:
        throw ProviderError("scripted failure for '" + req.template_id + "'");
      default:
        return fallback_->complete(req);
    }
  }

  std::vector<ModelRequest> calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

  int call_count(std::string_view template_id) const {
    std::lock_guard lock(mutex_);
    return static_cast<int>(std::count_if(calls_.begin(), calls_.end(),
                                          [&](const ModelRequest& r) { return r.template_id == template_id; }));
  }

 private:
  std::shared_ptr<ChatModel> fallback_;
  mutable std::mutex mutex_;
  std::map<std::string, std::deque<ScriptedReply>> script_;
  std::vector<ModelRequest> calls_;
};

/// Two-tone checkerboard whose colours come from a hash of the generation
/// instruction. Tagged with that hash.
class MockImageGenerator : public ImageGenerator {
 public:
  explicit MockImageGenerator(std::uint64_t seed = 0, int size = 32) : seed_(seed), size_(size) {}

  Image generate(const ModelRequest& req) override {
    auto it = req.variables.find("grid_description");
    const std::string key = it == req.variables.end() ? req.prompt : it->second;
    std::uint64_t state = fnv1a64(key, seed_);
    const std::uint64_t a = splitmix64(state), b = splitmix64(state);
    Raster r(size_, size_);
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        const std::uint64_t c = ((x / 4 + y / 4) % 2) ? a : b;
        auto* p = r.at(x, y);
        p[0] = static_cast<std::uint8_t>(c);
        p[1] = static_cast<std::uint8_t>(c >> 8);
        p[2] = static_cast<std::uint8_t>(c >> 16);
        p[3] = 255;
      }
    }
    Image img = encode_png(r);
    img = with_text_tag(img, "gridcity:stage", "produced");
    return with_text_tag(img, "gridcity:prompt-hash", hex64(fnv1a64(key, seed_)));
  }

 private:
  std::uint64_t seed_;
  int size_;
};

/// Paints a white border (the "removed platform") and tags the result as refined.
class MockImageEditor : public ImageEditor {
 public:
  Image edit(const ModelRequest& req) override {
    if (req.images.empty()) throw ProviderError("image edit request without an image");
    Raster r = decode_png(req.images.front());
    const int border = std::max(1, r.width / 8);
    for (int y = 0; y < r.height; ++y)
      for (int x = 0; x < r.width; ++x)
        if (x < border || y < border || x >= r.width - border || y >= r.height - border) {
          auto* p = r.at(x, y);
          p[0] = p[1] = p[2] = p[3] = 255;
        }
    Image img = encode_png(r);
    if (auto h = text_tag(req.images.front(), "gridcity:prompt-hash")) img = with_text_tag(img, "gridcity:prompt-hash", *h);
    return with_text_tag(img, "gridcity:stage", "refined");
  }
};

/// Returns a box mesh of a fixed size (unit cube by default).
class MockMeshLifter : public MeshLifter {
 public:
  explicit MockMeshLifter(BoundingBox box = {1.0, 1.0, 1.0}) : box_(box) {}

  MeshAsset lift(const Image& image) override {
    if (image.empty()) throw ProviderError("image-to-3D request without an image");
    if (box_.degenerate()) return MeshAsset{{}, box_};
    return MeshAsset{make_box_glb(box_), box_};
  }

 private:
  BoundingBox box_;
};

/// Channel configuration for offline runs: no backoff delay.
inline std::map<std::string, ProviderConfig> mock_channel_configs(int max_concurrency = 2) {
  std::map<std::string, ProviderConfig> out;
  for (const char* name : {channel::kChat, channel::kJudge, channel::kImageGenerate, channel::kImageEdit,
                           channel::kImageToMesh, channel::kEmbed}) {
    ProviderConfig cfg;
    cfg.endpoint = "mock://";
    cfg.backoff_base_s = 0.0;
    cfg.max_concurrency = max_concurrency;
    out[name] = cfg;
  }
  return out;
}

/// A complete offline provider set. `chat` may be replaced by a ScriptedChat
/// that falls back to MockChat.
inline ProviderSet make_mock_providers(std::uint64_t seed = 0, std::shared_ptr<ChatModel> chat = nullptr) {
  ProviderSet set;
  set.chat = chat ? std::move(chat) : std::make_shared<MockChat>(seed);
  set.image_generator = std::make_shared<MockImageGenerator>(seed);
  set.image_editor = std::make_shared<MockImageEditor>();
  set.mesh_lifter = std::make_shared<MockMeshLifter>();
  set.embedder = std::make_shared<HashEmbedder>(seed);
  set.configs = mock_channel_configs();
  return set;
}

}  // namespace gridcity
