#include <httplib.h>
#include <openssl/evp.h>

#include <cstdlib>

#include "gridcity/service/providers_factory.hpp"

namespace gridcity {

std::string base64_encode(const Bytes& data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(const std::string& text) {
  std::string clean;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) throw ProviderError("malformed base64 payload");
  Bytes out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) throw ProviderError("malformed base64 payload");
  std::size_t size = static_cast<std::size_t>(n);
  if (!clean.empty() && clean.back() == '=') --size;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') --size;
  out.resize(size);
  return out;
}

namespace {

class JsonEndpoint {
 public:
  explicit JsonEndpoint(ProviderConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw Error("endpoint '" + cfg_.endpoint + "' has no scheme");
    const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    base_ = cfg_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
  }

  nlohmann::json post(nlohmann::json body) const {
    body["model"] = cfg_.model;
    httplib::Client client(base_);
    client.set_connection_timeout(static_cast<time_t>(cfg_.timeout_s));
    client.set_read_timeout(static_cast<time_t>(cfg_.timeout_s));
    client.set_write_timeout(static_cast<time_t>(cfg_.timeout_s));
    httplib::Headers headers;
    if (!cfg_.credential_env.empty()) {
      const char* key = std::getenv(cfg_.credential_env.c_str());
      if (!key || !*key) throw ProviderError("credential variable " + cfg_.credential_env + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw TransientProviderError(cfg_.endpoint + ": " + httplib::to_string(res.error()));
    if (res->status == 408 || res->status == 429 || res->status >= 500)
      throw TransientProviderError(cfg_.endpoint + ": HTTP " + std::to_string(res->status));
    if (res->status < 200 || res->status >= 300)
      throw ProviderError(cfg_.endpoint + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw ProviderError(cfg_.endpoint + ": response is not JSON");
    }
  }

 private:
  ProviderConfig cfg_;
  std::string base_;
  std::string path_;
};

nlohmann::json request_body(const std::string& task, const ModelRequest& req) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& img : req.images) images.push_back(base64_encode(img.png));
  return {{"task", task}, {"template_id", req.template_id}, {"prompt", req.prompt}, {"images", images}};
}

template <class T>
T field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ProviderError(std::string("response lacks '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ProviderError(std::string("response field '") + key + "' has the wrong type");
  }
}

class HttpChat : public ChatModel {
 public:
  HttpChat(const ProviderConfig& cfg, std::string task) : ep_(cfg), task_(std::move(task)) {}
  std::string complete(const ModelRequest& req) override {
    return field<std::string>(ep_.post(request_body(task_, req)), "text");
  }

 private:
  JsonEndpoint ep_;
  std::string task_;
};

class HttpImageGenerator : public ImageGenerator {
 public:
  explicit HttpImageGenerator(const ProviderConfig& cfg) : ep_(cfg) {}
  Image generate(const ModelRequest& req) override {
    return Image{base64_decode(field<std::string>(ep_.post(request_body("image_generate", req)), "image_b64"))};
  }

 private:
  JsonEndpoint ep_;
};

class HttpImageEditor : public ImageEditor {
 public:
  explicit HttpImageEditor(const ProviderConfig& cfg) : ep_(cfg) {}
  Image edit(const ModelRequest& req) override {
    return Image{base64_decode(field<std::string>(ep_.post(request_body("image_edit", req)), "image_b64"))};
  }

 private:
  JsonEndpoint ep_;
};

class HttpMeshLifter : public MeshLifter {
 public:
  explicit HttpMeshLifter(const ProviderConfig& cfg) : ep_(cfg) {}
  MeshAsset lift(const Image& image) override {
    ModelRequest req;
    req.template_id = "image_to_mesh";
    req.images = {image};
    auto res = ep_.post(request_body("image_to_mesh", req));
    MeshAsset mesh;
    mesh.glb = base64_decode(field<std::string>(res, "mesh_b64"));
    auto b = field<std::vector<double>>(res, "bbox");
    if (b.size() != 3) throw ProviderError("bbox must have three extents");
    mesh.bbox = {b[0], b[1], b[2]};
    return mesh;
  }

 private:
  JsonEndpoint ep_;
};

class HttpEmbedder : public TextEmbedder {
 public:
  explicit HttpEmbedder(const ProviderConfig& cfg) : ep_(cfg) {}
  EmbeddingVector embed(const std::string& text) override {
    auto res = ep_.post({{"task", "embed"}, {"template_id", "embed"}, {"prompt", text}, {"images", nlohmann::json::array()}});
    return EmbeddingVector{field<std::vector<double>>(res, "embedding")};
  }

 private:
  JsonEndpoint ep_;
};

}  // namespace

std::shared_ptr<ChatModel> make_http_chat(const ProviderConfig& cfg, std::string task) {
  return std::make_shared<HttpChat>(cfg, std::move(task));
}
std::shared_ptr<ImageGenerator> make_http_image_generator(const ProviderConfig& cfg) {
  return std::make_shared<HttpImageGenerator>(cfg);
}
std::shared_ptr<ImageEditor> make_http_image_editor(const ProviderConfig& cfg) {
  return std::make_shared<HttpImageEditor>(cfg);
}
std::shared_ptr<MeshLifter> make_http_mesh_lifter(const ProviderConfig& cfg) {
  return std::make_shared<HttpMeshLifter>(cfg);
}
std::shared_ptr<TextEmbedder> make_http_embedder(const ProviderConfig& cfg) {
  return std::make_shared<HttpEmbedder>(cfg);
}

}  // namespace gridcity
