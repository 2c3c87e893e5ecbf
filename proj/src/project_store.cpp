#include "gridcity/service/project_store.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace gridcity {

namespace fs = std::filesystem;

namespace {

std::string unique_suffix() {
  static std::atomic<unsigned long> counter{0};
  return "." + std::to_string(::getpid()) + "." + std::to_string(counter++) + ".tmp";
}

void atomic_write(const fs::path& target, const char* data, std::size_t size) {
  fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + unique_suffix();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(data, static_cast<std::streamsize>(size));
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json parse_file(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

nlohmann::json verdict_to_json(const IterationRecord& rec) {
  return {{"iteration", rec.iteration},
          {"prompt_used", rec.prompt_used},
          {"score", rec.verdict.score},
          {"reason", rec.verdict.reason},
          {"rewrite", rec.verdict.rewrite}};
}

}  // namespace

nlohmann::json tile_asset_to_json(const TileAsset& a) {
  nlohmann::json j = {{"status", to_string(a.status)},
                      {"image", a.image_path},
                      {"mesh", a.mesh_path},
                      {"bbox", {a.bbox.dx, a.bbox.dy, a.bbox.dz}},
                      {"iterations", a.iterations},
                      {"final_iteration", a.final_iteration},
                      {"below_threshold", a.below_threshold}};
  if (!a.error.empty()) j["error"] = a.error;
  return j;
}

TileAsset tile_asset_from_json(const nlohmann::json& j) {
  TileAsset a;
  a.status = tile_status_from_string(j.at("status").get<std::string>());
  a.image_path = j.value("image", std::string{});
  a.mesh_path = j.value("mesh", std::string{});
  auto b = j.value("bbox", std::vector<double>{0, 0, 0});
  if (b.size() == 3) a.bbox = {b[0], b[1], b[2]};
  a.iterations = j.value("iterations", 0);
  a.final_iteration = j.value("final_iteration", 0);
  a.below_threshold = j.value("below_threshold", false);
  a.error = j.value("error", std::string{});
  return a;
}

ProjectStore::ProjectStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

bool ProjectStore::exists(const std::string& rel) const { return fs::exists(path_of(rel)); }

void ProjectStore::write_bytes(const std::string& rel, const Bytes& data) {
  atomic_write(path_of(rel), reinterpret_cast<const char*>(data.data()), data.size());
}

void ProjectStore::write_text(const std::string& rel, const std::string& text) {
  atomic_write(path_of(rel), text.data(), text.size());
}

std::optional<Bytes> ProjectStore::read_bytes(const std::string& rel) const {
  if (!exists(rel)) return std::nullopt;
  std::string s = read_file(path_of(rel));
  return Bytes(s.begin(), s.end());
}

void ProjectStore::save(const CityProject& project) {
  nlohmann::json assets = nlohmann::json::object();
  for (const auto& [idx, a] : project.assets) assets[std::to_string(idx)] = tile_asset_to_json(a);
  nlohmann::json city = {{"version", 1},
                         {"id", project.id},
                         {"prompt", project.prompt},
                         {"initial_layout", layout_to_json(project.initial_layout)},
                         {"layout", layout_to_json(project.layout)},
                         {"assets", assets}};
  nlohmann::json desc = nlohmann::json::object();
  for (const auto& [idx, d] : project.descriptions) desc[std::to_string(idx)] = d.text;
  std::lock_guard lock(mutex_);
  write_text("descriptions.json", canonical_dump(desc));
  write_text("city.json", canonical_dump(city));
}

CityProject ProjectStore::load() const {
  if (!has_city()) throw Error("no city.json in " + root_.string());
  CityProject p;
  {
    std::lock_guard lock(mutex_);
    auto city = parse_file(path_of("city.json"));
    try {
      p.id = city.value("id", std::string{});
      p.prompt = city.at("prompt").get<std::string>();
      p.initial_layout = layout_from_json(city.at("initial_layout"));
      p.layout = layout_from_json(city.at("layout"));
      for (auto it = city.at("assets").begin(); it != city.at("assets").end(); ++it)
        p.assets[std::stoi(it.key())] = tile_asset_from_json(it.value());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("city.json: " + std::string(e.what()));
    }
    if (has_descriptions()) {
      auto desc = parse_file(path_of("descriptions.json"));
      for (auto it = desc.begin(); it != desc.end(); ++it) {
        const int idx = std::stoi(it.key());
        p.descriptions[idx] = {idx, it.value().get<std::string>()};
      }
    }
  }
  p.history = load_history();
  return p;
}

void ProjectStore::append_history(const ExpansionRecord& record) {
  std::lock_guard lock(mutex_);
  std::string text = exists("history.jsonl") ? read_file(path_of("history.jsonl")) : std::string{};
  text += expansion_record_to_json(record).dump() + "\n";
  write_text("history.jsonl", text);
}

std::vector<ExpansionRecord> ProjectStore::load_history() const {
  std::vector<ExpansionRecord> out;
  if (!exists("history.jsonl")) return out;
  std::istringstream in(read_file(path_of("history.jsonl")));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(expansion_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("history.jsonl: " + std::string(e.what()));
    }
  }
  return out;
}

void ProjectStore::save_iteration(int index, const IterationRecord& rec) {
  const std::string dir = tile_dir(index) + "/iter" + std::to_string(rec.iteration);
  write_bytes(dir + "/produced.png", rec.produced.png);
  write_bytes(dir + "/refined.png", rec.refined.png);
  write_text(dir + "/verdict.json", canonical_dump(verdict_to_json(rec)));
}

TileAsset ProjectStore::save_tile_result(const TileJob& job) {
  TileAsset a;
  a.status = job.status;
  a.iterations = static_cast<int>(job.iterations.size());
  a.final_iteration = job.final_iteration;
  a.below_threshold = job.below_threshold;
  a.error = job.error;
  if (job.status != TileStatus::kDone) return a;
  a.image_path = tile_dir(job.index) + "/final.png";
  a.mesh_path = tile_dir(job.index) + "/model.glb";
  a.bbox = job.mesh->bbox;
  write_bytes(a.image_path, job.final_image->png);
  write_bytes(a.mesh_path, job.mesh->glb);
  return a;
}

bool ProjectStore::tile_complete(const CityProject& project, int index) const {
  auto it = project.assets.find(index);
  if (it == project.assets.end() || it->second.status != TileStatus::kDone) return false;
  return !it->second.image_path.empty() && exists(it->second.image_path) && !it->second.mesh_path.empty() &&
         exists(it->second.mesh_path) && !it->second.bbox.degenerate();
}

void ProjectStore::save_manifest(const SceneManifest& manifest) {
  write_text("scene.gltf", export_gltf(manifest).dump(2) + "\n");
  write_text("scene.manifest.json", gridcity::manifest_text(manifest));
}

std::optional<std::string> ProjectStore::manifest_text() const {
  if (!has_manifest()) return std::nullopt;
  return read_file(path_of("scene.manifest.json"));
}

}  // namespace gridcity
