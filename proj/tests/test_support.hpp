#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <thread>
#include <unistd.h>

#include "gridcity/mock_providers.hpp"

namespace testsupport {

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gridcity-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string data_dir(const std::string& rel) { return std::string(GRIDCITY_TEST_DATA_DIR) + "/" + rel; }

/// Tracks how many calls are in flight at once.
struct Gauge {
  std::atomic<int> active{0};
  std::atomic<int> peak{0};

  void enter() {
    const int now = ++active;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
  }
  void leave() { --active; }
};

/// Mock image generator that sleeps and reports concurrency; can fail
/// permanently for instructions containing `poison`.
class ProbeGenerator : public gridcity::ImageGenerator {
 public:
  ProbeGenerator(Gauge& gauge, int sleep_ms = 0, std::string poison = {})
      : gauge_(gauge), sleep_ms_(sleep_ms), poison_(std::move(poison)) {}

  gridcity::Image generate(const gridcity::ModelRequest& req) override {
    ++calls;
    gauge_.enter();
    std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms_));
    gauge_.leave();
    if (!poison_.empty() && req.variables.at("grid_description").find(poison_) != std::string::npos)
      throw gridcity::ProviderError("image service rejected the request");
    return inner_.generate(req);
  }

  std::atomic<int> calls{0};

 private:
  Gauge& gauge_;
  int sleep_ms_;
  std::string poison_;
  gridcity::MockImageGenerator inner_;
};

}  // namespace testsupport
