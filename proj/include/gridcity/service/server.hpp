#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "gridcity/config.hpp"
#include "gridcity/providers.hpp"
#include "gridcity/service/project_store.hpp"

namespace httplib {
class Server;
}

namespace gridcity {

enum class JobState { kQueued, kRunning, kDone, kFailed };
std::string to_string(JobState s);

struct JobStatus {
  std::string id;
  std::string kind;  // plan, tile, expand, assemble
  JobState state = JobState::kQueued;
  double progress = 0.0;
  std::string error;
  nlohmann::json result;
};

nlohmann::json job_to_json(const JobStatus& job);

/// Runs submitted jobs one at a time, in submission order, on a single
/// coordinator thread.
class JobManager {
 public:
  using Progress = std::function<void(double)>;
  using Task = std::function<nlohmann::json(const Progress&)>;

  JobManager();
  ~JobManager();
  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  std::string submit(const std::string& kind, Task task);
  std::optional<JobStatus> get(const std::string& id) const;
  std::vector<JobStatus> list() const;
  /// Blocks until the job reaches a terminal state.
  JobStatus wait(const std::string& id) const;

 private:
  void loop();

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::map<std::string, JobStatus> jobs_;
  std::deque<std::pair<std::string, Task>> queue_;
  int next_id_ = 1;
  bool stopping_ = false;
  std::thread worker_;
};

/// The HTTP API over one project directory.
class Service {
 public:
  Service(std::filesystem::path root, EngineConfig cfg, std::shared_ptr<ModelHub> hub,
          std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~Service();

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port. Throws Error if the address cannot be bound.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

  JobManager& jobs() { return jobs_; }
  ProjectStore& store() { return store_; }

  nlohmann::json project_json() const;

 private:
  void mount();

  ProjectStore store_;
  EngineConfig cfg_;
  std::shared_ptr<ModelHub> hub_;
  std::optional<std::filesystem::path> static_dir_;
  JobManager jobs_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

/// "host:port" or ":port" or "port".
std::pair<std::string, int> parse_bind_address(const std::string& text);

}  // namespace gridcity
