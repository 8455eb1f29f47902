#pragma once

// HTTP/JSON front end over a Session.
//
//   GET  /api/session                      GET  /api/points?min_importance=&limit=&class=
//   GET  /api/heatmap?class=               GET  /api/guides
//   POST /api/edits {moves:[...]}          POST /api/undo      POST /api/redo
//   GET  /api/history                      POST /api/history/{i}/restore
//   POST /api/retrain {epochs,k,...}       GET  /api/jobs/{id}
//   GET  /api/metrics                      POST /api/reset
//
// Errors are {code, message}. One mutex serialises session mutations; at most
// one retrain job runs at a time and mutations are refused (409) while it does.

#include "spacedit/error.hpp"
#include "spacedit/session.hpp"

#include "json.hpp"

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace spacedit {

struct ApiError {
  int status = 500;
  std::string code;
  std::string message;
};

/// Maps library error codes onto HTTP statuses.
ApiError to_api_error(const Error& e);

struct PointQuery {
  double min_importance = 0.0;
  std::optional<std::size_t> limit;
  std::optional<int> class_id;
};

enum class JobState { pending, running, done, failed };
std::string_view to_string(JobState state);

struct JobStatus {
  std::size_t id = 0;
  JobState state = JobState::pending;
  std::size_t epoch = 0;
  std::size_t epochs = 0;
  std::vector<double> micro_f1;  // completed epochs only
  std::string error;
};

class SessionService {
 public:
  explicit SessionService(Session session,
                          std::optional<std::filesystem::path> persist_dir = std::nullopt);
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  nlohmann::json session_info() const;
  nlohmann::json points(const PointQuery& query) const;
  nlohmann::json heatmap(std::optional<int> class_id) const;
  nlohmann::json guides() const;
  nlohmann::json history() const;
  nlohmann::json metrics() const;

  nlohmann::json post_edits(const nlohmann::json& body);
  nlohmann::json undo();
  nlohmann::json redo();
  nlohmann::json restore(std::size_t index);
  nlohmann::json reset();

  /// Starts a background retrain; throws busy if one is already running.
  std::size_t start_retrain(const nlohmann::json& body);
  std::optional<JobStatus> job(std::size_t id) const;
  nlohmann::json job_json(std::size_t id) const;
  void wait_for_job();

  /// Aborts (abort_job) or completes the running job, then persists.
  void shutdown(bool abort_job);

  Session snapshot() const;

 private:
  void require_idle() const;
  void persist();
  void run_job(std::size_t id, RetrainPlan plan);

  mutable std::shared_mutex session_mutex_;
  Session session_;
  std::optional<std::filesystem::path> persist_dir_;

  mutable std::mutex job_mutex_;
  std::vector<JobStatus> jobs_;
  bool job_running_ = false;
  std::thread worker_;
  std::atomic<bool> cancel_{false};
};

class ApiServer {
 public:
  explicit ApiServer(SessionService& service);
  ~ApiServer();

  /// Binds and returns the port (pass 0 for any free port). Throws on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocking.
  void listen();
  void start_background();
  void stop();

 private:
  void routes();

  SessionService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace spacedit
