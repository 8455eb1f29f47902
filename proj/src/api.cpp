#include "spacedit/api.hpp"

#include "spacedit/metrics.hpp"
#include "spacedit/persistence.hpp"

#include "httplib.h"

#include <algorithm>
#include <charconv>

namespace spacedit {

using nlohmann::json;

ApiError to_api_error(const Error& e) {
  ApiError out;
  out.code = std::string(to_string(e.code()));
  out.message = e.what();
  switch (e.code()) {
    case ErrorCode::configuration:
    case ErrorCode::shape:
    case ErrorCode::input:
    case ErrorCode::parse:
    case ErrorCode::schema:
    case ErrorCode::rejected:
    case ErrorCode::empty_class:
    case ErrorCode::degenerate:
    case ErrorCode::precondition:
      out.status = 422;
      break;
    case ErrorCode::busy: out.status = 409; break;
    case ErrorCode::not_found: out.status = 404; break;
    default: out.status = 500; break;
  }
  return out;
}

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::pending: return "pending";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "pending";
}

SessionService::SessionService(Session session, std::optional<std::filesystem::path> persist_dir)
    : session_(std::move(session)), persist_dir_(std::move(persist_dir)) {
  if (!session_.has_model()) {
    throw Error(ErrorCode::precondition, "the session has no model yet; run pretrain before serving");
  }
}

SessionService::~SessionService() {
  cancel_ = true;
  if (worker_.joinable()) worker_.join();
}

Session SessionService::snapshot() const {
  std::shared_lock lock(session_mutex_);
  return session_;
}

void SessionService::require_idle() const {
  std::lock_guard lock(job_mutex_);
  if (job_running_) throw Error(ErrorCode::busy, "a retrain job is running");
}

void SessionService::persist() {
  if (persist_dir_) save_session(session_, *persist_dir_);
}

namespace {

json point2(const Point2& p) { return json::array({p.x, p.y}); }

}  // namespace

json SessionService::session_info() const {
  std::shared_lock lock(session_mutex_);
  const auto& d = session_.data();
  const auto& data = session_.dataset();
  bool busy = false;
  {
    std::lock_guard jl(job_mutex_);
    busy = job_running_;
  }
  return {{"items", data.size()},
          {"num_classes", data.num_classes()},
          {"class_names", data.class_names},
          {"class_colors", data.class_colors},
          {"class_visible", d.class_visible},
          {"checkpoint", d.current_checkpoint},
          {"checkpoints", d.checkpoints.size()},
          {"cursor", d.cursor},
          {"history_length", d.history.size()},
          {"pending_edits", session_.pending_edits().size()},
          {"layout_method", std::string(to_string(d.layout.method))},
          {"layout_epoch", d.layout.epoch},
          {"accuracy_before", d.metrics.accuracy_before ? json(*d.metrics.accuracy_before) : json(nullptr)},
          {"accuracy_after", d.metrics.accuracy_after ? json(*d.metrics.accuracy_after) : json(nullptr)},
          {"warnings", d.warnings},
          {"busy", busy}};
}

json SessionService::points(const PointQuery& query) const {
  std::shared_lock lock(session_mutex_);
  const auto& data = session_.dataset();
  const auto& layout = session_.layout();
  const auto& predicted = session_.predictions();
  const auto ranking = importance_scores(session_.probs());
  const auto limit = query.limit.value_or(data.size());

  std::vector<double> importance(data.size());
  std::vector<bool> keep(data.size(), false);
  for (std::size_t rank = 0; rank < ranking.size(); ++rank) {
    const auto& r = ranking[rank];
    importance[r.item_id] = r.importance;
    keep[r.item_id] = rank < limit && r.importance >= query.min_importance;
  }
  json out = json::array();
  for (std::size_t id = 0; id < data.size(); ++id) {
    if (!keep[id]) continue;
    const int label = data.labels[id];
    if (query.class_id && *query.class_id != label) continue;
    json p = {{"id", id},
              {"x", layout.points[id].x},
              {"y", layout.points[id].y},
              {"predicted", predicted[id]},
              {"label", label},
              {"importance", importance[id]},
              {"mispredicted", predicted[id] != label},
              {"visible", static_cast<bool>(session_.data().class_visible[label])},
              {"split", std::string(to_string(data.splits[id]))}};
    if (!data.thumbnails.empty() && !data.thumbnails[id].empty()) p["thumbnail"] = data.thumbnails[id];
    out.push_back(std::move(p));
  }
  return out;
}

json SessionService::heatmap(std::optional<int> class_id) const {
  std::shared_lock lock(session_mutex_);
  const auto& data = session_.dataset();
  auto one = [&](int c) {
    const auto g = class_heatmap(session_.layout(), data.labels, c);
    return json{{"class", c},
                {"color", data.class_colors[c]},
                {"width", g.width},
                {"height", g.height},
                {"bounds", {g.min_x, g.min_y, g.max_x, g.max_y}},
                {"bandwidth", {g.bandwidth_x, g.bandwidth_y}},
                {"density", g.density}};
  };
  if (class_id) {
    if (*class_id < 0 || static_cast<std::size_t>(*class_id) >= data.num_classes()) {
      throw Error(ErrorCode::input, "unknown class " + std::to_string(*class_id));
    }
    return one(*class_id);
  }
  json all = json::array();
  for (std::size_t c = 0; c < data.num_classes(); ++c) all.push_back(one(static_cast<int>(c)));
  return all;
}

json SessionService::guides() const {
  std::shared_lock lock(session_mutex_);
  const auto& data = session_.dataset();
  json out = json::array();
  for (const auto& g : guide_geometry(session_.layout(), data.labels, data.num_classes())) {
    out.push_back({{"class", g.class_id}, {"centroid", point2(g.centroid)}, {"radius", g.radius}});
  }
  return out;
}

json SessionService::history() const {
  std::shared_lock lock(session_mutex_);
  json entries = json::array();
  const auto& h = session_.history();
  for (std::size_t i = 0; i < h.size(); ++i) {
    json e = {{"index", i + 1},
              {"kind", h[i].kind == HistoryEntry::Kind::edit ? "edit" : "retrain"},
              {"label", h[i].label},
              {"timestamp", h[i].timestamp},
              {"checkpoint", h[i].checkpoint},
              {"moves", h[i].transaction.moves.size()},
              {"active", i + 1 <= session_.cursor()}};
    if (h[i].retrain) e["retrain"] = retrain_config_to_json(*h[i].retrain);
    entries.push_back(std::move(e));
  }
  return {{"cursor", session_.cursor()}, {"entries", std::move(entries)}};
}

json SessionService::metrics() const {
  std::shared_lock lock(session_mutex_);
  return metrics_to_json(session_.metrics());
}

json SessionService::post_edits(const json& body) {
  require_idle();
  auto tx = edit_from_json_line(body.dump());
  std::unique_lock lock(session_mutex_);
  const bool applied = session_.apply_edits(std::move(tx));
  if (applied) persist();
  return {{"applied", applied}, {"cursor", session_.cursor()}, {"history_length", session_.history().size()}};
}

json SessionService::undo() {
  require_idle();
  std::unique_lock lock(session_mutex_);
  const bool changed = session_.undo();
  if (changed) persist();
  return {{"changed", changed}, {"cursor", session_.cursor()}};
}

json SessionService::redo() {
  require_idle();
  std::unique_lock lock(session_mutex_);
  const bool changed = session_.redo();
  if (changed) persist();
  return {{"changed", changed}, {"cursor", session_.cursor()}};
}

json SessionService::restore(std::size_t index) {
  require_idle();
  std::unique_lock lock(session_mutex_);
  session_.restore(index);
  persist();
  return {{"cursor", session_.cursor()}};
}

json SessionService::reset() {
  require_idle();
  std::unique_lock lock(session_mutex_);
  session_.reset();
  persist();
  return {{"cursor", session_.cursor()}};
}

std::size_t SessionService::start_retrain(const json& body) {
  std::unique_lock jl(job_mutex_);
  if (job_running_) throw Error(ErrorCode::busy, "a retrain job is already running");
  RetrainPlan plan;
  {
    std::shared_lock lock(session_mutex_);
    plan = session_.plan_retrain(retrain_config_from_json(body.is_null() ? json::object() : body));
  }
  if (worker_.joinable()) worker_.join();
  const auto id = jobs_.size() + 1;
  JobStatus status;
  status.id = id;
  status.epochs = plan.config.epochs;
  jobs_.push_back(status);
  job_running_ = true;
  cancel_ = false;
  worker_ = std::thread(&SessionService::run_job, this, id, std::move(plan));
  return id;
}

void SessionService::run_job(std::size_t id, RetrainPlan plan) {
  auto update = [&](auto fn) {
    std::lock_guard jl(job_mutex_);
    fn(jobs_[id - 1]);
  };
  update([](JobStatus& s) { s.state = JobState::running; });
  try {
    auto result = Session::execute_retrain(
        plan,
        [&](const EpochProgress& p) {
          update([&](JobStatus& s) {
            s.epoch = p.epoch;
            s.micro_f1.push_back(p.val_micro_f1);
          });
        },
        {}, &cancel_);
    {
      std::unique_lock lock(session_mutex_);
      session_.commit_retrain(std::move(result));
      persist();
    }
    update([](JobStatus& s) { s.state = JobState::done; });
  } catch (const std::exception& e) {
    const std::string message = e.what();
    update([&](JobStatus& s) {
      s.state = JobState::failed;
      s.error = message;
    });
  }
  std::lock_guard jl(job_mutex_);
  job_running_ = false;
}

std::optional<JobStatus> SessionService::job(std::size_t id) const {
  std::lock_guard jl(job_mutex_);
  if (id == 0 || id > jobs_.size()) return std::nullopt;
  return jobs_[id - 1];
}

json SessionService::job_json(std::size_t id) const {
  const auto s = job(id);
  if (!s) throw Error(ErrorCode::not_found, "no job " + std::to_string(id));
  return {{"job_id", s->id},
          {"state", std::string(to_string(s->state))},
          {"epoch", s->epoch},
          {"epochs", s->epochs},
          {"micro_f1", s->micro_f1},
          {"error", s->state == JobState::failed ? json(s->error) : json(nullptr)}};
}

void SessionService::wait_for_job() {
  std::thread worker;
  {
    std::lock_guard jl(job_mutex_);
    worker = std::move(worker_);
  }
  if (worker.joinable()) worker.join();
}

void SessionService::shutdown(bool abort_job) {
  if (abort_job) cancel_ = true;
  wait_for_job();
  std::unique_lock lock(session_mutex_);
  persist();
}

// ---------------------------------------------------------------------------

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) {
  send_json(res, {{"code", e.code}, {"message", e.message}}, e.status);
}

template <typename Handler>
auto guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, to_api_error(e));
    } catch (const json::exception& e) {
      send_error(res, {422, "parse_error", e.what()});
    } catch (const std::exception& e) {
      send_error(res, {500, "internal_error", e.what()});
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("request body is not valid JSON: ") + e.what());
  }
}

template <typename T>
std::optional<T> query_number(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const auto text = req.get_param_value(key);
  if (text.empty()) return std::nullopt;
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::input, std::string("query parameter '") + key + "' is not a number");
  }
  return value;
}

std::size_t path_index(const httplib::Request& req) {
  const auto text = req.matches[1].str();
  std::size_t v = 0;
  std::from_chars(text.data(), text.data() + text.size(), v);
  return v;
}

}  // namespace

ApiServer::ApiServer(SessionService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::routes() {
  auto& s = *server_;
  auto& svc = service_;
  s.Get("/api/session", guarded([&svc](const auto&, auto& res) { send_json(res, svc.session_info()); }));
  s.Get("/api/points", guarded([&svc](const httplib::Request& req, auto& res) {
          PointQuery q;
          q.min_importance = query_number<double>(req, "min_importance").value_or(0.0);
          if (auto limit = query_number<long long>(req, "limit")) {
            if (*limit < 0) throw Error(ErrorCode::input, "limit must be non-negative");
            q.limit = static_cast<std::size_t>(*limit);
          }
          q.class_id = query_number<int>(req, "class");
          send_json(res, svc.points(q));
        }));
  s.Get("/api/heatmap", guarded([&svc](const httplib::Request& req, auto& res) {
          send_json(res, svc.heatmap(query_number<int>(req, "class")));
        }));
  s.Get("/api/guides", guarded([&svc](const auto&, auto& res) { send_json(res, svc.guides()); }));
  s.Post("/api/edits", guarded([&svc](const httplib::Request& req, auto& res) {
           send_json(res, svc.post_edits(parse_body(req)));
         }));
  s.Post("/api/undo", guarded([&svc](const auto&, auto& res) { send_json(res, svc.undo()); }));
  s.Post("/api/redo", guarded([&svc](const auto&, auto& res) { send_json(res, svc.redo()); }));
  s.Get("/api/history", guarded([&svc](const auto&, auto& res) { send_json(res, svc.history()); }));
  s.Post(R"(/api/history/(\d+)/restore)", guarded([&svc](const httplib::Request& req, auto& res) {
           send_json(res, svc.restore(path_index(req)));
         }));
  s.Post("/api/retrain", guarded([&svc](const httplib::Request& req, auto& res) {
           const auto id = svc.start_retrain(parse_body(req));
           send_json(res, {{"job_id", id}}, 202);
         }));
  s.Get(R"(/api/jobs/(\d+))", guarded([&svc](const httplib::Request& req, auto& res) {
          send_json(res, svc.job_json(path_index(req)));
        }));
  s.Get("/api/metrics", guarded([&svc](const auto&, auto& res) { send_json(res, svc.metrics()); }));
  s.Post("/api/reset", guarded([&svc](const auto&, auto& res) { send_json(res, svc.reset()); }));
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : "http_error";
    send_json(res, {{"code", code}, {"message", req.method + " " + req.path + ": no such endpoint"}}, res.status);
  });
}

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::io, "could not bind to any port on " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::io, "could not bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void ApiServer::listen() { server_->listen_after_bind(); }

void ApiServer::start_background() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace spacedit
