#include "doctest.h"

#include "oracles.hpp"

#include "spacedit/api.hpp"
#include "spacedit/persistence.hpp"

#include "httplib.h"

#include <chrono>
#include <filesystem>
#include <thread>

using namespace spacedit;
using nlohmann::json;

namespace {

struct Fixture {
  SessionService service;
  ApiServer server;
  int port;
  httplib::Client client;

  explicit Fixture(Session s, std::optional<std::filesystem::path> dir = std::nullopt)
      : service(std::move(s), std::move(dir)),
        server(service),
        port(server.bind("127.0.0.1", 0)),
        client("127.0.0.1", port) {
    server.start_background();
  }
  ~Fixture() {
    server.stop();
    service.shutdown(true);
  }

  json get(const std::string& path, int expect = 200) {
    auto res = client.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
  json post(const std::string& path, const json& body, int expect = 200) {
    auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
};

json move_body(std::size_t id, Point2 from, Point2 to) {
  return {{"moves", {{{"id", id}, {"old", {from.x, from.y}}, {"new", {to.x, to.y}}}}}, {"source", "human"}};
}

}  // namespace

TEST_CASE("session, points, guides and heatmap endpoints") {
  Fixture f(oracle::pretrained_session(1));
  const auto info = f.get("/api/session");
  CHECK(info["items"] == 140);
  CHECK(info["num_classes"] == 4);
  CHECK(info["cursor"] == 0);

  const auto points = f.get("/api/points");
  REQUIRE(points.size() == 140);
  const auto snap = f.service.snapshot();
  for (const auto& p : points) {
    const std::size_t id = p["id"];
    CHECK(p["x"] == snap.layout().points[id].x);
    CHECK(p["mispredicted"] == (p["predicted"] != p["label"]));
  }
  const auto filtered = f.get("/api/points?min_importance=0.6&limit=5");
  CHECK(filtered.size() <= 5);
  for (const auto& p : filtered) CHECK(p["importance"].get<double>() >= 0.6);
  for (const auto& p : f.get("/api/points?class=2")) CHECK(p["label"] == 2);

  CHECK(f.get("/api/guides").size() == 4);
  const auto heat = f.get("/api/heatmap?class=1");
  CHECK(heat["class"] == 1);
  CHECK(heat["density"].size() == heat["width"].get<std::size_t>() * heat["height"].get<std::size_t>());
  CHECK(f.get("/api/heatmap").size() == 4);
  CHECK(f.get("/api/heatmap?class=9", 422)["code"] == "input_error");
}

TEST_CASE("edit, undo, redo, history and restore over HTTP") {
  Fixture f(oracle::pretrained_session(2));
  const auto snap = f.service.snapshot();
  const auto id = snap.dataset().ids_in(Split::train).front();
  const auto from = snap.layout().points[id];
  CHECK(f.post("/api/edits", move_body(id, from, {1.5, -2.5}))["applied"] == true);

  bool seen = false;
  for (const auto& p : f.get("/api/points")) {
    if (p["id"] == id) {
      CHECK(p["x"] == 1.5);
      CHECK(p["y"] == -2.5);
      seen = true;
    }
  }
  CHECK(seen);
  const auto hist = f.get("/api/history");
  CHECK(hist["cursor"] == 1);
  CHECK(hist["entries"].size() == 1);
  CHECK(f.post("/api/undo", json::object())["cursor"] == 0);
  CHECK(f.post("/api/undo", json::object())["changed"] == false);
  CHECK(f.post("/api/redo", json::object())["cursor"] == 1);
  CHECK(f.post("/api/history/0/restore", json::object())["cursor"] == 0);
  CHECK(f.post("/api/history/5/restore", json::object(), 422)["code"] == "input_error");
  CHECK(f.post("/api/reset", json::object())["cursor"] == 0);
  CHECK(f.get("/api/history")["entries"].empty());
}

TEST_CASE("bad requests map to 422 and unknown routes to 404") {
  Fixture f(oracle::pretrained_session(3));
  auto res = f.client.Post("/api/edits", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 422);
  CHECK(json::parse(res->body).contains("message"));

  const auto snap = f.service.snapshot();
  const auto test_id = snap.dataset().ids_in(Split::test).front();
  CHECK(f.post("/api/edits", move_body(test_id, {0, 0}, {1, 1}), 422)["code"] == "rejected");
  CHECK(f.post("/api/retrain", {{"epochs", 0}}, 422)["code"] == "configuration_error");
  CHECK(f.post("/api/retrain", json::object(), 422)["code"] == "rejected");
  CHECK(f.get("/api/jobs/7", 404)["code"] == "not_found");
  CHECK(f.get("/api/nothing", 404)["code"] == "not_found");
  CHECK(f.get("/api/jobs/abc", 404)["code"] == "not_found");
}

TEST_CASE("retrain runs as a job and blocks mutations while running") {
  const auto dir = std::filesystem::temp_directory_path() / "spacedit_api_job";
  std::filesystem::remove_all(dir);
  Fixture f(oracle::pretrained_session(4, 280, 0.6, 5), dir);
  const auto snap = f.service.snapshot();
  std::mt19937_64 rng(4);
  const auto edit = oracle::random_edit(snap, rng, 6);
  CHECK(f.post("/api/edits", json::parse(edit_to_json_line(edit)))["applied"] == true);

  const auto started = f.post("/api/retrain", {{"epochs", 40}, {"seed", 4}}, 202);
  const std::size_t job = started["job_id"];
  CHECK(job == 1);
  const auto busy = f.post("/api/undo", json::object(), 409);
  CHECK(busy["code"] == "busy");
  CHECK(f.post("/api/retrain", {{"epochs", 1}}, 409)["code"] == "busy");

  f.service.wait_for_job();
  const auto status = f.get("/api/jobs/1");
  CHECK(status["state"] == "done");
  CHECK(status["micro_f1"].size() == 40);
  const auto metrics = f.get("/api/metrics");
  CHECK(!metrics["accuracy_after"].is_null());
  CHECK(f.get("/api/session")["history_length"] == 2);

  // The service persisted the finished retrain.
  const auto on_disk = load_session(dir);
  CHECK(on_disk.history().size() == 2);
  CHECK(on_disk.layout() == f.service.snapshot().layout());
}
