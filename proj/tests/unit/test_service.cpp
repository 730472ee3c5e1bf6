// Copyright 2026 The Robbins Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "robbins/errors.hpp"
#include "robbins/service.hpp"

using namespace robbins;
using namespace robbins::service;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("robbins-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ServiceConfig config_in(const fs::path& dir) {
  ServiceConfig c;
  c.data_dir = dir;
  c.default_m = 20;
  c.seed = 11;
  return c;
}

// Running server on an ephemeral port.
struct LiveServer {
  GameService& service;
  std::unique_ptr<httplib::Server> server;
  std::thread thread;
  int port = 0;

  explicit LiveServer(GameService& s) : service(s), server(make_http_server(s)) {
    port = server->bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server->listen_after_bind(); });
    server->wait_until_ready();
  }
  ~LiveServer() {
    service.shutdown();
    server->stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }
};

const std::set<std::string> kStateKeys = {"id",       "M",         "basket", "a",
                                          "b",        "mode",      "arrivals",
                                          "decisions", "status",   "objective"};

// Whitelist check of a pre-close response: only public fields anywhere.
void check_redacted(const json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "arrival") {
      if (!it->is_null()) {
        for (auto a = it->begin(); a != it->end(); ++a) {
          CHECK(std::set<std::string>{"index", "t", "rel_rank"}.count(a.key()) == 1);
        }
      }
    } else if (k == "state") {
      check_redacted(*it);
    } else {
      CHECK_MESSAGE(kStateKeys.count(k) == 1, "unexpected field " << k);
    }
  }
  if (j.contains("arrivals")) {
    for (const auto& a : j["arrivals"]) {
      CHECK(a.size() == 2);
      CHECK(a.contains("t"));
      CHECK(a.contains("rel_rank"));
    }
  }
}

struct SseEvent {
  std::uint64_t id = 0;
  std::string type;
  json data;
};

std::vector<SseEvent> parse_sse(const std::string& body) {
  std::vector<SseEvent> out;
  std::istringstream in(body);
  std::string line;
  SseEvent cur;
  bool have = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      if (have) out.push_back(cur);
      cur = SseEvent{};
      have = false;
    } else if (line.rfind("id: ", 0) == 0) {
      cur.id = std::stoull(line.substr(4));
      have = true;
    } else if (line.rfind("event: ", 0) == 0) {
      cur.type = line.substr(7);
    } else if (line.rfind("data: ", 0) == 0) {
      cur.data = json::parse(line.substr(6));
    }
  }
  return out;
}

std::string create(httplib::Client& c, const json& body) {
  auto r = c.Post("/sessions", body.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 201);
  return json::parse(r->body)["id"].get<std::string>();
}

json post_json(httplib::Client& c, const std::string& path, const json& body, int* status) {
  auto r = c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  *status = r->status;
  return json::parse(r->body);
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(
      "# service\nbind_address = 0.0.0.0\nport=9000\ndata_dir = /tmp/x  # comment\n"
      "default_m = 50\nseed = 7\nsession_ttl_seconds = 2.5\nbeta = 0.3\n");
  CHECK(c.bind_address == "0.0.0.0");
  CHECK(c.port == 9000);
  CHECK(c.data_dir == "/tmp/x");
  CHECK(c.default_m == 50);
  CHECK(c.seed == 7);
  CHECK(c.session_ttl_seconds == 2.5);
  CHECK(c.beta == 0.3);
  CHECK_THROWS_AS(parse_config("colour = blue\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("port = eighty\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("port\n"), InvalidArgument);
  TempDir dir;
  auto bad = config_in(dir.path);
  bad.session_ttl_seconds = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  auto unwritable = config_in("/proc/robbins-no-such-dir");
  CHECK_THROWS_AS(unwritable.validate(), InvalidArgument);
}

TEST_CASE("config file paths resolve against the file") {
  TempDir dir;
  std::ofstream(dir.path / "svc.conf") << "data_dir = data\nbasket_file = basket.json\n";
  const auto c = load_config(dir.path / "svc.conf");
  CHECK(c.data_dir == dir.path / "data");
  CHECK(c.basket_file == dir.path / "basket.json");
}

TEST_CASE("store is append-only") {
  TempDir dir;
  SessionStore store(dir.path);
  store.put("a1", "{\"x\":1}");
  store.put("a1", "{\"x\":1}");  // identical rewrite is a no-op
  CHECK_THROWS_AS(store.put("a1", "{\"x\":2}"), Conflict);
  CHECK_THROWS_AS(store.put("../evil", "{}"), InvalidArgument);
  store.put("b2", "{\"y\":2}");
  CHECK(store.get("a1") == std::optional<std::string>("{\"x\":1}"));
  CHECK_FALSE(store.get("zz").has_value());
  CHECK(store.ids() == std::vector<std::string>{"a1", "b2"});
}

TEST_CASE("store index is repaired on startup") {
  TempDir dir;
  {
    SessionStore store(dir.path);
    store.put("a1", "{}");
    store.put("b2", "{}");
  }
  fs::remove(dir.path / "index.json");
  std::ofstream(dir.path / "sessions" / "c3.json") << "{}";
  std::ofstream(dir.path / "sessions" / "d4.json.tmp") << "{partial";
  SessionStore store(dir.path);
  CHECK(store.ids() == std::vector<std::string>{"a1", "b2", "c3"});
  CHECK_FALSE(fs::exists(dir.path / "sessions" / "d4.json.tmp"));
  const auto index = json::parse(std::ifstream(dir.path / "index.json"));
  CHECK(index.size() == 3);
}

TEST_CASE("http game lifecycle") {
  TempDir dir;
  GameService service(config_in(dir.path));
  LiveServer live(service);
  auto c = live.client();

  const std::string id = create(c, {{"M", 20}});
  auto r = c.Get("/sessions/" + id);
  REQUIRE(r);
  CHECK(r->status == 200);
  check_redacted(json::parse(r->body));

  auto early = c.Get("/sessions/" + id + "/reveal");
  REQUIRE(early);
  CHECK(early->status == 409);

  int status = 0;
  std::size_t last_rank_seen = 0;
  for (int guard = 0; guard < 100; ++guard) {
    const json adv = post_json(c, "/sessions/" + id + "/advance", json::object(), &status);
    REQUIRE(status == 200);
    if (adv["state"]["status"] != "OPEN") break;
    check_redacted(adv);
    last_rank_seen = adv["arrival"]["rel_rank"].get<std::size_t>();
    const json st = post_json(c, "/sessions/" + id + "/decision", {{"decision", "PASS"}}, &status);
    REQUIRE(status == 200);
    if (st["status"] != "OPEN") break;
    check_redacted(st);
  }
  CHECK(last_rank_seen >= 1);
  auto rev = c.Get("/sessions/" + id + "/reveal");
  REQUIRE(rev);
  REQUIRE(rev->status == 200);
  const json record = json::parse(rev->body);
  CHECK(record["status"] == "EXHAUSTED");
  CHECK(record["outcome"]["forced"] == true);
  CHECK(record["outcome"]["accepted_index"] == record["outcome"]["N"]);

  post_json(c, "/sessions/" + id + "/decision", {{"decision", "ACCEPT"}}, &status);
  CHECK(status == 409);
  post_json(c, "/sessions/" + id + "/advance", json::object(), &status);
  CHECK(status == 409);
  post_json(c, "/sessions/nope/advance", json::object(), &status);
  CHECK(status == 404);
  auto missing = c.Get("/sessions/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  post_json(c, "/sessions", {{"M", 0}}, &status);
  CHECK(status == 400);
  post_json(c, "/sessions", {{"objective", "WIN"}}, &status);
  CHECK(status == 400);
}

TEST_CASE("http: M = 1 accepts the only arrival") {
  TempDir dir;
  GameService service(config_in(dir.path));
  LiveServer live(service);
  auto c = live.client();
  const std::string id = create(c, {{"M", 1}});
  int status = 0;
  const json adv = post_json(c, "/sessions/" + id + "/advance", json::object(), &status);
  CHECK(status == 200);
  CHECK(adv["arrival"]["rel_rank"] == 1);
  post_json(c, "/sessions/" + id + "/decision", {{"decision", "BOGUS"}}, &status);
  CHECK(status == 400);
  const json st = post_json(c, "/sessions/" + id + "/decision", {{"decision", "ACCEPT"}}, &status);
  CHECK(status == 200);
  CHECK(st["status"] == "ACCEPTED");
  post_json(c, "/sessions/" + id + "/decision", {{"decision", "ACCEPT"}}, &status);
  CHECK(status == 409);
  auto rev = c.Get("/sessions/" + id + "/reveal");
  REQUIRE(rev);
  CHECK(json::parse(rev->body)["outcome"]["final_rank"] == 1);
}

TEST_CASE("http: secret objective stays hidden until close") {
  TempDir dir;
  GameService service(config_in(dir.path));
  LiveServer live(service);
  auto c = live.client();
  const std::string id =
      create(c, {{"M", 5}, {"objective", "TOP_PERCENT(10)"}, {"secret", true}});
  auto r = c.Get("/sessions/" + id);
  REQUIRE(r);
  CHECK_FALSE(json::parse(r->body).contains("objective"));
  int status = 0;
  post_json(c, "/sessions/" + id + "/advance", json::object(), &status);
  const json st = post_json(c, "/sessions/" + id + "/decision", {{"decision", "ACCEPT"}}, &status);
  CHECK(st["objective"] == "TOP_PERCENT(10)");
  const std::string open_id = create(c, {{"M", 5}, {"objective", "EXACT_RANK(2)"}});
  auto o = c.Get("/sessions/" + open_id);
  REQUIRE(o);
  CHECK(json::parse(o->body)["objective"] == "EXACT_RANK(2)");
}

TEST_CASE("http: event stream with replay from an event id") {
  TempDir dir;
  GameService service(config_in(dir.path));
  LiveServer live(service);
  auto c = live.client();
  const std::string id = create(c, {{"M", 30}});

  // Reader attached before play starts; the stream ends at close.
  std::string streamed;
  std::thread reader([&] {
    auto rc = live.client();
    rc.Get("/sessions/" + id + "/events", [&](const char* data, std::size_t len) {
      streamed.append(data, len);
      return true;
    });
  });
  int status = 0;
  for (int step = 1; step < 100; ++step) {
    const json adv = post_json(c, "/sessions/" + id + "/advance", json::object(), &status);
    if (adv["state"]["status"] != "OPEN") break;
    const json st = post_json(c, "/sessions/" + id + "/decision",
                              {{"decision", step == 4 ? "ACCEPT" : "PASS"}}, &status);
    if (st["status"] != "OPEN") break;
  }
  reader.join();
  const auto events = parse_sse(streamed);
  REQUIRE(events.size() >= 3);
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].id == i + 1);
  CHECK(events.back().type == "closed");
  for (const auto& e : events) {
    if (e.type == "arrival") {
      CHECK(e.data.size() == 3);
      CHECK(e.data.contains("rel_rank"));
    }
  }

  httplib::Headers resume = {{"Last-Event-ID", "2"}};
  auto again = c.Get("/sessions/" + id + "/events", resume);
  REQUIRE(again);
  const auto tail = parse_sse(again->body);
  REQUIRE(tail.size() == events.size() - 2);
  CHECK(tail.front().id == 3);
  CHECK(tail.front().data == events[2].data);
  auto none = c.Get("/sessions/nope/events");
  REQUIRE(none);
  CHECK(none->status == 404);
}

TEST_CASE("scoreboard matches a recomputation from records") {
  TempDir dir;
  GameService service(config_in(dir.path));
  for (int g = 0; g < 12; ++g) {
    CreateRequest req;
    req.m = 15;
    if (g % 3 == 0) req.mode = "machine";
    if (g % 4 == 1) req.objective = "TOP_PERCENT(20)";
    const auto id = service.create(req);
    int step = 0;
    while (service.state(id).status == "OPEN") {
      service.advance(id);
      if (service.state(id).status != "OPEN") break;
      service.decide(id, ++step == 2 + g % 3 ? Decision::kAccept : Decision::kPass);
    }
  }
  const auto board = service.scoreboard();
  CHECK(board == service.recompute_scoreboard());
  CHECK(board.machine.games == 12);
  CHECK(board.human.games == 8);
  const json stats = service.stats();
  CHECK(stats["ledger"]["updates"].size() == 8);
  CHECK(stats["human"]["games"] == 8);
}

TEST_CASE("closed sessions survive a restart byte for byte") {
  TempDir dir;
  std::vector<std::pair<std::string, std::string>> records;
  Scoreboard before;
  std::string open_id;
  {
    GameService service(config_in(dir.path));
    for (int g = 0; g < 5; ++g) {
      CreateRequest req;
      req.m = 10;
      req.mode = g % 2 ? "machine" : "human";
      const auto id = service.create(req);
      while (service.state(id).status == "OPEN") service.advance(id);
      records.emplace_back(id, service.reveal(id));
    }
    open_id = service.create(CreateRequest{});
    service.advance(open_id);
    before = service.scoreboard();
  }
  GameService restarted(config_in(dir.path));
  for (const auto& [id, bytes] : records) {
    CHECK(restarted.reveal(id) == bytes);
    CHECK(restarted.state(id).status != "OPEN");
  }
  CHECK(restarted.scoreboard() == before);
  CHECK_THROWS_AS(restarted.state(open_id), NotFound);
  // New sessions never reuse a stored id.
  const auto fresh = restarted.create(CreateRequest{});
  for (const auto& [id, bytes] : records) CHECK(fresh != id);
}

TEST_CASE("idle open sessions expire") {
  TempDir dir;
  auto cfg = config_in(dir.path);
  cfg.session_ttl_seconds = 0.05;
  GameService service(cfg);
  const auto id = service.create(CreateRequest{});
  std::this_thread::sleep_for(std::chrono::milliseconds(120));
  service.create(CreateRequest{});
  CHECK_THROWS_AS(service.state(id), NotFound);
}
