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

#ifndef ROBBINS_SERVICE_HPP_
#define ROBBINS_SERVICE_HPP_

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "robbins/namur.hpp"

namespace httplib {
class Server;
}

namespace robbins::service {

// Flat key = value document; '#' starts a comment. Keys:
//   bind_address, port, data_dir, default_m, basket_file, seed,
//   session_ttl_seconds, beta, exact_decay
struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "robbins-data";
  std::size_t default_m = 100;
  std::filesystem::path basket_file;  // empty: built-in basket
  std::uint64_t seed = 1;
  double session_ttl_seconds = 3600.0;
  double beta = namur::kDefaultBeta;
  double exact_decay = namur::kDefaultExactDecay;

  // Throws InvalidArgument for TTL <= 0 or an unwritable data directory.
  void validate() const;
};

ServiceConfig parse_config(const std::string& text);
ServiceConfig load_config(const std::filesystem::path& path);

// Closed session records, one JSON document per file under
// <dir>/sessions, plus <dir>/index.json listing {id, path} in write order.
// Writes go to a temporary file first and are renamed into place.
class SessionStore {
 public:
  // Scans the directory and repairs the index against its contents.
  explicit SessionStore(std::filesystem::path dir);

  // Stores a record. Writing different bytes for an existing id throws
  // Conflict; rewriting identical bytes is a no-op.
  void put(const std::string& id, const std::string& record);
  std::optional<std::string> get(const std::string& id) const;
  std::vector<std::string> ids() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void write_index() const;
  std::filesystem::path path_of(const std::string& id) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::vector<std::string> order_;
};

struct CreateRequest {
  std::optional<std::size_t> m;
  std::optional<nlohmann::json> basket;
  std::string mode = "human";
  std::optional<std::string> objective;
  bool secret_objective = false;
};
CreateRequest create_request_from_json(const nlohmann::json& body);

struct Event {
  std::uint64_t id = 0;  // 1-based, per session
  std::string type;      // arrival | decision | closed
  nlohmann::json data;
};

struct PlayerStats {
  std::uint64_t games = 0;
  std::uint64_t rank_sum = 0;
  std::uint64_t successes = 0;
  friend bool operator==(const PlayerStats&, const PlayerStats&) = default;
  nlohmann::json to_json() const;
};

struct Scoreboard {
  PlayerStats human;
  PlayerStats machine;
  friend bool operator==(const Scoreboard&, const Scoreboard&) = default;
};

// Game host. Thread-safe; calls on one session are serialized.
class GameService {
 public:
  explicit GameService(ServiceConfig config);

  std::string create(const CreateRequest& request);
  namur::PublicState state(const std::string& id);
  // {"arrival": {t, rel_rank} | null, "state": ...}
  nlohmann::json advance(const std::string& id);
  namur::PublicState decide(const std::string& id, Decision d);
  // Events with id > after; blocks up to `wait_ms` for new ones while the
  // session is open. `closed` reports whether the stream is complete.
  std::vector<Event> events(const std::string& id, std::uint64_t after,
                            int wait_ms, bool* closed);
  // Full record; Conflict while open.
  std::string reveal(const std::string& id);
  nlohmann::json stats();
  Scoreboard scoreboard();
  // Scoreboard recomputed from the stored records.
  Scoreboard recompute_scoreboard();
  // Wakes blocked event readers; used on shutdown.
  void shutdown();

  const ServiceConfig& config() const { return config_; }
  SessionStore& store() { return store_; }

 private:
  struct Entry {
    std::mutex mu;
    std::condition_variable cv;
    std::optional<namur::Session> session;
    std::vector<Event> events;
    double last_touch = 0.0;
  };

  std::shared_ptr<Entry> find(const std::string& id);
  void on_closed(Entry& entry);
  void push(Entry& entry, std::string type, nlohmann::json data);
  void expire_idle();
  static void tally(Scoreboard& board, namur::CompatibilityLedger* ledger,
                    const nlohmann::json& record);

  ServiceConfig config_;
  namur::DistributionBasket basket_;
  SessionStore store_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> live_;
  std::uint64_t counter_ = 0;
  std::atomic<bool> stopping_{false};
  Scoreboard board_;
  namur::CompatibilityLedger ledger_;
};

// Routes:
//   POST /sessions, GET /sessions/{id}, POST /sessions/{id}/advance,
//   POST /sessions/{id}/decision, GET /sessions/{id}/events (SSE),
//   GET /sessions/{id}/reveal, GET /stats
std::unique_ptr<httplib::Server> make_http_server(GameService& service);

// Blocks serving on config.bind_address:config.port.
int serve(const ServiceConfig& config);

}  // namespace robbins::service

#endif  // ROBBINS_SERVICE_HPP_
