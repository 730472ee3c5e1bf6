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

#include "robbins/service.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "robbins/errors.hpp"

namespace robbins::service {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidArgument("config: bad value for " + key + ": '" + v + "'");
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes `text` next to `path` and renames it into place.
void atomic_write(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

bool valid_id(const std::string& id) {
  static const std::regex re("^[A-Za-z0-9_-]{1,64}$");
  return std::regex_match(id, re);
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json arrival_json(std::size_t index, const namur::Arrival& a) {
  return {{"index", index}, {"t", a.t}, {"rel_rank", a.rel_rank}};
}

}  // namespace

void ServiceConfig::validate() const {
  if (!(session_ttl_seconds > 0.0)) throw InvalidArgument("config: TTL must be > 0");
  if (port < 0 || port > 65535) throw InvalidArgument("config: port out of range");
  if (default_m < 1 || default_m > namur::kMaxSessionM) {
    throw InvalidArgument("config: default_m out of range");
  }
  std::error_code ec;
  fs::create_directories(data_dir, ec);
  const fs::path probe = data_dir / ".write-probe";
  std::ofstream out(probe);
  if (!out) throw InvalidArgument("config: data_dir not writable: " + data_dir.string());
  out.close();
  fs::remove(probe, ec);
}

ServiceConfig parse_config(const std::string& text) {
  ServiceConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config: line " + std::to_string(lineno) + " lacks '='");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "bind_address") c.bind_address = value;
    else if (key == "port") c.port = parse_number<int>(key, value);
    else if (key == "data_dir") c.data_dir = value;
    else if (key == "default_m") c.default_m = parse_number<std::size_t>(key, value);
    else if (key == "basket_file") c.basket_file = value;
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "session_ttl_seconds") c.session_ttl_seconds = parse_number<double>(key, value);
    else if (key == "beta") c.beta = parse_number<double>(key, value);
    else if (key == "exact_decay") c.exact_decay = parse_number<double>(key, value);
    else throw InvalidArgument("config: unknown key '" + key + "'");
  }
  return c;
}

ServiceConfig load_config(const fs::path& path) {
  ServiceConfig c = parse_config(read_file(path));
  const fs::path base = path.parent_path();
  if (c.data_dir.is_relative()) c.data_dir = base / c.data_dir;
  if (!c.basket_file.empty() && c.basket_file.is_relative()) {
    c.basket_file = base / c.basket_file;
  }
  return c;
}

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_ / "sessions");
  std::vector<std::string> listed;
  const fs::path index = dir_ / "index.json";
  if (fs::exists(index)) {
    try {
      for (const auto& e : json::parse(read_file(index))) {
        listed.push_back(e.at("id").get<std::string>());
      }
    } catch (const json::exception&) {
      listed.clear();  // rebuilt from the directory below
    }
  }
  for (const auto& id : listed) {
    if (valid_id(id) && fs::exists(path_of(id)) &&
        std::find(order_.begin(), order_.end(), id) == order_.end()) {
      order_.push_back(id);
    }
  }
  std::vector<std::string> found;
  for (const auto& f : fs::directory_iterator(dir_ / "sessions")) {
    const auto name = f.path().filename().string();
    if (name.ends_with(".tmp")) {
      fs::remove(f.path());
    } else if (f.path().extension() == ".json") {
      found.push_back(f.path().stem().string());
    }
  }
  std::sort(found.begin(), found.end());
  for (const auto& id : found) {
    if (std::find(order_.begin(), order_.end(), id) == order_.end()) {
      order_.push_back(id);
    }
  }
  write_index();
}

fs::path SessionStore::path_of(const std::string& id) const {
  return dir_ / "sessions" / (id + ".json");
}

void SessionStore::write_index() const {
  json index = json::array();
  for (const auto& id : order_) {
    index.push_back({{"id", id}, {"path", "sessions/" + id + ".json"}});
  }
  atomic_write(dir_ / "index.json", index.dump(1));
}

void SessionStore::put(const std::string& id, const std::string& record) {
  if (!valid_id(id)) throw InvalidArgument("store: bad id '" + id + "'");
  std::lock_guard lock(mu_);
  const fs::path path = path_of(id);
  if (fs::exists(path)) {
    if (read_file(path) == record) return;
    throw Conflict("store: record " + id + " is immutable");
  }
  atomic_write(path, record);
  order_.push_back(id);
  write_index();
}

std::optional<std::string> SessionStore::get(const std::string& id) const {
  if (!valid_id(id)) return std::nullopt;
  std::lock_guard lock(mu_);
  const fs::path path = path_of(id);
  if (!fs::exists(path)) return std::nullopt;
  return read_file(path);
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(mu_);
  return order_;
}

CreateRequest create_request_from_json(const json& body) {
  CreateRequest r;
  if (body.is_null()) return r;
  if (!body.is_object()) throw InvalidArgument("request body must be an object");
  try {
    if (body.contains("M") && !body["M"].is_null()) {
      const auto m = body["M"].get<long long>();
      if (m < 1) throw InvalidArgument("M must be >= 1");
      r.m = static_cast<std::size_t>(m);
    }
    if (body.contains("basket") && !body["basket"].is_null()) r.basket = body["basket"];
    r.mode = body.value("mode", "human");
    if (body.contains("objective") && !body["objective"].is_null()) {
      r.objective = body["objective"].get<std::string>();
    }
    r.secret_objective = body.value("secret", false);
  } catch (const json::exception& ex) {
    throw InvalidArgument(std::string("bad request: ") + ex.what());
  }
  return r;
}

json PlayerStats::to_json() const {
  const double g = static_cast<double>(games);
  return {{"games", games},
          {"mean_rank", games ? static_cast<double>(rank_sum) / g : 0.0},
          {"success_rate", games ? static_cast<double>(successes) / g : 0.0}};
}

GameService::GameService(ServiceConfig config)
    : config_(std::move(config)),
      store_((config_.validate(), config_.data_dir)),
      ledger_(namur::CompatibilityLedger::with_default_grid(config_.beta,
                                                            config_.exact_decay)) {
  basket_ = config_.basket_file.empty()
                ? namur::default_basket()
                : namur::basket_from_json(json::parse(read_file(config_.basket_file)));
  const auto ids = store_.ids();
  counter_ = ids.size();
  for (const auto& id : ids) {
    tally(board_, &ledger_, json::parse(*store_.get(id)));
  }
}

void GameService::tally(Scoreboard& board, namur::CompatibilityLedger* ledger,
                        const json& record) {
  const auto& options = record.at("options");
  auto objective = namur::exact_rank(1);
  if (!options.at("objective").is_null()) {
    objective = *namur::parse_objective(options["objective"].get<std::string>());
  }
  auto add = [&](PlayerStats& s, const json& o) {
    const auto r = o.at("final_rank").get<std::size_t>();
    const auto n = o.at("N").get<std::size_t>();
    ++s.games;
    s.rank_sum += r;
    if (objective.satisfied(r, n)) ++s.successes;
  };
  if (options.at("mode") == "human") {
    add(board.human, record.at("outcome"));
    if (ledger != nullptr) {
      ledger->update(record.at("id").get<std::string>(),
                     record["outcome"]["final_rank"].get<std::size_t>(),
                     record["outcome"]["N"].get<std::size_t>());
    }
  }
  add(board.machine, record.at("machine_outcome"));
}

void GameService::push(Entry& entry, std::string type, json data) {
  entry.events.push_back(
      Event{entry.events.size() + 1, std::move(type), std::move(data)});
  entry.cv.notify_all();
}

void GameService::on_closed(Entry& entry) {
  const auto& s = *entry.session;
  const std::string record = s.record().dump();
  store_.put(s.id(), record);
  {
    std::lock_guard lock(mu_);
    tally(board_, &ledger_, json::parse(record));
  }
  push(entry, "closed", {{"status", namur::to_string(s.status())}});
}

void GameService::expire_idle() {
  const double now = now_seconds();
  for (auto it = live_.begin(); it != live_.end();) {
    if (now - it->second->last_touch > config_.session_ttl_seconds) {
      it = live_.erase(it);
    } else {
      ++it;
    }
  }
}

std::string GameService::create(const CreateRequest& request) {
  namur::SessionOptions options;
  options.mode = request.mode;
  options.secret_objective = request.secret_objective;
  if (request.objective) {
    options.objective = namur::parse_objective(*request.objective);
    if (!options.objective) {
      throw InvalidArgument("unknown objective '" + *request.objective + "'");
    }
  }
  const auto basket = request.basket ? namur::basket_from_json(*request.basket) : basket_;
  const std::size_t m = request.m.value_or(config_.default_m);
  std::string id;
  std::uint64_t seed = 0;
  {
    std::lock_guard lock(mu_);
    expire_idle();
    do {
      ++counter_;
      seed = mix64(config_.seed ^ mix64(counter_));
      id = hex16(seed);
    } while (live_.count(id) != 0 || store_.get(id).has_value());
  }
  auto entry = std::make_shared<Entry>();
  entry->session = namur::Session::create(id, m, basket, seed, options);
  entry->last_touch = now_seconds();
  std::lock_guard elock(entry->mu);
  {
    std::lock_guard lock(mu_);
    live_[id] = entry;
  }
  if (entry->session->closed()) {
    const auto st = entry->session->public_state();
    for (std::size_t i = 0; i < st.arrivals.size(); ++i) {
      push(*entry, "arrival", arrival_json(i + 1, st.arrivals[i]));
      push(*entry, "decision", {{"index", i + 1}, {"decision", st.decisions[i]}});
    }
    on_closed(*entry);
  }
  return id;
}

std::shared_ptr<GameService::Entry> GameService::find(const std::string& id) {
  {
    std::lock_guard lock(mu_);
    if (auto it = live_.find(id); it != live_.end()) {
      it->second->last_touch = now_seconds();
      return it->second;
    }
  }
  const auto record = store_.get(id);
  if (!record) throw NotFound("unknown session " + id);
  auto entry = std::make_shared<Entry>();
  entry->session = namur::Session::replay(json::parse(*record));
  entry->last_touch = now_seconds();
  const auto st = entry->session->public_state();
  for (std::size_t i = 0; i < st.arrivals.size(); ++i) {
    push(*entry, "arrival", arrival_json(i + 1, st.arrivals[i]));
    push(*entry, "decision", {{"index", i + 1}, {"decision", st.decisions[i]}});
  }
  push(*entry, "closed", {{"status", st.status}});
  std::lock_guard lock(mu_);
  return live_.try_emplace(id, entry).first->second;
}

namur::PublicState GameService::state(const std::string& id) {
  auto e = find(id);
  std::lock_guard lock(e->mu);
  return e->session->public_state();
}

json GameService::advance(const std::string& id) {
  auto e = find(id);
  std::lock_guard lock(e->mu);
  auto& s = *e->session;
  const std::size_t before = s.decisions().size();
  const auto arrival = s.advance();
  if (s.decisions().size() > before) {
    push(*e, "decision", {{"index", before + 1}, {"decision", "PASS"}});
  }
  json out = {{"arrival", nullptr}};
  if (arrival) {
    const std::size_t index = s.public_history().times.size();
    out["arrival"] = arrival_json(index, *arrival);
    push(*e, "arrival", out["arrival"]);
  }
  if (s.closed()) on_closed(*e);
  out["state"] = s.public_state().to_json();
  return out;
}

namur::PublicState GameService::decide(const std::string& id, Decision d) {
  auto e = find(id);
  std::lock_guard lock(e->mu);
  auto& s = *e->session;
  s.decide(d);
  push(*e, "decision", {{"index", s.decisions().size()},
                        {"decision", d == Decision::kAccept ? "ACCEPT" : "PASS"}});
  if (s.closed()) on_closed(*e);
  return s.public_state();
}

std::vector<Event> GameService::events(const std::string& id, std::uint64_t after,
                                       int wait_ms, bool* closed) {
  auto e = find(id);
  std::unique_lock lock(e->mu);
  e->cv.wait_for(lock, std::chrono::milliseconds(wait_ms), [&] {
    return e->events.size() > after || e->session->closed() || stopping_;
  });
  std::vector<Event> out;
  for (std::size_t i = after; i < e->events.size(); ++i) out.push_back(e->events[i]);
  if (closed != nullptr) *closed = e->session->closed() || stopping_;
  return out;
}

std::string GameService::reveal(const std::string& id) {
  auto e = find(id);
  {
    std::lock_guard lock(e->mu);
    if (!e->session->closed()) throw Conflict("session " + id + " is still open");
  }
  return *store_.get(id);
}

Scoreboard GameService::scoreboard() {
  std::lock_guard lock(mu_);
  return board_;
}

Scoreboard GameService::recompute_scoreboard() {
  Scoreboard board;
  for (const auto& id : store_.ids()) {
    tally(board, nullptr, json::parse(*store_.get(id)));
  }
  return board;
}

json GameService::stats() {
  std::lock_guard lock(mu_);
  return {{"human", board_.human.to_json()},
          {"machine", board_.machine.to_json()},
          {"ledger", ledger_.to_json()}};
}

void GameService::shutdown() {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    for (auto& [id, e] : live_) entries.push_back(e);
  }
  for (auto& e : entries) {
    std::lock_guard lock(e->mu);
    e->cv.notify_all();
  }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const InvalidArgument& ex) {
    send_json(res, {{"error", ex.what()}}, 400);
  } catch (const NotFound& ex) {
    send_json(res, {{"error", ex.what()}}, 404);
  } catch (const Conflict& ex) {
    send_json(res, {{"error", ex.what()}}, 409);
  } catch (const ResourceBound& ex) {
    send_json(res, {{"error", ex.what()}}, 422);
  } catch (const json::exception& ex) {
    send_json(res, {{"error", std::string("bad json: ") + ex.what()}}, 400);
  } catch (const std::exception& ex) {
    send_json(res, {{"error", ex.what()}}, 500);
  }
}

json parse_body(const httplib::Request& req) {
  if (trim(req.body).empty()) return json(nullptr);
  return json::parse(req.body);
}

std::string sse_frame(const Event& e) {
  return "id: " + std::to_string(e.id) + "\nevent: " + e.type +
         "\ndata: " + e.data.dump() + "\n\n";
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(GameService& service) {
  auto server = std::make_unique<httplib::Server>();
  auto& s = *server;
  s.Post("/sessions", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto id = service.create(create_request_from_json(parse_body(req)));
      send_json(res, {{"id", id}}, 201);
    });
  });
  s.Get("/sessions/:id", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, service.state(req.path_params.at("id")).to_json()); });
  });
  s.Post("/sessions/:id/advance", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, service.advance(req.path_params.at("id"))); });
  });
  s.Post("/sessions/:id/decision", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      std::string d;
      if (body.is_object()) d = body.value("decision", "");
      else if (body.is_string()) d = body.get<std::string>();
      if (d != "ACCEPT" && d != "PASS") {
        throw InvalidArgument("decision must be ACCEPT or PASS");
      }
      send_json(res, service.decide(req.path_params.at("id"),
                                    d == "ACCEPT" ? Decision::kAccept : Decision::kPass)
                         .to_json());
    });
  });
  s.Get("/sessions/:id/events", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.path_params.at("id");
      service.state(id);  // 404 before the stream starts
      std::uint64_t after = 0;
      std::string cursor = req.get_header_value("Last-Event-ID");
      if (cursor.empty() && req.has_param("after")) cursor = req.get_param_value("after");
      if (!cursor.empty()) after = std::stoull(cursor);
      auto position = std::make_shared<std::uint64_t>(after);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [&service, id, position](std::size_t, httplib::DataSink& sink) {
            bool closed = false;
            const auto events = service.events(id, *position, 1000, &closed);
            for (const auto& e : events) {
              const std::string frame = sse_frame(e);
              if (!sink.write(frame.data(), frame.size())) return false;
              *position = e.id;
            }
            if (closed) {
              sink.done();
            } else if (events.empty()) {
              static const std::string keepalive = ": keepalive\n\n";
              if (!sink.write(keepalive.data(), keepalive.size())) return false;
            }
            return true;
          });
    });
  });
  s.Get("/sessions/:id/reveal", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      res.set_content(service.reveal(req.path_params.at("id")), "application/json");
    });
  });
  s.Get("/stats", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, service.stats()); });
  });
  return server;
}

int serve(const ServiceConfig& config) {
  GameService service(config);
  auto server = make_http_server(service);
  std::cerr << "serving on " << config.bind_address << ":" << config.port << "\n";
  if (!server->listen(config.bind_address, config.port)) {
    std::cerr << "cannot listen on " << config.bind_address << ":" << config.port << "\n";
    return 1;
  }
  service.shutdown();
  return 0;
}

}  // namespace robbins::service
