// SPDX-License-Identifier: Apache-2.0
#include "vlab/admin/admin_server.hpp"

#include "vlab/journal/export.hpp"
#include "vlab/treatments/protocol.hpp"

#include "pages.hpp"

#include <httplib.h>

#include <condition_variable>
#include <deque>
#include <list>
#include <thread>

namespace vlab {

namespace {

int http_status(Errc code)
{
    switch (code) {
    case Errc::not_found:
    case Errc::scope_not_found:
        return 404;
    case Errc::conflict:
    case Errc::batch_closed:
    case Errc::batch_not_terminal:
    case Errc::flow_violation:
    case Errc::game_closed:
    case Errc::game_paused:
    case Errc::stale_stage:
        return 409;
    case Errc::parse_error:
    case Errc::validation_error:
    case Errc::invalid_argument:
    case Errc::type_conflict:
    case Errc::value_too_large:
    case Errc::protocol_violation:
        return 400;
    case Errc::auth_failed:
    case Errc::unauthorized:
    case Errc::second_login:
        return 401;
    case Errc::forbidden:
        return 403;
    case Errc::journal_failure:
        return 503;
    case Errc::io_error:
        return 500;
    }
    return 500;
}

void send_json(httplib::Response &res, int status, const Value &body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response &res, int status, std::string_view code, const std::string &message,
                std::optional<int> line = std::nullopt)
{
    Value body{{"error", code}, {"message", message}};
    if (line && *line > 0)
        body["line"] = *line;
    send_json(res, status, body);
}

Value parse_body(const httplib::Request &req)
{
    auto body = Value::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object())
        fail(Errc::invalid_argument, "request body must be a JSON object");
    return body;
}

bool flag(const httplib::Request &req, const char *name)
{
    if (!req.has_param(name))
        return false;
    auto v = req.get_param_value(name);
    return v.empty() || v == "1" || v == "true" || v == "yes";
}

// One /api/events connection.
struct Subscriber {
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<std::string> queue;
    bool closed = false;
};

constexpr std::size_t max_queued_events = 10000;

} // namespace

Value batch_summary(const EngineState &state, const BatchState &batch, TimeMs now)
{
    Value games{{"total", 0}};
    for (auto s : {GameStatus::pending, GameStatus::running, GameStatus::paused, GameStatus::ended,
                   GameStatus::cancelled})
        games[std::string(to_string(s))] = 0;
    for (const auto &[id, game] : state.games) {
        if (game.batch != batch.id)
            continue;
        games[std::string(to_string(game.status))] = games[std::string(to_string(game.status))].get<int>() + 1;
        games["total"] = games["total"].get<int>() + 1;
    }

    Value players{{"total", 0}};
    for (auto p : {Phase::consent, Phase::intro, Phase::lobby, Phase::game, Phase::outro, Phase::exited})
        players[std::string(to_string(p))] = 0;
    for (const auto &[id, player] : state.players) {
        if (player.batch != batch.id)
            continue;
        players[std::string(to_string(player.phase))] = players[std::string(to_string(player.phase))].get<int>() + 1;
        players["total"] = players["total"].get<int>() + 1;
    }

    Value lobby = Value::array();
    for (const auto &slot : batch.slots) {
        auto seated = slot.members.size();
        lobby.push_back(Value{
            {"game", slot.game.str()},
            {"treatment", slot.treatment},
            {"capacity", slot.capacity},
            {"seated", seated},
            {"needed", slot.capacity > seated ? slot.capacity - seated : 0},
            {"open", slot.open},
            {"waiting_ms", slot.opened_at ? Value(now - *slot.opened_at) : Value(nullptr)},
        });
    }

    return Value{{"id", batch.id.str()},
                 {"name", batch.spec.name},
                 {"protocol", batch.protocol.str()},
                 {"status", to_string(batch.status)},
                 {"offset", state.next_offset},
                 {"games", std::move(games)},
                 {"players", std::move(players)},
                 {"lobby", std::move(lobby)}};
}

struct AdminServer::Impl {
    Engine &engine;
    AccountStore accounts;
    AdminServerOptions options;
    AdminSessions sessions;
    httplib::Server http;
    std::thread thread;
    int port = 0;
    bool running = false;

    mutable std::mutex subscribers_mutex;
    std::list<std::shared_ptr<Subscriber>> subs;
    std::uint64_t next_event = 0;

    Impl(Engine &e, AccountStore a, AdminServerOptions o)
        : engine(e), accounts(std::move(a)), options(std::move(o)), sessions(options.session_ttl_ms, options.clock)
    {
    }

    std::optional<std::string> bearer(const httplib::Request &req)
    {
        std::string token;
        auto header = req.get_header_value("Authorization");
        if (header.rfind("Bearer ", 0) == 0)
            token = header.substr(7);
        else if (req.has_param("access_token"))
            // EventSource cannot set headers.
            token = req.get_param_value("access_token");
        if (token.empty())
            return std::nullopt;
        return sessions.validate(token);
    }

    using Handler = std::function<void(const httplib::Request &, httplib::Response &, const ActorId &)>;

    // Authenticated route with uniform error mapping.
    httplib::Server::Handler api(Handler handler)
    {
        return [this, handler = std::move(handler)](const httplib::Request &req, httplib::Response &res) {
            auto admin = bearer(req);
            if (!admin) {
                send_error(res, 401, "unauthorized", "missing, unknown or expired admin token");
                return;
            }
            guard(res, [&] { handler(req, res, "admin:" + *admin); });
        };
    }

    template <typename Fn>
    void guard(httplib::Response &res, Fn &&fn)
    {
        try {
            fn();
        } catch (const ProtocolError &e) {
            send_error(res, http_status(e.code()), to_string(e.code()), e.what(), e.line());
        } catch (const Error &e) {
            send_error(res, http_status(e.code()), to_string(e.code()), std::string(e.message()));
        } catch (const std::exception &e) {
            send_error(res, 500, "internal", e.what());
        }
    }

    void publish(const std::string &type, const Value &data)
    {
        std::lock_guard lock(subscribers_mutex);
        auto frame = "id: " + std::to_string(++next_event) + "\nevent: " + type + "\ndata: " + data.dump() + "\n\n";
        for (auto &sub : subs) {
            std::lock_guard sl(sub->mutex);
            if (sub->closed)
                continue;
            if (sub->queue.size() >= max_queued_events) {
                // A consumer this far behind reconnects and re-reads the summary.
                sub->closed = true;
            } else {
                sub->queue.push_back(frame);
            }
            sub->ready.notify_one();
        }
    }

    void publish_batch(const BatchId &id)
    {
        auto batch = engine.batch(id);
        if (!batch)
            return;
        publish("batch", Value{{"batch", id.str()}, {"status", to_string(batch->status)}});
    }

    std::shared_ptr<Subscriber> subscribe()
    {
        auto sub = std::make_shared<Subscriber>();
        std::lock_guard lock(subscribers_mutex);
        sub->queue.push_back("retry: 1000\nevent: hello\ndata: " +
                             Value{{"offset", engine.journal().next_offset()}}.dump() + "\n\n");
        subs.push_back(sub);
        return sub;
    }

    void unsubscribe(const std::shared_ptr<Subscriber> &sub)
    {
        std::lock_guard lock(subscribers_mutex);
        subs.remove(sub);
    }

    void close_all()
    {
        std::lock_guard lock(subscribers_mutex);
        for (auto &sub : subs) {
            std::lock_guard sl(sub->mutex);
            sub->closed = true;
            sub->ready.notify_all();
        }
    }

    void events(const httplib::Request &, httplib::Response &res)
    {
        auto sub = subscribe();
        auto keepalive = std::chrono::milliseconds(options.keepalive_ms);
        res.set_header("Cache-Control", "no-cache");
        res.set_header("X-Accel-Buffering", "no");
        res.set_chunked_content_provider(
            "text/event-stream",
            [sub, keepalive](std::size_t, httplib::DataSink &sink) {
                std::deque<std::string> batch;
                bool closed;
                {
                    std::unique_lock lock(sub->mutex);
                    sub->ready.wait_for(lock, keepalive, [&] { return !sub->queue.empty() || sub->closed; });
                    batch.swap(sub->queue);
                    closed = sub->closed;
                }
                if (batch.empty() && !closed)
                    batch.push_back(": keepalive\n\n");
                for (auto &frame : batch)
                    if (!sink.write(frame.data(), frame.size()))
                        return false;
                if (closed)
                    sink.done();
                return true;
            },
            [this, sub](bool) { unsubscribe(sub); });
    }

    void routes();
};

void AdminServer::Impl::routes()
{
    http.Get("/healthz", [this](const httplib::Request &, httplib::Response &res) {
        send_json(res, 200, Value{{"status", "ok"}, {"offset", engine.journal().next_offset()}});
    });

    http.Post("/api/login", [this](const httplib::Request &req, httplib::Response &res) {
        guard(res, [&] {
            auto body = parse_body(req);
            auto user = body.value("user", std::string());
            auto password = body.value("password", std::string());
            if (!accounts.verify(user, password)) {
                send_error(res, 401, "auth-failed", "bad credentials");
                return;
            }
            auto issued = sessions.issue(user);
            send_json(res, 200, Value{{"token", issued.token}, {"expires_at", issued.expires_at}});
        });
    });

    http.Post("/api/logout", api([this](const httplib::Request &req, httplib::Response &res, const ActorId &) {
                  auto header = req.get_header_value("Authorization");
                  if (header.rfind("Bearer ", 0) == 0)
                      sessions.revoke(header.substr(7));
                  res.status = 204;
              }));

    http.Get("/api/protocols", api([this](const httplib::Request &, httplib::Response &res, const ActorId &) {
                 auto list = engine.with_state([](const EngineState &s) {
                     Value out = Value::array();
                     for (const auto &[id, p] : s.protocols)
                         out.push_back(Value{{"id", id.str()}, {"hash", p.hash}});
                     return out;
                 });
                 send_json(res, 200, list);
             }));

    http.Post("/api/protocols", api([this](const httplib::Request &req, httplib::Response &res, const ActorId &actor) {
                  auto id = engine.import_protocol(req.body, actor);
                  auto protocol = parse_protocol(req.body);
                  Value treatments = Value::array();
                  for (const auto &t : protocol.treatments)
                      treatments.push_back(t.name);
                  Value batches = Value::array();
                  for (const auto &b : protocol.batches)
                      batches.push_back(b.name);
                  publish("protocol", Value{{"protocol", id.str()}});
                  send_json(res, 201, Value{{"id", id.str()}, {"treatments", treatments}, {"batches", batches}});
              }));

    http.Get(R"(/api/protocols/([^/]+))",
             api([this](const httplib::Request &req, httplib::Response &res, const ActorId &) {
                 ProtocolId id(req.matches[1].str());
                 auto text = engine.with_state([&](const EngineState &s) -> std::optional<std::string> {
                     auto it = s.protocols.find(id);
                     if (it == s.protocols.end())
                         return std::nullopt;
                     return it->second.text;
                 });
                 if (!text)
                     fail(Errc::not_found, "unknown protocol " + id.str());
                 res.set_content(*text, "application/yaml");
             }));

    http.Get("/api/batches", api([this](const httplib::Request &, httplib::Response &res, const ActorId &) {
                 auto now = engine.scheduler().now();
                 send_json(res, 200, engine.with_state([&](const EngineState &s) {
                     Value out = Value::array();
                     for (const auto &[id, b] : s.batches)
                         out.push_back(batch_summary(s, b, now));
                     return out;
                 }));
             }));

    // {"protocol": id, "batch": "<name in protocol>" | {spec}}
    http.Post("/api/batches", api([this](const httplib::Request &req, httplib::Response &res, const ActorId &actor) {
                  auto body = parse_body(req);
                  if (!body.contains("protocol") || !body["protocol"].is_string())
                      fail(Errc::invalid_argument, "batch request needs a protocol id");
                  ProtocolId protocol_id(body["protocol"].get<std::string>());
                  BatchSpec spec;
                  const auto &batch = body.contains("batch") ? body["batch"] : Value();
                  if (batch.is_object()) {
                      spec = batch_spec_from_value(batch);
                  } else if (batch.is_string()) {
                      auto text = engine.with_state([&](const EngineState &s) -> std::optional<std::string> {
                          auto it = s.protocols.find(protocol_id);
                          if (it == s.protocols.end())
                              return std::nullopt;
                          return it->second.text;
                      });
                      if (!text)
                          fail(Errc::not_found, "unknown protocol " + protocol_id.str());
                      auto protocol = parse_protocol(*text);
                      auto *named = protocol.batch(batch.get<std::string>());
                      if (!named)
                          fail(Errc::not_found, "protocol has no batch '" + batch.get<std::string>() + "'");
                      spec = *named;
                  } else {
                      fail(Errc::invalid_argument, "batch must be a batch name or a batch spec object");
                  }
                  auto id = engine.create_batch(protocol_id, spec, actor);
                  publish_batch(id);
                  auto now = engine.scheduler().now();
                  send_json(res, 201, engine.with_state([&](const EngineState &s) {
                      return batch_summary(s, s.batches.at(id), now);
                  }));
              }));

    auto batch_read = [this](const BatchId &id) {
        auto now = engine.scheduler().now();
        return engine.with_state([&](const EngineState &s) {
            auto it = s.batches.find(id);
            if (it == s.batches.end())
                fail(Errc::not_found, "unknown batch " + id.str());
            return batch_summary(s, it->second, now);
        });
    };

    http.Get(R"(/api/batches/([^/]+))",
             api([batch_read](const httplib::Request &req, httplib::Response &res, const ActorId &) {
                 send_json(res, 200, batch_read(BatchId(req.matches[1].str())));
             }));

    http.Post(R"(/api/batches/([^/]+)/start)",
              api([this, batch_read](const httplib::Request &req, httplib::Response &res, const ActorId &actor) {
                  BatchId id(req.matches[1].str());
                  engine.start_batch(id, actor);
                  publish_batch(id);
                  send_json(res, 200, batch_read(id));
              }));

    http.Post(R"(/api/batches/([^/]+)/stop)",
              api([this, batch_read](const httplib::Request &req, httplib::Response &res, const ActorId &actor) {
                  BatchId id(req.matches[1].str());
                  engine.stop_batch(id, actor);
                  publish_batch(id);
                  send_json(res, 200, batch_read(id));
              }));

    // ?format=csv|jsonl&include_identifiers=1&partial=1
    http.Get(R"(/api/batches/([^/]+)/export)",
             api([this](const httplib::Request &req, httplib::Response &res, const ActorId &actor) {
                 BatchId id(req.matches[1].str());
                 ExportOptions options;
                 if (req.has_param("format")) {
                     auto format = parse_export_format(req.get_param_value("format"));
                     if (!format)
                         fail(Errc::invalid_argument, "format must be csv or jsonl");
                     options.format = *format;
                 }
                 options.include_identifiers = flag(req, "include_identifiers");
                 options.partial = flag(req, "partial");
                 auto bundle = export_batch(engine.snapshot(), id, options);
                 engine.record_export(id, bundle.manifest, actor);
                 Value files = Value::object();
                 for (const auto &file : bundle.files)
                     files[file.name] = file.content;
                 send_json(res, 200, Value{{"manifest", bundle.manifest}, {"files", std::move(files)}});
             }));

    http.Get(R"(/api/games/([^/]+))", api([this](const httplib::Request &req, httplib::Response &res, const ActorId &) {
                 GameId id(req.matches[1].str());
                 auto game = engine.game(id);
                 if (!game)
                     fail(Errc::not_found, "unknown game " + id.str());
                 send_json(res, 200, to_value(*game));
             }));

    http.Post(R"(/api/games/([^/]+)/terminate)",
              api([this](const httplib::Request &req, httplib::Response &res, const ActorId &actor) {
                  GameId id(req.matches[1].str());
                  engine.terminate_game(id, actor);
                  auto game = engine.game(id);
                  send_json(res, 200, Value{{"id", id.str()}, {"status", to_string(game->status)}});
              }));

    http.Get(R"(/api/players/([^/]+))",
             api([this](const httplib::Request &req, httplib::Response &res, const ActorId &) {
                 PlayerId id(req.matches[1].str());
                 auto player = engine.player(id);
                 if (!player)
                     fail(Errc::not_found, "unknown player " + id.str());
                 auto body = to_value(*player);
                 body.erase("token_hash");
                 send_json(res, 200, body);
             }));

    http.Post(R"(/api/players/([^/]+)/retire)",
              api([this](const httplib::Request &req, httplib::Response &res, const ActorId &actor) {
                  PlayerId id(req.matches[1].str());
                  engine.retire_player(id, actor);
                  auto player = engine.player(id);
                  send_json(res, 200, Value{{"id", id.str()}, {"phase", to_string(player->phase)}});
              }));

    http.Get("/api/events", [this](const httplib::Request &req, httplib::Response &res) {
        if (!bearer(req)) {
            send_error(res, 401, "unauthorized", "missing, unknown or expired admin token");
            return;
        }
        events(req, res);
    });

    // Anything else under /api is an unknown route, but only after auth.
    auto unknown = api([](const httplib::Request &req, httplib::Response &, const ActorId &) {
        fail(Errc::not_found, "no route " + req.method + " " + req.path);
    });
    http.Get(R"(/api/.*)", unknown);
    http.Post(R"(/api/.*)", unknown);

    for (auto [mount, page] : {std::pair{"/admin", admin_page()}, std::pair{"/play-ui", play_page()}}) {
        std::string prefix = mount;
        http.Get(prefix, [prefix](const httplib::Request &, httplib::Response &res) {
            res.set_redirect(prefix + "/");
        });
        if (options.static_dir && std::filesystem::is_directory(*options.static_dir / prefix.substr(1))) {
            http.set_mount_point(prefix, (*options.static_dir / prefix.substr(1)).string());
        } else {
            std::string html(page);
            http.Get(prefix + "/", [html](const httplib::Request &, httplib::Response &res) {
                res.set_content(html, "text/html; charset=utf-8");
            });
        }
    }
}

AdminServer::AdminServer(Engine &engine, AccountStore accounts, AdminServerOptions options)
    : impl_(std::make_unique<Impl>(engine, std::move(accounts), std::move(options)))
{
    auto threads = impl_->options.threads;
    impl_->http.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    // httplib also sets SO_REUSEPORT, which would let a second server share the port.
    impl_->http.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void *>(&yes), sizeof(yes));
    });
    impl_->routes();
}

AdminServer::~AdminServer()
{
    stop();
}

void AdminServer::start()
{
    if (impl_->running)
        return;
    auto &o = impl_->options;
    if (o.port == 0) {
        impl_->port = impl_->http.bind_to_any_port(o.address);
        if (impl_->port < 0)
            fail(Errc::io_error, "cannot bind admin server on " + o.address);
    } else {
        if (!impl_->http.bind_to_port(o.address, o.port))
            fail(Errc::io_error, "cannot bind admin server on " + o.address + ":" + std::to_string(o.port));
        impl_->port = o.port;
    }
    impl_->running = true;
    impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
}

void AdminServer::stop()
{
    if (!impl_->running)
        return;
    impl_->running = false;
    impl_->close_all();
    impl_->http.stop();
    if (impl_->thread.joinable())
        impl_->thread.join();
}

int AdminServer::port() const noexcept
{
    return impl_->port;
}

void AdminServer::publish(const std::string &type, const Value &data)
{
    impl_->publish(type, data);
}

std::size_t AdminServer::subscribers() const
{
    std::lock_guard lock(impl_->subscribers_mutex);
    return impl_->subs.size();
}

void AdminServer::on_change(const ChangeEvent &)
{
    // Attribute traffic stays on the player channel; the dashboard polls counts.
}

void AdminServer::on_player_update(const PlayerId &id)
{
    auto player = impl_->engine.player(id);
    if (!player)
        return;
    impl_->publish("player", Value{{"player", id.str()},
                                   {"phase", to_string(player->phase)},
                                   {"status", to_string(player->status)},
                                   {"game", player->current_game ? Value(player->current_game->str()) : Value()},
                                   {"batch", player->batch ? Value(player->batch->str()) : Value()},
                                   {"reason", player->reason ? Value(*player->reason) : Value()}});
}

void AdminServer::on_game_update(const GameId &id, bool entered)
{
    auto game = impl_->engine.game(id);
    if (!game)
        return;
    Value body{{"game", id.str()},
               {"batch", game->batch.str()},
               {"status", to_string(game->status)},
               {"cursor", to_value(game->cursor)},
               {"players", game->active_players().size()},
               {"entered", entered}};
    if (auto *stage = game->current_stage())
        body["stage"] = stage->id.str();
    impl_->publish("game", body);
    if (is_terminal(game->status))
        impl_->publish_batch(game->batch);
}

void AdminServer::on_lobby_update(const BatchId &batch, const GameId &game)
{
    auto state = impl_->engine.batch(batch);
    if (!state)
        return;
    auto *slot = state->slot(game);
    if (!slot)
        return;
    auto seated = slot->members.size();
    impl_->publish("lobby", Value{{"batch", batch.str()},
                                  {"game", game.str()},
                                  {"capacity", slot->capacity},
                                  {"seated", seated},
                                  {"needed", slot->capacity > seated ? slot->capacity - seated : 0},
                                  {"open", slot->open}});
}

} // namespace vlab
