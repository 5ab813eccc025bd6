// SPDX-License-Identifier: Apache-2.0
#include "vlab/bots/scenario.hpp"

#include "vlab/bots/loopback.hpp"
#include "vlab/common/error.hpp"
#include "vlab/journal/journal.hpp"
#include "vlab/journal/replay.hpp"
#include "vlab/lifecycle/engine.hpp"
#include "vlab/runtime/thread_scheduler.hpp"
#include "vlab/runtime/virtual_scheduler.hpp"
#include "vlab/sync/visibility.hpp"

#include <chrono>
#include <sstream>
#include <thread>

namespace vlab {

namespace {

const ActorId scenario_actor("admin:scenario");

std::uint64_t mix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

const char *hook_token(const std::string &hook)
{
    if (hook == "on_game_init")
        return "init";
    if (hook == "on_round_start")
        return "rs";
    if (hook == "on_stage_start")
        return "ss";
    if (hook == "on_stage_end")
        return "se";
    if (hook == "on_round_end")
        return "re";
    if (hook == "on_game_end")
        return "ge";
    return "?";
}

std::size_t seat_count(const Protocol &protocol, const BatchSpec &spec)
{
    std::size_t seats = 0;
    for (auto &q : spec.quotas)
        if (auto *t = protocol.treatment(q.treatment))
            seats += static_cast<std::size_t>(q.games) * static_cast<std::size_t>(t->player_count());
    return seats;
}

struct Run {
    const ScenarioConfig &config;
    std::unique_ptr<Scheduler> scheduler;
    VirtualScheduler *virt = nullptr;
    ThreadScheduler *threads = nullptr;
    MemoryStorage *memory = nullptr;
    std::unique_ptr<Journal> journal;
    std::unique_ptr<Engine> engine;
    std::unique_ptr<Hub> hub;
    std::vector<std::unique_ptr<BotClient>> bots;

    explicit Run(const ScenarioConfig &c) : config(c)
    {
        std::unique_ptr<TokenSource> tokens;
        if (config.clock == ClockKind::virtual_clock) {
            auto v = std::make_unique<VirtualScheduler>();
            virt = v.get();
            scheduler = std::move(v);
            tokens = std::make_unique<SeededTokenSource>(mix(config.seed));
        } else {
            auto t = std::make_unique<ThreadScheduler>(std::max<std::size_t>(1, config.workers));
            threads = t.get();
            scheduler = std::move(t);
            tokens = std::make_unique<SecureTokenSource>();
        }
        std::unique_ptr<JournalStorage> storage;
        if (config.journal_path) {
            storage = std::make_unique<FileStorage>(*config.journal_path);
        } else {
            auto m = std::make_unique<MemoryStorage>();
            memory = m.get();
            storage = std::move(m);
        }
        journal = std::make_unique<Journal>(std::move(storage));
        engine = std::make_unique<Engine>(*scheduler, *journal, config.experiment, std::move(tokens));
        hub = std::make_unique<Hub>(*engine, config.hub);
    }

    ~Run()
    {
        if (threads)
            threads->stop();
        bots.clear();
        hub.reset();
        engine.reset();
    }

    bool finished(const BatchId &batch) const
    {
        auto b = engine->batch(batch);
        if (!b || !is_terminal(b->status))
            return false;
        for (auto &bot : bots)
            if (!bot->status().done)
                return false;
        return true;
    }

    // Drains in-flight work without moving virtual time.
    void settle()
    {
        if (virt) {
            virt->run_ready();
            return;
        }
        int quiet = 0;
        while (quiet < 10) {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            quiet = threads->idle() ? quiet + 1 : 0;
        }
    }
};

std::string render_value(const Value &v)
{
    auto s = v.dump();
    return s.size() > 80 ? s.substr(0, 77) + "..." : s;
}

void check_convergence(const Run &run, const EngineState &state, ScenarioReport &report)
{
    for (std::size_t i = 0; i < run.bots.size(); ++i) {
        auto &bot = *run.bots[i];
        if (!bot.status().connected || bot.player().empty())
            continue;
        PlayerId viewer(bot.player());
        ClientView expected;
        for (auto &a : state.attributes)
            if (can_see(state, viewer, a.scope, a.key))
                expected[{a.scope.to_string(), a.key}] = ViewEntry{a.value, a.version};
        ClientView actual;
        for (auto &[key, entry] : bot.view())
            if (entry.version > 0)
                actual[key] = entry;
        if (actual == expected)
            continue;
        for (auto &[key, entry] : expected) {
            auto it = actual.find(key);
            if (it == actual.end())
                report.divergences.push_back(bot.identifier() + " missing " + key.first + "/" + key.second);
            else if (!(it->second == entry))
                report.divergences.push_back(bot.identifier() + " holds " + key.first + "/" + key.second + " v" +
                                             std::to_string(it->second.version) + " " +
                                             render_value(it->second.value) + ", server v" +
                                             std::to_string(entry.version) + " " + render_value(entry.value));
        }
        for (auto &[key, entry] : actual)
            if (!expected.count(key))
                report.divergences.push_back(bot.identifier() + " holds invisible " + key.first + "/" + key.second);
    }
    report.converged = report.divergences.empty();
}

} // namespace

BatchSpec default_scenario_batch(const Protocol &protocol)
{
    if (!protocol.batches.empty())
        return protocol.batches.front();
    if (protocol.lobbies.empty())
        fail(Errc::validation_error, "protocol declares no lobby to run a scenario batch in");
    BatchSpec spec;
    spec.name = "scenario";
    spec.method = AssignmentMethod::complete;
    spec.lobby = protocol.lobbies.front().name;
    for (auto &t : protocol.treatments)
        spec.quotas.push_back({t.name, 1});
    return spec;
}

bool hook_trace_matches(const std::vector<std::string> &trace, std::optional<std::size_t> rounds)
{
    std::size_t i = 0;
    auto take = [&](const char *token) {
        if (i < trace.size() && trace[i] == token) {
            ++i;
            return true;
        }
        return false;
    };
    if (!take("init"))
        return false;
    std::size_t seen = 0;
    while (take("rs")) {
        std::size_t stages = 0;
        while (take("ss")) {
            if (!take("se"))
                return false;
            ++stages;
        }
        if (stages == 0 || !take("re"))
            return false;
        ++seen;
    }
    if (seen == 0 || !take("ge") || i != trace.size())
        return false;
    return !rounds || *rounds == seen;
}

ScenarioReport run_scenario(const ScenarioConfig &config)
{
    auto wall_start = std::chrono::steady_clock::now();
    ScenarioReport report;
    auto protocol = parse_protocol(config.protocol_yaml);
    auto spec = config.batch ? *config.batch : default_scenario_batch(protocol);
    if (config.clock == ClockKind::virtual_clock && !spec.seed)
        spec.seed = mix(config.seed ^ 0x5eedULL);

    Run run(config);
    run.engine->set_listener(run.hub.get());
    run.engine->record_configuration(Value{{"scenario", true},
                                           {"seed", config.seed},
                                           {"clock", config.clock == ClockKind::virtual_clock ? "virtual" : "real"}},
                                     scenario_actor);
    auto pid = run.engine->import_protocol(config.protocol_yaml, scenario_actor);
    report.batch = run.engine->create_batch(pid, spec, scenario_actor);
    run.engine->start_batch(report.batch, scenario_actor);

    auto seats = seat_count(protocol, spec);
    std::size_t fixed = 0;
    for (auto &g : config.bots)
        fixed += g.count;
    auto connector = config.transport ? config.transport(*run.hub) : loopback_connector(*run.hub);
    std::size_t index = 0;
    for (auto &group : config.bots) {
        auto count = group.count > 0 ? group.count : (seats > fixed ? seats - fixed : 0);
        for (std::size_t k = 0; k < count; ++k, ++index) {
            auto identifier = "sim-" + std::to_string(config.seed) + "-" + group.script.name + "-" + std::to_string(index);
            auto seed = mix(config.seed * 1000003ULL + group.script.seed * 7919ULL + index);
            run.bots.push_back(std::make_unique<BotClient>(*run.scheduler, connector, group.script, identifier, seed));
        }
    }
    if (run.bots.size() < seats)
        report.failures.push_back("only " + std::to_string(run.bots.size()) + " bots for " + std::to_string(seats) +
                                  " seats");

    auto starter = run.scheduler->make_strand("scenario");
    for (std::size_t i = 0; i < run.bots.size(); ++i) {
        auto *bot = run.bots[i].get();
        if (config.arrival_gap_ms > 0)
            starter->post_at(run.scheduler->now() + static_cast<TimeMs>(i) * config.arrival_gap_ms,
                             [bot] { bot->start(); });
        else
            bot->start();
    }

    auto start = run.scheduler->now();
    if (run.virt) {
        report.completed = run.virt->run_until([&] { return run.finished(report.batch); }, start + config.deadline_ms);
    } else {
        auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(config.deadline_ms);
        while (!(report.completed = run.finished(report.batch)) && std::chrono::steady_clock::now() < until)
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    run.settle();
    report.clock_ms = run.scheduler->now() - start;

    auto live = run.engine->snapshot();
    check_convergence(run, live, report);

    for (auto &bot : run.bots)
        bot->kill();
    run.settle();
    run.hub->stop();
    run.settle();

    report.final_state = run.engine->snapshot();
    auto records = run.journal->read();
    report.journal_records = records.records.size();
    auto replayed = replay(records);
    report.replay_consistent = !replayed.diagnostic && replayed.state == report.final_state;
    if (!report.replay_consistent)
        report.failures.push_back("journal replay differs from live state" +
                                  (replayed.diagnostic ? ": " + *replayed.diagnostic : std::string()));
    if (run.memory)
        report.journal_text = run.memory->bytes();
    else if (config.journal_path) {
        std::ostringstream out;
        for (auto &line : run.journal->storage().read_lines())
            out << line << '\n';
        report.journal_text = out.str();
    }

    for (auto &r : records.records)
        if (r.kind == EventKind::hook_fired)
            report.hook_traces[GameId(r.body.at("game").get<std::string>())].push_back(
                hook_token(r.body.at("hook").get<std::string>()));
    if (auto b = report.final_state.batches.find(report.batch); b != report.final_state.batches.end()) {
        for (auto &slot : b->second.slots) {
            auto g = report.final_state.games.find(slot.game);
            auto status = g == report.final_state.games.end() ? std::string("unlaunched")
                                                              : std::string(to_string(g->second.status));
            report.game_status[slot.game] = status;
            if (g == report.final_state.games.end() || !is_terminal(g->second.status))
                report.failures.push_back("game " + slot.game.str() + " is " + status + " at the deadline");
        }
        if (!is_terminal(b->second.status))
            report.failures.push_back("batch " + report.batch.str() + " still " +
                                      std::string(to_string(b->second.status)));
    }

    report.ordered = true;
    for (auto &bot : run.bots) {
        auto status = bot->status();
        BotReport br;
        br.identifier = bot->identifier();
        br.player = bot->player();
        br.token = bot->token();
        br.script = bot->script().name;
        br.phase = status.phase;
        br.reason = status.reason;
        br.done = status.done;
        br.connected = status.connected;
        br.welcomes = bot->welcomes();
        br.stages_acted = bot->stages_acted();
        br.violations = bot->violations();
        br.errors = bot->errors();
        br.transcript = bot->transcript();
        br.view = bot->view();
        if (!br.violations.empty()) {
            report.ordered = false;
            report.failures.push_back(br.identifier + ": " + br.violations.front());
        }
        if (!br.done)
            report.failures.push_back(br.identifier + " never finished (phase " + br.phase + ")");
        report.bots.push_back(std::move(br));
    }
    if (!report.converged)
        report.failures.push_back(std::to_string(report.divergences.size()) + " client view divergences");
    if (!report.completed)
        report.failures.push_back("scenario did not finish within " + std::to_string(config.deadline_ms) + " ms");

    auto &lat = run.hub->latency();
    report.latency_samples = lat.count();
    report.latency_p50_ms = static_cast<double>(lat.percentile(50)) / 1e6;
    report.latency_p95_ms = static_cast<double>(lat.percentile(95)) / 1e6;
    report.latency_max_ms = static_cast<double>(lat.max()) / 1e6;
    report.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return report;
}

bool ScenarioReport::passed() const
{
    return failures.empty();
}

Value ScenarioReport::to_value() const
{
    Value games = Value::object();
    for (auto &[id, status] : game_status) {
        Value trace = Value::array();
        if (auto it = hook_traces.find(id); it != hook_traces.end())
            for (auto &t : it->second)
                trace.push_back(t);
        games[id.str()] = Value{{"status", status}, {"hooks", trace}};
    }
    Value bots_out = Value::array();
    for (auto &b : bots) {
        Value transcript = Value::array();
        for (auto &t : b.transcript)
            transcript.push_back(Value{{"at", t.at}, {"dir", t.outbound ? "out" : "in"}, {"frame", t.frame}});
        Value errors = Value::array();
        for (auto &e : b.errors)
            errors.push_back(Value{{"at", e.at}, {"code", e.code}, {"message", e.message}});
        bots_out.push_back(Value{{"bot", b.identifier},
                                 {"player", b.player},
                                 {"script", b.script},
                                 {"phase", b.phase},
                                 {"reason", b.reason},
                                 {"done", b.done},
                                 {"welcomes", b.welcomes},
                                 {"stages", b.stages_acted},
                                 {"violations", b.violations},
                                 {"errors", errors},
                                 {"transcript", transcript}});
    }
    return Value{{"batch", batch.str()},
                 {"passed", passed()},
                 {"completed", completed},
                 {"failures", failures},
                 {"replay_consistent", replay_consistent},
                 {"converged", converged},
                 {"divergences", divergences},
                 {"ordered", ordered},
                 {"journal_records", journal_records},
                 {"latency_ms",
                  {{"samples", latency_samples}, {"p50", latency_p50_ms}, {"p95", latency_p95_ms}, {"max", latency_max_ms}}},
                 {"clock_ms", clock_ms},
                 {"wall_s", wall_s},
                 {"games", games},
                 {"bots", bots_out}};
}

std::string ScenarioReport::summary() const
{
    std::ostringstream out;
    std::map<std::string, int> by_status;
    for (auto &[id, status] : game_status)
        ++by_status[status];
    out << (passed() ? "PASS" : "FAIL") << " batch " << batch.str() << ": " << game_status.size() << " games (";
    bool first = true;
    for (auto &[status, n] : by_status) {
        out << (first ? "" : ", ") << n << ' ' << status;
        first = false;
    }
    out << "), " << bots.size() << " bots, " << journal_records << " journal records\n";
    out << "  replay " << (replay_consistent ? "consistent" : "DIFFERS") << ", views "
        << (converged ? "converged" : "DIVERGED") << ", ordering " << (ordered ? "ok" : "VIOLATED") << '\n';
    out << "  latency p50 " << latency_p50_ms << " ms, p95 " << latency_p95_ms << " ms, max " << latency_max_ms
        << " ms over " << latency_samples << " sends\n";
    out << "  clock " << clock_ms << " ms, wall " << wall_s << " s\n";
    for (auto &f : failures)
        out << "  failure: " << f << '\n';
    return out.str();
}

} // namespace vlab
