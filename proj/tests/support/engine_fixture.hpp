// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/journal/journal.hpp"
#include "vlab/journal/replay.hpp"
#include "vlab/lifecycle/engine.hpp"
#include "vlab/runtime/virtual_scheduler.hpp"
#include "vlab/treatments/protocol.hpp"

#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vlab::test {

// Single-treatment protocol with `players` per game and a 60 s lobby.
inline std::string small_protocol(int players, const std::string &strategy = "fail", int timeout = 60)
{
    std::string yaml = "factors:\n"
                       "  - {name: playerCount, type: integer, values: [" +
                       std::to_string(players) +
                       "]}\n"
                       "treatments:\n"
                       "  - {name: base, assignments: {playerCount: " +
                       std::to_string(players) +
                       "}}\n"
                       "lobbies:\n"
                       "  - {name: default, timeout: " +
                       std::to_string(timeout) + ", strategy: " + strategy;
    if (strategy == "extend")
        yaml += ", extend_limit: 1";
    yaml += "}\n";
    return yaml;
}

inline BatchSpec batch_of(int games, AssignmentMethod method = AssignmentMethod::complete,
                          std::optional<std::uint64_t> seed = 7)
{
    BatchSpec spec;
    spec.name = "main";
    spec.method = method;
    spec.quotas = {{"base", games}};
    spec.lobby = "default";
    spec.seed = seed;
    return spec;
}

struct Outcome {
    bool finished = false;
    std::exception_ptr error;
};

// Engine on a virtual clock with an in-memory journal.
class EngineFixture {
public:
    explicit EngineFixture(Experiment experiment, EngineOptions options = {})
    {
        auto storage = std::make_unique<MemoryStorage>();
        memory = storage.get();
        journal = std::make_unique<Journal>(std::move(storage));
        engine = std::make_unique<Engine>(scheduler, *journal, std::move(experiment),
                                          std::make_unique<SeededTokenSource>(1), options);
    }

    BatchId start(const std::string &protocol_yaml, const BatchSpec &spec)
    {
        auto pid = engine->import_protocol(protocol_yaml, "admin:test");
        auto bid = engine->create_batch(pid, spec, "admin:test");
        engine->start_batch(bid, "admin:test");
        settle();
        return bid;
    }

    // Runs ready work without advancing the clock.
    void settle() { scheduler.run_ready(); }

    std::exception_ptr submit(const PlayerId &player, SubmitStep step, std::optional<StageId> stage = std::nullopt)
    {
        auto out = std::make_shared<Outcome>();
        engine->client_submit(player, {step, std::move(stage)}, [out](std::exception_ptr e) {
            out->finished = true;
            out->error = e;
        });
        settle();
        return out->error;
    }

    std::exception_ptr write(const PlayerId &player, const ScopeRef &scope, const std::string &key, Value value,
                             ChangeOp op = ChangeOp::set)
    {
        auto out = std::make_shared<Outcome>();
        engine->client_write(player, scope, key, op, std::move(value), [out](std::exception_ptr e) {
            out->finished = true;
            out->error = e;
        });
        settle();
        return out->error;
    }

    // New player walked through consent and intro into the lobby.
    PlayerId arrive(const std::string &identifier)
    {
        auto hello = engine->hello(std::nullopt, identifier);
        engine->player_online(hello.player);
        tokens.push_back(hello.token);
        submit(hello.player, SubmitStep::consent);
        for (std::size_t i = 0; i < engine->experiment().intro_steps; ++i)
            submit(hello.player, SubmitStep::intro);
        return hello.player;
    }

    StageId current_stage(const GameId &game) const
    {
        auto g = engine->game(game);
        return g->current_stage()->id;
    }

    // Live state must equal the fold of the journal.
    bool replay_matches() const
    {
        auto replayed = replay(journal->read());
        return !replayed.diagnostic && replayed.state == engine->snapshot();
    }

    VirtualScheduler scheduler;
    MemoryStorage *memory = nullptr;
    std::unique_ptr<Journal> journal;
    std::unique_ptr<Engine> engine;
    std::vector<std::string> tokens;
};

inline std::string error_code(std::exception_ptr e)
{
    if (!e)
        return "";
    try {
        std::rethrow_exception(e);
    } catch (const Error &err) {
        return std::string(to_string(err.code()));
    } catch (const std::exception &err) {
        return err.what();
    }
}

} // namespace vlab::test
