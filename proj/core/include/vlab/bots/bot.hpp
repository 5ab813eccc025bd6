// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/bots/channel.hpp"
#include "vlab/bots/script.hpp"
#include "vlab/common/value.hpp"
#include "vlab/runtime/scheduler.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace vlab {

struct TranscriptEntry {
    TimeMs at = 0;
    bool outbound = false;
    std::string frame;
};

struct ViewEntry {
    Value value;
    std::uint64_t version = 0;

    bool operator==(const ViewEntry &) const = default;
};

// (scope text, key) -> latest value the client holds.
using ClientView = std::map<std::pair<std::string, std::string>, ViewEntry>;

struct BotError {
    TimeMs at = 0;
    std::optional<std::uint64_t> ref;
    std::string code;
    std::string message;
};

// Scripted participant speaking the wire protocol. Everything runs on the bot's
// strand; read the accessors only once the scheduler is quiet or via status().
class BotClient {
public:
    struct Status {
        std::string player;
        std::string phase;
        std::string reason;
        bool done = false;
        bool connected = false;
    };

    BotClient(Scheduler &scheduler, Connector connector, BotScript script, std::string identifier,
              std::uint64_t seed);
    ~BotClient();

    BotClient(const BotClient &) = delete;
    BotClient &operator=(const BotClient &) = delete;

    void start();
    // Drops the connection without notice; reconnect() resumes with the stored token.
    void kill();
    void reconnect();

    Status status() const;
    const std::string &identifier() const noexcept { return identifier_; }
    const std::string &token() const noexcept { return token_; }
    const std::string &player() const noexcept { return player_; }
    const BotScript &script() const noexcept { return script_; }
    const std::vector<TranscriptEntry> &transcript() const noexcept { return transcript_; }
    const ClientView &view() const noexcept { return view_; }
    const std::vector<BotError> &errors() const noexcept { return errors_; }
    // Broken server obligations: sequence or per-key version regressions, protocol errors.
    const std::vector<std::string> &violations() const noexcept { return violations_; }
    // Stages the bot acted in, as "round/stage".
    const std::vector<std::string> &stages_acted() const noexcept { return stages_acted_; }
    // Version sequences received per key, for ordering checks.
    const std::map<std::pair<std::string, std::string>, std::vector<std::uint64_t>> &received_versions() const noexcept
    {
        return received_;
    }
    std::size_t welcomes() const noexcept { return welcomes_; }

private:
    void connect();
    void send(const char *type, Value body);
    void on_frame(std::uint64_t generation, std::string text);
    void on_closed(std::uint64_t generation);
    void apply_snapshot(const Value &attributes, bool replace);
    void apply_change(const Value &body);
    void absorb(const Value &body);
    void act();
    void start_stage(const std::string &stage_id, std::size_t round, const std::string &name);
    void run_step(std::string stage_id, std::size_t index);
    bool stage_live(const std::string &stage_id) const;
    std::optional<std::string> scope_text(ScopeSlot slot) const;
    void set_done(bool done);

    struct Step {
        TimeMs delay = 0;
        const BotAction *action = nullptr;
        bool fuzz = false;
    };

    Scheduler &scheduler_;
    Connector connector_;
    BotScript script_;
    std::string identifier_;
    std::mt19937_64 rng_;
    std::shared_ptr<Strand> strand_;

    std::unique_ptr<ClientChannel> channel_;
    std::uint64_t generation_ = 0;
    std::uint64_t out_seq_ = 0;
    std::uint64_t in_seq_ = 0;
    bool silent_ = false;
    bool killed_ = false;

    std::string player_;
    std::string token_;
    Value flow_ = Value::object();
    Value game_ = nullptr;
    std::string handled_stage_;
    std::string acted_flow_;
    std::vector<Step> steps_;
    bool dropped_once_ = false;

    ClientView view_;
    std::vector<TranscriptEntry> transcript_;
    std::vector<BotError> errors_;
    std::vector<std::string> violations_;
    std::vector<std::string> stages_acted_;
    std::map<std::pair<std::string, std::string>, std::vector<std::uint64_t>> received_;
    std::size_t welcomes_ = 0;

    mutable std::mutex status_mutex_;
    Status status_;
};

} // namespace vlab
