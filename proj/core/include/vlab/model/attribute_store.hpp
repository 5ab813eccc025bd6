// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/ids.hpp"
#include "vlab/common/value.hpp"
#include "vlab/journal/record.hpp"
#include "vlab/model/scope.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

namespace vlab {

struct Attribute {
    ScopeRef scope;
    std::string key;
    Value value;
    std::uint64_t version = 0;
    TimeMs updated_at = 0;
    ActorId updated_by;

    bool operator==(const Attribute &) const = default;
};

enum class ChangeOp { set, append };

std::string_view to_string(ChangeOp op) noexcept;

struct ChangeEvent {
    ScopeRef scope;
    std::string key;
    ChangeOp op = ChangeOp::set;
    // The whole value for set, the appended element for append.
    Value value;
    std::uint64_t version = 0;
    TimeMs at = 0;
    ActorId actor;
    std::uint64_t offset = 0;
    // Steady-clock nanoseconds at commit; used only for latency accounting.
    std::int64_t committed_ns = 0;
};

struct LogEntry {
    ScopeRef scope;
    std::string name;
    Value payload;
    TimeMs at = 0;
    ActorId actor;
    std::uint64_t offset = 0;

    bool operator==(const LogEntry &) const = default;
};

Value to_value(const Attribute &attribute);
Value change_body(const ChangeEvent &change);
Value log_body(const LogEntry &entry);

// Decides whether a scope names live entities. The engine supplies one that knows
// about games and players; throws scope-not-found or game-closed.
class ScopeResolver {
public:
    virtual ~ScopeResolver() = default;
    virtual void check_readable(const ScopeRef &scope) const = 0;
    virtual void check_writable(const ScopeRef &scope) const = 0;
};

// Scoped, versioned key-value store. Writes are journaled through the CommitLog
// before they become visible. Data is sharded by owning game (or by player for
// player scopes) so different games never contend on the same lock.
class AttributeStore {
public:
    explicit AttributeStore(CommitLog &log, const ScopeResolver *resolver = nullptr);

    AttributeStore(const AttributeStore &) = delete;
    AttributeStore &operator=(const AttributeStore &) = delete;

    void set_resolver(const ScopeResolver *resolver) noexcept { resolver_ = resolver; }

    ChangeEvent set(const ScopeRef &scope, const std::string &key, Value value, const ActorId &actor, TimeMs now);
    ChangeEvent append(const ScopeRef &scope, const std::string &key, Value element, const ActorId &actor, TimeMs now);
    LogEntry log(const ScopeRef &scope, const std::string &name, Value payload, const ActorId &actor, TimeMs now);

    std::optional<Value> get(const ScopeRef &scope, const std::string &key) const;
    std::optional<Attribute> find(const ScopeRef &scope, const std::string &key) const;

    std::vector<Attribute> attributes_of(const ScopeRef &scope) const;
    // Every attribute on the game's own scopes (game, rounds, stages, composites).
    std::vector<Attribute> game_attributes(const GameId &game) const;
    // Every attribute ordered by (scope, key).
    std::vector<Attribute> all() const;
    // Every log entry ordered by journal offset.
    std::vector<LogEntry> logs() const;

    // Replaces the content wholesale; used when restoring from a replayed journal.
    void restore(const std::vector<Attribute> &attributes, const std::vector<LogEntry> &logs);

private:
    using Key = std::pair<ScopeRef, std::string>;

    struct Shard {
        mutable std::mutex mutex;
        std::map<Key, Attribute> attributes;
        std::vector<LogEntry> logs;
    };

    static std::string shard_key(const ScopeRef &scope);
    Shard &shard_for(const ScopeRef &scope);
    const Shard *find_shard(const ScopeRef &scope) const;

    ChangeEvent write(const ScopeRef &scope, const std::string &key, Value value, ChangeOp op, const ActorId &actor,
                      TimeMs now);

    CommitLog &log_;
    const ScopeResolver *resolver_;
    mutable std::shared_mutex shards_mutex_;
    std::map<std::string, std::unique_ptr<Shard>> shards_;
};

} // namespace vlab
