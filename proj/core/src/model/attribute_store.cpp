// SPDX-License-Identifier: Apache-2.0
#include "vlab/model/attribute_store.hpp"

#include "vlab/common/error.hpp"

#include <algorithm>
#include <chrono>

namespace vlab {

std::string_view to_string(ChangeOp op) noexcept
{
    return op == ChangeOp::set ? "set" : "append";
}

Value to_value(const Attribute &attribute)
{
    return Value{
        {"scope", attribute.scope.to_string()},
        {"key", attribute.key},
        {"value", attribute.value},
        {"version", attribute.version},
        {"updated_at", attribute.updated_at},
        {"updated_by", attribute.updated_by},
    };
}

Value change_body(const ChangeEvent &change)
{
    return Value{
        {"scope", change.scope.to_string()},
        {"key", change.key},
        {"op", to_string(change.op)},
        {"value", change.value},
        {"version", change.version},
        {"actor", change.actor},
    };
}

Value log_body(const LogEntry &entry)
{
    return Value{
        {"scope", entry.scope.to_string()},
        {"name", entry.name},
        {"payload", entry.payload},
        {"actor", entry.actor},
    };
}

AttributeStore::AttributeStore(CommitLog &log, const ScopeResolver *resolver) : log_(log), resolver_(resolver) {}

std::string AttributeStore::shard_key(const ScopeRef &scope)
{
    if (auto game = scope.game_id())
        return "g:" + game->str();
    return "p:" + scope.primary();
}

AttributeStore::Shard &AttributeStore::shard_for(const ScopeRef &scope)
{
    auto key = shard_key(scope);
    {
        std::shared_lock lock(shards_mutex_);
        if (auto it = shards_.find(key); it != shards_.end())
            return *it->second;
    }
    std::unique_lock lock(shards_mutex_);
    auto &slot = shards_[key];
    if (!slot)
        slot = std::make_unique<Shard>();
    return *slot;
}

const AttributeStore::Shard *AttributeStore::find_shard(const ScopeRef &scope) const
{
    std::shared_lock lock(shards_mutex_);
    auto it = shards_.find(shard_key(scope));
    return it == shards_.end() ? nullptr : it->second.get();
}

ChangeEvent AttributeStore::write(const ScopeRef &scope, const std::string &key, Value value, ChangeOp op,
                                  const ActorId &actor, TimeMs now)
{
    if (key.empty())
        fail(Errc::invalid_argument, "attribute key must be non-empty");
    if (resolver_)
        resolver_->check_writable(scope);

    auto &shard = shard_for(scope);
    std::lock_guard lock(shard.mutex);
    Key k{scope, key};
    auto it = shard.attributes.find(k);
    std::uint64_t version = it == shard.attributes.end() ? 1 : it->second.version + 1;

    Value resulting;
    if (op == ChangeOp::append) {
        if (it != shard.attributes.end() && !it->second.value.is_array())
            fail(Errc::type_conflict, "cannot append to non-list value at " + scope.to_string() + "/" + key);
        resulting = it == shard.attributes.end() ? Value::array() : it->second.value;
        resulting.push_back(value);
    } else {
        resulting = value;
    }
    if (to_text(resulting).size() > max_value_bytes)
        fail(Errc::value_too_large, scope.to_string() + "/" + key + " exceeds 256 KiB");

    ChangeEvent change{scope, key, op, std::move(value), version, now, actor, 0, 0};
    change.offset = log_.commit(EventKind::attr_change, change_body(change), now, [&] {
        auto &slot = shard.attributes[k];
        slot.scope = scope;
        slot.key = key;
        slot.value = std::move(resulting);
        slot.version = version;
        slot.updated_at = now;
        slot.updated_by = actor;
    });
    change.committed_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                              std::chrono::steady_clock::now().time_since_epoch())
                              .count();
    return change;
}

ChangeEvent AttributeStore::set(const ScopeRef &scope, const std::string &key, Value value, const ActorId &actor,
                                TimeMs now)
{
    return write(scope, key, std::move(value), ChangeOp::set, actor, now);
}

ChangeEvent AttributeStore::append(const ScopeRef &scope, const std::string &key, Value element, const ActorId &actor,
                                   TimeMs now)
{
    return write(scope, key, std::move(element), ChangeOp::append, actor, now);
}

LogEntry AttributeStore::log(const ScopeRef &scope, const std::string &name, Value payload, const ActorId &actor,
                             TimeMs now)
{
    if (name.empty())
        fail(Errc::invalid_argument, "log name must be non-empty");
    if (resolver_)
        resolver_->check_writable(scope);
    LogEntry entry{scope, name, std::move(payload), now, actor, 0};
    auto &shard = shard_for(scope);
    std::lock_guard lock(shard.mutex);
    entry.offset = log_.commit(EventKind::log_entry, log_body(entry), now, [&] { shard.logs.push_back(entry); });
    shard.logs.back().offset = entry.offset;
    return entry;
}

std::optional<Value> AttributeStore::get(const ScopeRef &scope, const std::string &key) const
{
    if (auto attr = find(scope, key))
        return std::move(attr->value);
    return std::nullopt;
}

std::optional<Attribute> AttributeStore::find(const ScopeRef &scope, const std::string &key) const
{
    if (resolver_)
        resolver_->check_readable(scope);
    const Shard *shard = find_shard(scope);
    if (!shard)
        return std::nullopt;
    std::lock_guard lock(shard->mutex);
    auto it = shard->attributes.find(Key{scope, key});
    if (it == shard->attributes.end())
        return std::nullopt;
    return it->second;
}

std::vector<Attribute> AttributeStore::attributes_of(const ScopeRef &scope) const
{
    std::vector<Attribute> out;
    const Shard *shard = find_shard(scope);
    if (!shard)
        return out;
    std::lock_guard lock(shard->mutex);
    for (auto it = shard->attributes.lower_bound(Key{scope, ""}); it != shard->attributes.end(); ++it) {
        if (it->first.first != scope)
            break;
        out.push_back(it->second);
    }
    return out;
}

std::vector<Attribute> AttributeStore::all() const
{
    std::vector<Attribute> out;
    std::shared_lock lock(shards_mutex_);
    for (auto &[_, shard] : shards_) {
        std::lock_guard shard_lock(shard->mutex);
        for (auto &[_, attr] : shard->attributes)
            out.push_back(attr);
    }
    std::sort(out.begin(), out.end(), [](const Attribute &a, const Attribute &b) {
        return std::tie(a.scope, a.key) < std::tie(b.scope, b.key);
    });
    return out;
}

std::vector<LogEntry> AttributeStore::logs() const
{
    std::vector<LogEntry> out;
    std::shared_lock lock(shards_mutex_);
    for (auto &[_, shard] : shards_) {
        std::lock_guard shard_lock(shard->mutex);
        out.insert(out.end(), shard->logs.begin(), shard->logs.end());
    }
    std::sort(out.begin(), out.end(), [](const LogEntry &a, const LogEntry &b) { return a.offset < b.offset; });
    return out;
}

std::vector<Attribute> AttributeStore::game_attributes(const GameId &game) const
{
    std::vector<Attribute> out;
    const Shard *shard = find_shard(ScopeRef::game(game));
    if (!shard)
        return out;
    std::lock_guard lock(shard->mutex);
    for (auto &[k, a] : shard->attributes)
        out.push_back(a);
    return out;
}

void AttributeStore::restore(const std::vector<Attribute> &attributes, const std::vector<LogEntry> &logs)
{
    std::unique_lock lock(shards_mutex_);
    shards_.clear();
    auto shard = [&](const ScopeRef &scope) -> Shard & {
        auto &slot = shards_[shard_key(scope)];
        if (!slot)
            slot = std::make_unique<Shard>();
        return *slot;
    };
    for (auto &attr : attributes)
        shard(attr.scope).attributes[Key{attr.scope, attr.key}] = attr;
    for (auto &entry : logs)
        shard(entry.scope).logs.push_back(entry);
}

} // namespace vlab
