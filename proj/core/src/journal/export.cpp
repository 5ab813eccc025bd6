// SPDX-License-Identifier: Apache-2.0
#include "vlab/journal/export.hpp"

#include "vlab/common/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <set>

namespace vlab {

namespace {

using AttrIndex = std::map<ScopeRef, std::map<std::string, const Attribute *>>;

// Attribute cells are JSON so that types survive the round trip.
std::string cell(const Value &value)
{
    return value.dump();
}

std::string opt(const std::optional<std::string> &s)
{
    return s ? *s : std::string();
}

struct TableBuilder {
    ExportTable table;
    std::size_t fixed = 0;
    std::vector<std::string> keys;

    TableBuilder(std::string name, std::vector<std::string> columns, const AttrIndex &attrs,
                 const std::vector<ScopeRef> &scopes)
    {
        table.name = std::move(name);
        fixed = columns.size();
        std::set<std::string> all;
        for (auto &scope : scopes)
            if (auto it = attrs.find(scope); it != attrs.end())
                for (auto &[key, a] : it->second)
                    all.insert(key);
        keys.assign(all.begin(), all.end());
        table.columns = std::move(columns);
        for (auto &k : keys)
            table.columns.push_back("attr." + k);
    }

    void row(std::vector<std::string> cells, const AttrIndex &attrs, const ScopeRef &scope)
    {
        auto it = attrs.find(scope);
        for (auto &k : keys) {
            std::string value;
            if (it != attrs.end())
                if (auto a = it->second.find(k); a != it->second.end())
                    value = cell(a->second->value);
            cells.push_back(std::move(value));
        }
        table.rows.push_back(std::move(cells));
    }
};

std::string render_csv(const ExportTable &table)
{
    std::string out;
    auto line = [&](const std::vector<std::string> &cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i)
                out += ',';
            out += csv_escape(cells[i]);
        }
        out += "\r\n";
    };
    line(table.columns);
    for (auto &r : table.rows)
        line(r);
    return out;
}

std::string render_jsonl(const ExportTable &table)
{
    std::string out;
    for (auto &r : table.rows) {
        nlohmann::ordered_json row = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < r.size(); ++i)
            row[table.columns[i]] = r[i];
        out += row.dump();
        out += '\n';
    }
    return out;
}

bool started(const StageState &stage)
{
    return stage.started_at.has_value();
}

} // namespace

std::string_view to_string(ExportFormat format) noexcept
{
    return format == ExportFormat::jsonl ? "jsonl" : "csv";
}

std::optional<ExportFormat> parse_export_format(std::string_view text) noexcept
{
    if (text == "csv" || text == "csv_bundle")
        return ExportFormat::csv_bundle;
    if (text == "jsonl")
        return ExportFormat::jsonl;
    return std::nullopt;
}

const ExportTable *ExportBundle::table(std::string_view name) const
{
    for (auto &t : tables)
        if (t.name == name)
            return &t;
    return nullptr;
}

std::string csv_escape(std::string_view field)
{
    if (field.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

ExportBundle export_batch(const EngineState &state, const BatchId &batch_id, const ExportOptions &options)
{
    auto bit = state.batches.find(batch_id);
    if (bit == state.batches.end())
        fail(Errc::not_found, "no batch " + batch_id.str());
    auto &batch = bit->second;
    if (!is_terminal(batch.status) && !options.partial)
        fail(Errc::batch_not_terminal,
             "batch " + batch_id.str() + " is " + std::string(to_string(batch.status)) + "; pass partial to export anyway");

    AttrIndex attrs;
    for (auto &a : state.attributes)
        attrs[a.scope][a.key] = &a;

    std::vector<const GameState *> games;
    for (auto &slot : batch.slots)
        if (auto g = state.games.find(slot.game); g != state.games.end())
            games.push_back(&g->second);

    std::set<PlayerId> player_ids;
    for (auto &[id, p] : state.players)
        if (p.batch == batch_id)
            player_ids.insert(id);
    for (auto *g : games)
        player_ids.insert(g->players.begin(), g->players.end());

    ExportBundle bundle;

    {
        std::vector<ScopeRef> scopes;
        std::set<std::string> factors;
        for (auto *g : games) {
            scopes.push_back(ScopeRef::game(g->id));
            for (auto &[f, v] : g->treatment.assignments)
                factors.insert(f);
        }
        std::vector<std::string> columns{"game", "batch", "treatment", "status", "end_reason", "players"};
        for (auto &f : factors)
            columns.push_back("factor." + f);
        TableBuilder t("games", columns, attrs, scopes);
        for (auto *g : games) {
            std::vector<std::string> row{g->id.str(),
                                         g->batch.str(),
                                         g->treatment.name,
                                         std::string(to_string(g->status)),
                                         opt(g->end_reason),
                                         std::to_string(g->players.size())};
            for (auto &f : factors) {
                auto it = g->treatment.assignments.find(f);
                row.push_back(it == g->treatment.assignments.end() ? std::string() : cell(it->second));
            }
            t.row(std::move(row), attrs, ScopeRef::game(g->id));
        }
        bundle.tables.push_back(std::move(t.table));
    }

    {
        std::vector<ScopeRef> scopes;
        for (auto &id : player_ids)
            scopes.push_back(ScopeRef::player(id));
        std::vector<std::string> columns{"player"};
        if (options.include_identifiers)
            columns.push_back("identifier");
        for (auto *c : {"phase", "status", "reason", "game"})
            columns.push_back(c);
        TableBuilder t("players", columns, attrs, scopes);
        for (auto &id : player_ids) {
            auto &p = state.players.at(id);
            std::vector<std::string> row{id.str()};
            if (options.include_identifiers)
                row.push_back(p.identifier);
            row.push_back(std::string(to_string(p.phase)));
            row.push_back(std::string(to_string(p.status)));
            row.push_back(opt(p.reason));
            row.push_back(p.current_game ? p.current_game->str() : std::string());
            t.row(std::move(row), attrs, ScopeRef::player(id));
        }
        bundle.tables.push_back(std::move(t.table));
    }

    {
        std::vector<ScopeRef> scopes;
        for (auto *g : games)
            for (auto &r : g->rounds)
                scopes.push_back(ScopeRef::round(r.id));
        TableBuilder t("rounds", {"round", "game", "index"}, attrs, scopes);
        for (auto *g : games)
            for (auto &r : g->rounds)
                t.row({r.id.str(), g->id.str(), std::to_string(r.index)}, attrs, ScopeRef::round(r.id));
        bundle.tables.push_back(std::move(t.table));
    }

    {
        std::vector<ScopeRef> scopes;
        for (auto *g : games)
            for (auto &r : g->rounds)
                for (auto &s : r.stages)
                    scopes.push_back(ScopeRef::stage(s.id));
        TableBuilder t("stages",
                       {"stage", "game", "round", "index", "name", "started_at", "duration_s", "end_reason",
                        "submitted"},
                       attrs, scopes);
        for (auto *g : games)
            for (auto &r : g->rounds)
                for (auto &s : r.stages)
                    t.row({s.id.str(), g->id.str(), r.id.str(), std::to_string(s.index), s.name,
                           s.started_at ? std::to_string(*s.started_at) : std::string(),
                           s.duration_s ? std::to_string(*s.duration_s) : std::string(), opt(s.end_reason),
                           std::to_string(s.submitted.size())},
                          attrs, ScopeRef::stage(s.id));
        bundle.tables.push_back(std::move(t.table));
    }

    {
        std::vector<ScopeRef> scopes;
        for (auto *g : games)
            for (auto &r : g->rounds)
                for (auto &p : g->players)
                    scopes.push_back(ScopeRef::player_round(r.id, p));
        TableBuilder t("player_rounds", {"round", "player", "game", "index"}, attrs, scopes);
        for (auto *g : games)
            for (auto &r : g->rounds) {
                bool reached = false;
                for (auto &s : r.stages)
                    reached = reached || started(s);
                if (!reached)
                    continue;
                for (auto &p : g->players)
                    t.row({r.id.str(), p.str(), g->id.str(), std::to_string(r.index)}, attrs,
                          ScopeRef::player_round(r.id, p));
            }
        bundle.tables.push_back(std::move(t.table));
    }

    {
        std::vector<ScopeRef> scopes;
        for (auto *g : games)
            for (auto &r : g->rounds)
                for (auto &s : r.stages)
                    for (auto &p : g->players)
                        scopes.push_back(ScopeRef::player_stage(s.id, p));
        TableBuilder t("player_stages", {"stage", "player", "game", "round", "submitted"}, attrs, scopes);
        for (auto *g : games)
            for (auto &r : g->rounds)
                for (auto &s : r.stages) {
                    if (!started(s))
                        continue;
                    for (auto &p : g->players)
                        t.row({s.id.str(), p.str(), g->id.str(), r.id.str(), s.submitted.count(p) ? "true" : "false"},
                              attrs, ScopeRef::player_stage(s.id, p));
                }
        bundle.tables.push_back(std::move(t.table));
    }

    {
        ExportTable t;
        t.name = "logs";
        t.columns = {"offset", "at", "scope", "name", "actor", "payload"};
        std::set<GameId> game_ids;
        for (auto *g : games)
            game_ids.insert(g->id);
        for (auto &log : state.logs) {
            auto owner = log.scope.game_id();
            bool mine = owner ? game_ids.count(*owner) > 0 : player_ids.count(*log.scope.player_id()) > 0;
            if (!mine)
                continue;
            t.rows.push_back({std::to_string(log.offset), std::to_string(log.at), log.scope.to_string(), log.name,
                              log.actor, cell(log.payload)});
        }
        bundle.tables.push_back(std::move(t));
    }

    std::string protocol_hash;
    if (auto p = state.protocols.find(batch.protocol); p != state.protocols.end())
        protocol_hash = p->second.hash;
    auto ext = options.format == ExportFormat::jsonl ? ".jsonl" : ".csv";
    Value tables = Value::array();
    for (auto &t : bundle.tables) {
        tables.push_back(Value{{"name", t.name}, {"file", t.name + ext}, {"rows", t.rows.size()}, {"columns", t.columns}});
        bundle.files.push_back({t.name + ext, options.format == ExportFormat::jsonl ? render_jsonl(t) : render_csv(t)});
    }
    bundle.manifest = Value{{"batch", batch_id.str()},
                            {"batch_status", std::string(to_string(batch.status))},
                            {"protocol", batch.protocol.str()},
                            {"protocol_hash", protocol_hash},
                            {"format", std::string(to_string(options.format))},
                            {"include_identifiers", options.include_identifiers},
                            {"redacted", !options.include_identifiers},
                            {"partial", !is_terminal(batch.status)},
                            {"journal_offset", state.next_offset},
                            {"tables", tables}};
    bundle.files.push_back({"manifest.json", bundle.manifest.dump(2) + "\n"});
    return bundle;
}

void write_bundle(const ExportBundle &bundle, const std::filesystem::path &dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        fail(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
    for (auto &f : bundle.files) {
        std::ofstream out(dir / f.name, std::ios::binary | std::ios::trunc);
        out.write(f.content.data(), static_cast<std::streamsize>(f.content.size()));
        if (!out)
            fail(Errc::io_error, "cannot write " + (dir / f.name).string());
    }
}

} // namespace vlab
