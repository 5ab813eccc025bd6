// SPDX-License-Identifier: Apache-2.0
#include "vlab/lifecycle/declarative.hpp"

#include "../common/yaml_util.hpp"

namespace vlab {

namespace {

StageSpec parse_stage(const YAML::Node &node, const std::string &what)
{
    StageSpec stage;
    if (node.IsScalar()) {
        stage.name = yaml::text(node, what);
        stage.advance_on_submit = true;
        return stage;
    }
    yaml::expect_map(node, what);
    yaml::check_keys(node, {"name", "duration", "advance_on_submit"}, what);
    stage.name = yaml::text(node["name"], what + ".name");
    if (auto d = node["duration"]) {
        stage.duration_s = yaml::integer(d, what + ".duration");
        if (*stage.duration_s <= 0)
            yaml::invalid(d, what + ".duration must be positive");
    }
    stage.advance_on_submit = node["advance_on_submit"] ? yaml::boolean(node["advance_on_submit"], what)
                                                        : !stage.duration_s.has_value();
    if (!stage.duration_s && !stage.advance_on_submit)
        yaml::invalid(node, what + " can never end: give it a duration or advance_on_submit");
    return stage;
}

std::vector<StageSpec> parse_stages(const YAML::Node &node, const std::string &what)
{
    yaml::expect_seq(node, what);
    if (node.size() == 0)
        yaml::invalid(node, what + " needs at least one stage");
    std::vector<StageSpec> stages;
    for (std::size_t i = 0; i < node.size(); ++i)
        stages.push_back(parse_stage(node[i], what + "[" + std::to_string(i) + "]"));
    return stages;
}

std::map<std::string, Value> parse_values(const YAML::Node &node, const std::string &what)
{
    yaml::expect_map(node, what);
    std::map<std::string, Value> out;
    for (auto kv : node)
        out[kv.first.Scalar()] = yaml::to_value(kv.second);
    return out;
}

} // namespace

GameDefinition parse_game_definition(std::string_view text)
{
    auto doc = yaml::load(text);
    GameDefinition def;
    if (!doc || doc.IsNull())
        return def;
    yaml::expect_map(doc, "game file");
    yaml::check_keys(doc, {"name", "intro_steps", "disconnect", "rounds", "stages", "public_keys", "game_init",
                           "player_init"},
                     "game file");
    if (doc["name"])
        def.name = yaml::text(doc["name"], "name");
    if (auto n = doc["intro_steps"]) {
        auto steps = yaml::integer(n, "intro_steps");
        if (steps < 0)
            yaml::invalid(n, "intro_steps must be >= 0");
        def.intro_steps = static_cast<std::size_t>(steps);
    }
    if (auto d = doc["disconnect"]) {
        yaml::expect_map(d, "disconnect");
        yaml::check_keys(d, {"mode", "grace"}, "disconnect");
        if (d["mode"]) {
            auto mode_text = yaml::text(d["mode"], "disconnect.mode");
            auto mode = parse_disconnect_mode(mode_text);
            if (!mode)
                yaml::invalid(d["mode"], "unknown disconnect mode '" + mode_text + "'");
            if (*mode == DisconnectMode::custom)
                yaml::invalid(d["mode"], "custom disconnect handling needs compiled callbacks");
            def.disconnect.mode = *mode;
        }
        if (d["grace"]) {
            def.disconnect.grace_s = yaml::integer(d["grace"], "disconnect.grace");
            if (def.disconnect.grace_s < 0)
                yaml::invalid(d["grace"], "disconnect.grace must be >= 0");
        }
    }

    std::vector<StageSpec> stages = default_structure().front();
    if (doc["stages"])
        stages = parse_stages(doc["stages"], "stages");
    auto rounds = doc["rounds"];
    if (!rounds) {
        def.rounds = {stages};
    } else if (rounds.IsSequence()) {
        if (doc["stages"])
            yaml::invalid(doc["stages"], "stages goes inside each round when rounds is a list");
        if (rounds.size() == 0)
            yaml::invalid(rounds, "rounds needs at least one round");
        for (std::size_t i = 0; i < rounds.size(); ++i) {
            auto what = "rounds[" + std::to_string(i) + "]";
            yaml::expect_map(rounds[i], what);
            yaml::check_keys(rounds[i], {"stages"}, what);
            def.rounds.push_back(parse_stages(rounds[i]["stages"], what + ".stages"));
        }
    } else if (rounds.IsMap()) {
        yaml::check_keys(rounds, {"factor"}, "rounds");
        def.rounds_factor = yaml::text(rounds["factor"], "rounds.factor");
        def.rounds = {stages};
    } else {
        auto count = yaml::integer(rounds, "rounds");
        if (count <= 0)
            yaml::invalid(rounds, "rounds must be positive");
        def.rounds.assign(static_cast<std::size_t>(count), stages);
    }

    if (auto keys = doc["public_keys"]) {
        yaml::expect_seq(keys, "public_keys");
        for (auto k : keys)
            def.public_keys.push_back(yaml::text(k, "public_keys"));
    }
    if (doc["game_init"])
        def.game_init = parse_values(doc["game_init"], "game_init");
    if (doc["player_init"])
        def.player_init = parse_values(doc["player_init"], "player_init");
    return def;
}

Experiment make_experiment(const GameDefinition &def)
{
    Experiment experiment;
    experiment.name = def.name;
    experiment.intro_steps = def.intro_steps;
    experiment.disconnect = def.disconnect;
    experiment.callbacks.on_game_init = [def](GameContext &game) {
        auto rounds = def.rounds;
        if (def.rounds_factor) {
            auto &assignments = game.treatment().assignments;
            auto it = assignments.find(*def.rounds_factor);
            if (it == assignments.end() || !it->second.is_number_integer() || it->second.get<std::int64_t>() <= 0)
                fail(Errc::validation_error,
                     "treatment '" + game.treatment().name + "' has no positive integer " + *def.rounds_factor);
            rounds.assign(it->second.get<std::size_t>(), def.rounds.front());
        }
        for (auto &stages : rounds) {
            auto r = game.add_round();
            for (auto &stage : stages)
                game.add_stage(r, stage);
        }
        for (auto &key : def.public_keys)
            game.publish(key);
        for (auto &[key, value] : def.game_init)
            game.set(game.game_scope(), key, value);
        for (auto &player : game.players())
            for (auto &[key, value] : def.player_init)
                game.set(ScopeRef::player(player), key, value);
    };
    return experiment;
}

} // namespace vlab
