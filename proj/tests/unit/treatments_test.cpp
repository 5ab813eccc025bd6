// SPDX-License-Identifier: Apache-2.0
#include "vlab/treatments/assignment.hpp"
#include "vlab/treatments/factorial.hpp"
#include "vlab/treatments/protocol.hpp"

#include <gtest/gtest.h>

#include <array>
#include <random>
#include <set>

using namespace vlab;

namespace {

const char *correlation_yaml = R"(factors:
  - name: playerCount
    type: integer
    values: [2]
  - name: feedback
    type: string
    values: [none, partner, group]
treatments:
  - name: solo-feedback
    assignments: {playerCount: 2, feedback: none}
  - name: partner-feedback
    assignments: {playerCount: 2, feedback: partner}
  - name: group-feedback
    assignments: {playerCount: 2, feedback: group}
lobbies:
  - {name: default, timeout: 300, strategy: extend, extend_limit: 2}
batches:
  - name: pilot
    assignment: simple
    seed: 42
    lobby: default
    quotas:
      - {treatment: partner-feedback, games: 3}
)";

FactorDef factor(std::string name, FactorType type, std::vector<Value> values)
{
    return {std::move(name), type, std::move(values)};
}

ProtocolError parse_failure(const std::string &yaml)
{
    try {
        parse_protocol(yaml);
    } catch (const ProtocolError &e) {
        return e;
    }
    ADD_FAILURE() << "protocol was accepted:\n" << yaml;
    return ProtocolError(Errc::validation_error, "accepted");
}

std::vector<GameSlot> slots(int games, std::size_t capacity)
{
    std::vector<GameSlot> out;
    for (int g = 1; g <= games; ++g)
        out.push_back({GameId("g" + std::to_string(g)), "base", capacity, {}, true});
    return out;
}

PlayerId pid(int i)
{
    return PlayerId("p" + std::to_string(i));
}

} // namespace

TEST(Protocol, ParsesFactorsTreatmentsLobbiesAndBatches)
{
    auto p = parse_protocol(correlation_yaml);
    ASSERT_EQ(p.factors.size(), 2u);
    ASSERT_EQ(p.treatments.size(), 3u);
    EXPECT_EQ(p.factor("feedback")->values.size(), 3u);
    EXPECT_EQ(p.treatment("group-feedback")->assignments.at("feedback"), "group");
    EXPECT_EQ(p.treatment("group-feedback")->player_count(), 2);
    auto lobby = p.lobby("default");
    ASSERT_TRUE(lobby);
    EXPECT_EQ(lobby->strategy, TimeoutStrategy::extend);
    EXPECT_EQ(lobby->extend_limit, 2);
    auto batch = p.batch("pilot");
    ASSERT_TRUE(batch);
    EXPECT_EQ(batch->method, AssignmentMethod::simple);
    EXPECT_EQ(batch->seed, 42u);
    EXPECT_EQ(batch->quotas, (std::vector<Quota>{{"partner-feedback", 3}}));
}

TEST(Protocol, EmptyTreatmentListIsRejected)
{
    auto e = parse_failure("factors:\n  - {name: playerCount, type: integer, values: [2]}\ntreatments: []\n");
    EXPECT_EQ(e.code(), Errc::validation_error);
}

TEST(Protocol, UndeclaredFactorIsNamedWithItsLine)
{
    auto e = parse_failure("factors:\n"
                           "  - {name: playerCount, type: integer, values: [2]}\n"
                           "treatments:\n"
                           "  - name: t\n"
                           "    assignments:\n"
                           "      playerCount: 2\n"
                           "      colour: red\n");
    EXPECT_EQ(e.code(), Errc::validation_error);
    EXPECT_NE(e.detail().find("colour"), std::string::npos) << e.detail();
    EXPECT_EQ(e.line(), 7);
}

TEST(Protocol, ValueOutsideTheAllowedSetIsRejected)
{
    auto e = parse_failure("factors:\n"
                           "  - {name: playerCount, type: integer, values: [2]}\n"
                           "  - {name: feedback, type: string, values: [none]}\n"
                           "treatments:\n"
                           "  - {name: t, assignments: {playerCount: 2, feedback: loud}}\n");
    EXPECT_EQ(e.code(), Errc::validation_error);
    EXPECT_NE(e.detail().find("feedback"), std::string::npos) << e.detail();
    EXPECT_EQ(e.line(), 5);
}

TEST(Protocol, MissingPlayerCountIsRejected)
{
    auto e = parse_failure("factors:\n"
                           "  - {name: feedback, type: string, values: [none]}\n"
                           "treatments:\n"
                           "  - {name: t, assignments: {feedback: none}}\n");
    EXPECT_EQ(e.code(), Errc::validation_error);
    EXPECT_NE(e.detail().find("playerCount"), std::string::npos) << e.detail();
}

TEST(Protocol, MalformedYamlIsAParseErrorWithALine)
{
    auto e = parse_failure("factors:\n  - {name: playerCount, type: integer\ntreatments: [\n");
    EXPECT_EQ(e.code(), Errc::parse_error);
    EXPECT_GT(e.line(), 0);
}

TEST(Protocol, UnknownKeysAndBadReferencesAreRejected)
{
    const std::string base = "factors:\n"
                             "  - {name: playerCount, type: integer, values: [2]}\n"
                             "treatments:\n"
                             "  - {name: t, assignments: {playerCount: 2}}\n";
    EXPECT_EQ(parse_failure(base + "colours: []\n").code(), Errc::validation_error);
    EXPECT_EQ(parse_failure(base + "batches:\n  - {name: b, quotas: [{treatment: nope, games: 1}]}\n").code(),
              Errc::validation_error);
    EXPECT_EQ(parse_failure(base + "lobbies:\n  - {name: l, timeout: 10, strategy: extend}\n").code(),
              Errc::validation_error);
    EXPECT_EQ(parse_failure(base + "lobbies:\n  - {name: l, timeout: 0}\n").code(), Errc::validation_error);
    EXPECT_EQ(parse_failure(base + "  - {name: t, assignments: {playerCount: 2}}\n").code(), Errc::validation_error);
}

TEST(Protocol, SerializationRoundTripsAndIsStable)
{
    auto p = parse_protocol(correlation_yaml);
    auto text = serialize_protocol(p);
    auto again = parse_protocol(text);
    EXPECT_EQ(again, p);
    EXPECT_EQ(serialize_protocol(again), text);
}

TEST(Protocol, ExpandedFactorialRoundTrips)
{
    Protocol p;
    p.factors = {factor("playerCount", FactorType::integer, {2}),
                 factor("feedback", FactorType::string, {"none", "partner", "group"}),
                 factor("rounds", FactorType::integer, {5, 10, 20, 40})};
    p.treatments = expand_factorial(p.factors);
    ASSERT_EQ(p.treatments.size(), 12u);
    validate_protocol(p);
    auto text = serialize_protocol(p);
    EXPECT_EQ(parse_protocol(text), p);
    EXPECT_EQ(serialize_protocol(parse_protocol(text)), text);
}

TEST(Factorial, ThreeByFourGivesTwelveDistinctNamedTreatments)
{
    std::vector<FactorDef> factors = {factor("b", FactorType::integer, {1, 2, 3, 4}),
                                      factor("a", FactorType::string, {"x", "y", "z"})};
    auto ts = expand_factorial(factors);
    ASSERT_EQ(ts.size(), 12u);
    std::set<std::string> names;
    std::set<std::string> combos;
    for (auto &t : ts) {
        names.insert(t.name);
        combos.insert(to_text(Value(t.assignments)));
    }
    EXPECT_EQ(names.size(), 12u);
    EXPECT_EQ(combos.size(), 12u);
    // First name varies slowest; names list factors alphabetically.
    EXPECT_EQ(ts.front().name, "a=x;b=1");
    EXPECT_EQ(ts[1].name, "a=x;b=2");
    EXPECT_EQ(ts.back().name, "a=z;b=4");
}

TEST(Factorial, SingleValuedFactorsGiveOneTreatment)
{
    auto ts = expand_factorial({factor("playerCount", FactorType::integer, {3}),
                                factor("chat", FactorType::boolean, {true})});
    ASSERT_EQ(ts.size(), 1u);
    EXPECT_EQ(ts[0].name, "chat=true;playerCount=3");
}

TEST(Factorial, BooleanCubeIsBalanced)
{
    std::vector<FactorDef> factors;
    for (auto name : {"p", "q", "r"})
        factors.push_back(factor(name, FactorType::boolean, {false, true}));
    auto ts = expand_factorial(factors);
    ASSERT_EQ(ts.size(), 8u);
    for (auto name : {"p", "q", "r"}) {
        int on = 0;
        for (auto &t : ts)
            on += t.assignments.at(name).get<bool>() ? 1 : 0;
        EXPECT_EQ(on, 4) << name;
    }
}

TEST(Factorial, FixedValuesPinFactors)
{
    std::vector<FactorDef> factors = {factor("playerCount", FactorType::integer, {2, 4}),
                                      factor("feedback", FactorType::string, {"none", "group"})};
    auto ts = expand_factorial(factors, {{"playerCount", 4}});
    ASSERT_EQ(ts.size(), 2u);
    for (auto &t : ts)
        EXPECT_EQ(t.player_count(), 4);
    EXPECT_THROW(expand_factorial(factors, {{"playerCount", 3}}), ProtocolError);
    EXPECT_THROW(expand_factorial(factors, {{"colour", "red"}}), ProtocolError);
    EXPECT_THROW(expand_factorial({factor("empty", FactorType::string, {})}), ProtocolError);
}

TEST(Factorial, SizeIsTheProductOfValueCounts)
{
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<FactorDef> factors = {factor("playerCount", FactorType::integer, {2})};
        std::size_t expected = 1;
        int n = std::uniform_int_distribution<int>(1, 4)(rng);
        for (int f = 0; f < n; ++f) {
            int k = std::uniform_int_distribution<int>(1, 4)(rng);
            std::vector<Value> values;
            for (int v = 0; v < k; ++v)
                values.push_back(v * 10 + f);
            factors.push_back(factor("f" + std::to_string(f), FactorType::integer, values));
            expected *= static_cast<std::size_t>(k);
        }
        Protocol p;
        p.factors = factors;
        p.treatments = expand_factorial(factors);
        EXPECT_EQ(p.treatments.size(), expected);
        std::set<std::string> names;
        for (auto &t : p.treatments)
            names.insert(t.name);
        EXPECT_EQ(names.size(), expected);
        EXPECT_NO_THROW(validate_protocol(p));
    }
}

TEST(Assignment, CompleteFillsGamesInOrderThenWaitlists)
{
    BatchAssigner a(AssignmentMethod::complete, slots(2, 12), 0);
    for (int i = 0; i < 12; ++i) {
        auto seat = a.assign(pid(i));
        ASSERT_TRUE(seat);
        EXPECT_EQ(seat->game, GameId("g1"));
        EXPECT_EQ(seat->position, static_cast<std::size_t>(i));
    }
    a.close_slot(GameId("g1"));
    for (int i = 12; i < 24; ++i)
        EXPECT_EQ(a.assign(pid(i))->game, GameId("g2"));
    EXPECT_FALSE(a.assign(pid(24)));
}

TEST(Assignment, CompleteNeverSeatsInALaterGameEarly)
{
    BatchAssigner a(AssignmentMethod::complete, slots(3, 3), 0);
    for (int i = 0; i < 9; ++i) {
        a.assign(pid(i));
        for (std::size_t k = 0; k + 1 < a.slots().size(); ++k)
            if (!a.slots()[k + 1].members.empty())
                EXPECT_EQ(a.slots()[k].members.size(), a.slots()[k].capacity);
    }
    EXPECT_FALSE(a.assign(pid(9)));
}

TEST(Assignment, ReleaseAndResetReopenSeats)
{
    BatchAssigner a(AssignmentMethod::complete, slots(1, 2), 0);
    a.assign(pid(1));
    a.assign(pid(2));
    EXPECT_FALSE(a.assign(pid(3)));
    EXPECT_TRUE(a.release(pid(1)));
    EXPECT_FALSE(a.release(pid(1)));
    EXPECT_EQ(a.assign(pid(3))->game, GameId("g1"));
    auto evicted = a.reset_slot(GameId("g1"));
    EXPECT_EQ(evicted, (std::vector<PlayerId>{pid(2), pid(3)}));
    EXPECT_FALSE(a.seat_of(pid(2)));
    EXPECT_EQ(a.assign(pid(4))->position, 0u);
}

TEST(Assignment, DoubleSeatAndClosedBatchAreErrors)
{
    BatchAssigner a(AssignmentMethod::simple, slots(2, 2), 9);
    a.assign(pid(1));
    try {
        a.assign(pid(1));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::invalid_argument);
    }
    a.close();
    try {
        a.assign(pid(2));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::batch_closed);
    }
}

TEST(Assignment, SimpleIsUniformOverOpenGames)
{
    // Three games of two seats: the first two arrivals always see all three open.
    constexpr int trials = 6000;
    std::array<std::array<int, 3>, 2> counts{};
    for (int seed = 0; seed < trials; ++seed) {
        BatchAssigner a(AssignmentMethod::simple, slots(3, 2), static_cast<std::uint64_t>(seed));
        for (int i = 0; i < 6; ++i) {
            auto seat = a.assign(pid(i));
            ASSERT_TRUE(seat);
            if (i < 2)
                ++counts[i][std::stoi(seat->game.str().substr(1)) - 1];
        }
        for (auto &s : a.slots())
            ASSERT_EQ(s.members.size(), 2u);
        EXPECT_FALSE(a.assign(pid(6)));
    }
    for (auto &row : counts) {
        double expected = trials / 3.0;
        double chi2 = 0;
        for (int c : row)
            chi2 += (c - expected) * (c - expected) / expected;
        // Two degrees of freedom, p = 0.001.
        EXPECT_LT(chi2, 13.816) << row[0] << " " << row[1] << " " << row[2];
    }
}

TEST(Assignment, SimpleIsReproducibleFromSeedAndDrawCount)
{
    BatchAssigner whole(AssignmentMethod::simple, slots(4, 3), 77);
    std::vector<SlotAssignment> seen;
    for (int i = 0; i < 12; ++i)
        seen.push_back(*whole.assign(pid(i)));

    // Rebuild halfway through from the seats taken so far.
    BatchAssigner first(AssignmentMethod::simple, slots(4, 3), 77);
    for (int i = 0; i < 5; ++i)
        EXPECT_EQ(*first.assign(pid(i)), seen[i]);
    BatchAssigner rebuilt(AssignmentMethod::simple, first.slots(), 77, first.draws());
    for (int i = 5; i < 12; ++i)
        EXPECT_EQ(*rebuilt.assign(pid(i)), seen[i]);
}
