// SPDX-License-Identifier: Apache-2.0
#include "engine_fixture.hpp"
#include "scenarios.hpp"

#include "vlab/journal/export.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

namespace vlab {
namespace {

using namespace test;

std::string all_bytes(const ExportBundle &bundle)
{
    std::string out;
    for (auto &f : bundle.files)
        out += f.content;
    return out;
}

std::size_t column(const ExportTable &t, const std::string &name)
{
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        if (t.columns[i] == name)
            return i;
    ADD_FAILURE() << "no column " << name << " in " << t.name;
    return 0;
}

class ExportOfCorrelation : public ::testing::Test {
protected:
    static void SetUpTestSuite() { report_ = new ScenarioReport(run_scenario(correlation_scenario())); }
    static void TearDownTestSuite() { delete report_; }
    static ScenarioReport *report_;
};

ScenarioReport *ExportOfCorrelation::report_ = nullptr;

TEST(Csv, EscapesPerRfc4180)
{
    EXPECT_EQ(csv_escape("plain"), "plain");
    EXPECT_EQ(csv_escape(""), "");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
    EXPECT_EQ(csv_escape("cr\r"), "\"cr\r\"");
}

TEST_F(ExportOfCorrelation, PlayerRoundsHaveOneRowPerPlayerAndRound)
{
    ASSERT_TRUE(report_->passed()) << report_->summary();
    auto bundle = export_batch(report_->final_state, report_->batch);
    auto *pr = bundle.table("player_rounds");
    ASSERT_NE(pr, nullptr);
    EXPECT_EQ(pr->rows.size(), 12u * 20u);
    auto guess = column(*pr, "attr.guess");
    for (auto &row : pr->rows) {
        auto value = Value::parse(row.at(guess));
        EXPECT_TRUE(value.is_number_float());
        EXPECT_GE(value.get<double>(), 0.0);
        EXPECT_LE(value.get<double>(), 1.0);
    }
    EXPECT_EQ(bundle.table("rounds")->rows.size(), 20u);
    EXPECT_EQ(bundle.table("stages")->rows.size(), 40u);
    EXPECT_EQ(bundle.table("player_stages")->rows.size(), 12u * 40u);
    EXPECT_EQ(bundle.table("players")->rows.size(), 12u);
    EXPECT_EQ(bundle.table("games")->rows.size(), 1u);
}

TEST_F(ExportOfCorrelation, DefaultExportLeaksNoIdentifierOrToken)
{
    auto tokens = issued_tokens(*report_);
    ASSERT_EQ(tokens.size(), 12u);
    for (auto format : {ExportFormat::csv_bundle, ExportFormat::jsonl}) {
        ExportOptions options;
        options.format = format;
        auto bundle = export_batch(report_->final_state, report_->batch, options);
        auto bytes = all_bytes(bundle);
        for (auto &bot : report_->bots) {
            EXPECT_EQ(bytes.find(bot.identifier), std::string::npos) << bot.identifier;
            EXPECT_EQ(bytes.find(report_->final_state.players.at(PlayerId(bot.player)).token_hash), std::string::npos);
        }
        for (auto &t : tokens)
            EXPECT_EQ(bytes.find(t), std::string::npos);
        for (auto &t : bundle.tables)
            for (auto &c : t.columns)
                EXPECT_NE(c, "identifier");
        EXPECT_EQ(bundle.manifest["include_identifiers"], false);
        EXPECT_EQ(bundle.manifest["redacted"], true);
    }
}

TEST_F(ExportOfCorrelation, IdentifiersOnlyWhenAsked)
{
    ExportOptions options;
    options.include_identifiers = true;
    auto bundle = export_batch(report_->final_state, report_->batch, options);
    auto *players = bundle.table("players");
    auto idx = column(*players, "identifier");
    std::set<std::string> exported;
    for (auto &row : players->rows)
        exported.insert(row.at(idx));
    std::set<std::string> expected;
    for (auto &bot : report_->bots)
        expected.insert(bot.identifier);
    EXPECT_EQ(exported, expected);
    EXPECT_EQ(bundle.manifest["include_identifiers"], true);
    // Session secrets never leave, even with identifiers on.
    auto bytes = all_bytes(bundle);
    for (auto &t : issued_tokens(*report_))
        EXPECT_EQ(bytes.find(t), std::string::npos);
}

TEST_F(ExportOfCorrelation, SameStateSameBytes)
{
    auto a = export_batch(report_->final_state, report_->batch);
    auto b = export_batch(report_->final_state, report_->batch);
    ASSERT_EQ(a.files.size(), b.files.size());
    for (std::size_t i = 0; i < a.files.size(); ++i) {
        EXPECT_EQ(a.files[i].name, b.files[i].name);
        EXPECT_EQ(a.files[i].content, b.files[i].content);
    }
    // Attribute columns come out sorted by key.
    auto &cols = a.table("player_rounds")->columns;
    std::vector<std::string> attrs;
    for (auto &c : cols)
        if (c.rfind("attr.", 0) == 0)
            attrs.push_back(c);
    EXPECT_TRUE(std::is_sorted(attrs.begin(), attrs.end()));
}

TEST_F(ExportOfCorrelation, ManifestCarriesProtocolHash)
{
    auto bundle = export_batch(report_->final_state, report_->batch);
    auto &stored = report_->final_state.protocols.begin()->second;
    EXPECT_EQ(bundle.manifest["protocol_hash"], sha256_hex(stored.text));
    EXPECT_EQ(bundle.manifest["tables"].size(), 7u);
}

TEST_F(ExportOfCorrelation, WritesFilesToDisk)
{
    auto dir = std::filesystem::temp_directory_path() / ("vlab-export-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    auto bundle = export_batch(report_->final_state, report_->batch);
    write_bundle(bundle, dir);
    for (auto &f : bundle.files) {
        std::ifstream in(dir / f.name, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        EXPECT_EQ(content, f.content) << f.name;
    }
    std::filesystem::remove_all(dir);
}

TEST(Export, UnknownBatchIsNotFound)
{
    EngineState empty;
    try {
        export_batch(empty, BatchId("b9"));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::not_found);
    }
}

TEST(Export, LiveBatchNeedsPartial)
{
    EngineFixture fx{Experiment{}};
    auto batch = fx.start(small_protocol(2), batch_of(1));
    fx.arrive("alice@example.org");
    auto state = fx.engine->snapshot();
    try {
        export_batch(state, batch);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::batch_not_terminal);
    }
    ExportOptions options;
    options.partial = true;
    auto bundle = export_batch(state, batch, options);
    EXPECT_EQ(bundle.manifest["partial"], true);
    EXPECT_EQ(all_bytes(bundle).find("alice@example.org"), std::string::npos);
}

TEST(Export, TwoPhaseKeepsTheSameGroupInBothRounds)
{
    auto report = run_scenario(two_phase_scenario());
    ASSERT_TRUE(report.passed()) << report.summary();
    auto bundle = export_batch(report.final_state, report.batch);
    auto *pr = bundle.table("player_rounds");
    auto round = column(*pr, "index");
    auto player = column(*pr, "player");
    auto score = column(*pr, "attr.score");
    std::map<std::string, std::set<std::string>> by_round;
    for (auto &row : pr->rows) {
        by_round[row.at(round)].insert(row.at(player));
        EXPECT_FALSE(row.at(score).empty());
    }
    ASSERT_EQ(by_round.size(), 2u);
    EXPECT_EQ(by_round["0"].size(), 12u);
    EXPECT_EQ(by_round["0"], by_round["1"]);
    EXPECT_EQ(pr->rows.size(), 24u);
}

} // namespace
} // namespace vlab
