// SPDX-License-Identifier: Apache-2.0
#include "scenarios.hpp"

#include "vlab/journal/replay.hpp"
#include "vlab/runtime/thread_scheduler.hpp"
#include "vlab/runtime/virtual_scheduler.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

using namespace vlab;
using namespace vlab::test;

namespace {

struct BrokenStorage final : JournalStorage {
    void append_line(std::string_view line) override
    {
        if (fail_next)
            throw Error(Errc::io_error, "disk full");
        lines.emplace_back(line);
    }
    std::vector<std::string> read_lines() const override { return lines; }

    std::vector<std::string> lines;
    bool fail_next = false;
};

std::filesystem::path temp_path(const std::string &name)
{
    auto dir = std::filesystem::temp_directory_path() / ("vlab-journal-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::filesystem::remove(p);
    return p;
}

Value change(const std::string &key, std::uint64_t version, Value value)
{
    return Value{{"scope", "game:g1"}, {"key", key}, {"op", "set"}, {"value", std::move(value)},
                 {"version", version}, {"actor", "p1"}};
}

} // namespace

TEST(Journal, RecordsRoundTripThroughTheirTextForm)
{
    EventRecord r{17, 123456, EventKind::admin_action, Value{{"verb", "start_batch"}, {"actor", "admin:ada"}}};
    EXPECT_EQ(record_from_value(Value::parse(to_text(to_value(r)))), r);
    for (auto kind : {EventKind::attr_change, EventKind::log_entry, EventKind::hook_fired, EventKind::flow_transition,
                      EventKind::lobby_event, EventKind::connection_event, EventKind::admin_action,
                      EventKind::game_event})
        EXPECT_EQ(parse_event_kind(to_string(kind)), kind);
}

TEST(Journal, OffsetsStartAtZeroAndStayDenseUnderRacingWriters)
{
    Journal j(std::make_unique<MemoryStorage>());
    EXPECT_EQ(j.record(EventKind::game_event, Value{{"n", -1}}, 0), 0u);

    constexpr int writers = 6, each = 200;
    std::vector<std::thread> threads;
    std::mutex seen_mutex;
    std::set<std::uint64_t> seen;
    for (int w = 0; w < writers; ++w)
        threads.emplace_back([&, w] {
            for (int i = 0; i < each; ++i) {
                auto off = j.record(EventKind::game_event, Value{{"w", w}, {"i", i}}, i);
                std::lock_guard lock(seen_mutex);
                EXPECT_TRUE(seen.insert(off).second) << off;
            }
        });
    for (auto &t : threads)
        t.join();

    auto read = j.read();
    ASSERT_FALSE(read.diagnostic);
    ASSERT_EQ(read.records.size(), static_cast<std::size_t>(writers * each + 1));
    for (std::size_t i = 0; i < read.records.size(); ++i)
        EXPECT_EQ(read.records[i].offset, i);
    EXPECT_EQ(*seen.begin(), 1u);
    EXPECT_EQ(*seen.rbegin(), static_cast<std::uint64_t>(writers * each));
}

TEST(Journal, ApplyRunsOnlyAfterTheRecordIsStored)
{
    auto storage = std::make_unique<BrokenStorage>();
    auto *raw = storage.get();
    Journal j(std::move(storage));
    bool applied = false;
    j.commit(EventKind::game_event, Value::object(), 0, [&] { applied = raw->lines.size() == 2; });
    EXPECT_TRUE(applied);

    raw->fail_next = true;
    applied = false;
    EXPECT_THROW(j.commit(EventKind::game_event, Value::object(), 0, [&] { applied = true; }), Error);
    EXPECT_FALSE(applied);
    EXPECT_TRUE(j.halted());

    // Fail-stop: even once storage recovers nothing more is accepted.
    raw->fail_next = false;
    try {
        j.record(EventKind::game_event, Value::object(), 0);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::journal_failure);
    }
    EXPECT_EQ(j.read().records.size(), 1u);
}

TEST(Journal, FileStorageSurvivesReopen)
{
    auto path = temp_path("reopen.jsonl");
    {
        Journal j(std::make_unique<FileStorage>(path, true));
        j.record(EventKind::attr_change, change("x", 1, 1), 10);
        j.record(EventKind::attr_change, change("x", 2, "two"), 20);
    }
    Journal again(std::make_unique<FileStorage>(path));
    EXPECT_EQ(again.next_offset(), 2u);
    EXPECT_EQ(again.record(EventKind::attr_change, change("x", 3, 3.5), 30), 2u);
    auto read = again.read();
    ASSERT_FALSE(read.diagnostic);
    ASSERT_EQ(read.records.size(), 3u);
    EXPECT_EQ(read.records[1].body.at("value"), "two");
}

TEST(Journal, DamagedFileIsDiagnosedAndRefused)
{
    auto path = temp_path("damaged.jsonl");
    {
        Journal j(std::make_unique<FileStorage>(path));
        for (std::uint64_t v = 1; v <= 3; ++v)
            j.record(EventKind::attr_change, change("x", v, static_cast<int>(v)), 0);
    }
    {
        std::ofstream out(path, std::ios::app);
        out << "{\"offset\":3,\"at\":0,\"kind\":\"attr_ch";
    }
    FileStorage storage(path);
    auto read = read_journal(storage.read_lines());
    ASSERT_TRUE(read.diagnostic);
    EXPECT_NE(read.diagnostic->find("line 5"), std::string::npos) << *read.diagnostic;
    EXPECT_NE(read.diagnostic->find("after offset 2"), std::string::npos) << *read.diagnostic;
    EXPECT_EQ(read.records.size(), 3u);

    auto replayed = replay(read);
    EXPECT_TRUE(replayed.diagnostic);
    EXPECT_EQ(replayed.applied, 3u);
    ASSERT_EQ(replayed.state.attributes.size(), 1u);
    EXPECT_EQ(replayed.state.attributes[0].value, 3);

    try {
        Journal j(std::make_unique<FileStorage>(path));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::journal_failure);
    }
}

TEST(Journal, OutOfSequenceOffsetStopsReading)
{
    std::vector<std::string> lines = {journal_header()};
    lines.push_back(to_text(to_value(EventRecord{0, 0, EventKind::game_event, Value::object()})));
    lines.push_back(to_text(to_value(EventRecord{2, 0, EventKind::game_event, Value::object()})));
    auto read = read_journal(lines);
    ASSERT_TRUE(read.diagnostic);
    EXPECT_NE(read.diagnostic->find("expected offset 1"), std::string::npos);
    EXPECT_EQ(read.records.size(), 1u);
    EXPECT_TRUE(read_journal({"{\"format\":\"other\"}"}).diagnostic);
}

TEST(Replay, EmptyJournalGivesPristineState)
{
    auto r = replay(std::vector<EventRecord>{});
    EXPECT_FALSE(r.diagnostic);
    EXPECT_EQ(r.applied, 0u);
    EXPECT_EQ(r.state, EngineState{});
}

TEST(Replay, InconsistentRecordHaltsAtItsOffset)
{
    std::vector<EventRecord> records = {
        {0, 0, EventKind::attr_change, change("x", 1, 1)},
        {1, 0, EventKind::attr_change, change("x", 3, 3)},
        {2, 0, EventKind::attr_change, change("y", 1, 1)},
    };
    auto r = replay(records);
    ASSERT_TRUE(r.diagnostic);
    EXPECT_EQ(r.applied, 1u);
    ASSERT_EQ(r.state.attributes.size(), 1u);
    EXPECT_EQ(r.state.attributes[0].version, 1u);
}

TEST(Replay, PrefixThenSuffixEqualsTheWhole)
{
    auto report = run_scenario(reconnect_scenario());
    ASSERT_TRUE(report.completed);
    auto records = journal_records(report);
    ASSERT_GT(records.size(), 20u);
    auto whole = replay(records);
    ASSERT_FALSE(whole.diagnostic) << *whole.diagnostic;

    for (std::size_t k : {std::size_t(0), std::size_t(1), records.size() / 3, records.size() / 2, records.size() - 1,
                          records.size()}) {
        auto prefix = replay(records, k);
        ASSERT_FALSE(prefix.diagnostic);
        EXPECT_EQ(prefix.applied, k);

        Replayer incremental;
        for (std::size_t i = 0; i < k; ++i)
            incremental.apply(records[i]);
        EXPECT_EQ(incremental.state(), prefix.state) << "k=" << k;
        for (std::size_t i = k; i < records.size(); ++i)
            incremental.apply(records[i]);
        EXPECT_EQ(incremental.state(), whole.state) << "k=" << k;
    }
}

TEST(Scheduler, VirtualTimersRunInDueOrderAndCancelWorks)
{
    VirtualScheduler s(1000);
    auto a = s.make_strand("a");
    auto b = s.make_strand("b");
    std::vector<std::string> trace;
    a->post_at(3000, [&] { trace.push_back("a3@" + std::to_string(s.now())); });
    b->post_at(2000, [&] { trace.push_back("b2@" + std::to_string(s.now())); });
    auto gone = a->post_at(2500, [&] { trace.push_back("cancelled"); });
    b->post_at(2000, [&] { trace.push_back("b2'"); });
    a->post([&] { trace.push_back("now"); });
    a->cancel(gone);

    s.run_ready();
    EXPECT_EQ(trace, (std::vector<std::string>{"now"}));
    EXPECT_EQ(s.now(), 1000);
    s.advance_to(2600);
    EXPECT_EQ(s.now(), 2600);
    bool done = s.run_until([&] { return trace.size() == 4; }, 10000);
    EXPECT_TRUE(done);
    EXPECT_EQ(trace, (std::vector<std::string>{"now", "b2@2000", "b2'", "a3@3000"}));
    EXPECT_EQ(s.pending(), 0u);
}

TEST(Scheduler, ThreadStrandsAreSerialAndOrdered)
{
    ThreadScheduler s(4);
    constexpr int strands = 4, tasks = 500;
    std::vector<std::shared_ptr<Strand>> ss;
    std::vector<std::vector<int>> seen(strands);
    std::vector<std::atomic<int>> running(strands);
    std::atomic<bool> overlapped{false};
    std::atomic<int> finished{0};
    for (int i = 0; i < strands; ++i)
        ss.push_back(s.make_strand("s" + std::to_string(i)));
    for (int t = 0; t < tasks; ++t)
        for (int i = 0; i < strands; ++i)
            ss[i]->post([&, i, t] {
                if (running[i].fetch_add(1) != 0)
                    overlapped = true;
                seen[i].push_back(t);
                running[i].fetch_sub(1);
                finished.fetch_add(1);
            });
    for (int spin = 0; spin < 10000 && finished.load() < strands * tasks; ++spin)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    s.stop();
    ASSERT_EQ(finished.load(), strands * tasks);
    EXPECT_FALSE(overlapped.load());
    for (auto &v : seen)
        for (int t = 0; t < tasks; ++t)
            ASSERT_EQ(v[static_cast<std::size_t>(t)], t);
}
