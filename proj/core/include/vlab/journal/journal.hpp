// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/journal/record.hpp"

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlab {

// Narrow append/scan interface behind the journal.
class JournalStorage {
public:
    virtual ~JournalStorage() = default;
    // Must not return before the line would survive a process crash.
    virtual void append_line(std::string_view line) = 0;
    virtual std::vector<std::string> read_lines() const = 0;
};

class MemoryStorage final : public JournalStorage {
public:
    void append_line(std::string_view line) override;
    std::vector<std::string> read_lines() const override;

    // Full contents in file format (one line per record, '\n'-terminated).
    std::string bytes() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> lines_;
};

class FileStorage final : public JournalStorage {
public:
    // fsync=true also forces each record to stable storage; without it records
    // reach the OS before append_line returns, which survives process crashes.
    explicit FileStorage(std::filesystem::path path, bool fsync = false);
    ~FileStorage() override;

    FileStorage(const FileStorage &) = delete;
    FileStorage &operator=(const FileStorage &) = delete;

    void append_line(std::string_view line) override;
    std::vector<std::string> read_lines() const override;

    const std::filesystem::path &path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    bool fsync_;
    int fd_ = -1;
};

// First line of every journal.
std::string journal_header();

struct JournalReadResult {
    std::vector<EventRecord> records;
    // Set when reading stopped at a malformed or out-of-sequence line.
    std::optional<std::string> diagnostic;
};

// Parses header + records; stops at the first bad record.
JournalReadResult read_journal(const std::vector<std::string> &lines);

// Append-only event journal with dense offsets. A single appender sequence:
// commits are serialized and offsets are 0, 1, 2, ...
class Journal final : public CommitLog {
public:
    explicit Journal(std::unique_ptr<JournalStorage> storage);

    Journal(const Journal &) = delete;
    Journal &operator=(const Journal &) = delete;

    // Throws journal-failure once storage has failed; the engine stops taking input.
    std::uint64_t commit(EventKind kind, Value body, TimeMs at, const std::function<void()> &apply) override;
    std::uint64_t record(EventKind kind, Value body, TimeMs at) { return commit(kind, std::move(body), at, {}); }

    // Runs fn(next_offset) with appends blocked, giving a view consistent with one offset.
    template <typename Fn>
    auto read_consistent(Fn &&fn) const
    {
        std::lock_guard lock(mutex_);
        return fn(next_offset_);
    }

    std::uint64_t next_offset() const;
    bool halted() const noexcept { return halted_.load(); }

    JournalReadResult read() const;

    // Invoked inside the commit critical section after every record.
    void set_observer(std::function<void(const EventRecord &)> observer);

    JournalStorage &storage() noexcept { return *storage_; }

private:
    std::unique_ptr<JournalStorage> storage_;
    mutable std::mutex mutex_;
    std::uint64_t next_offset_ = 0;
    std::atomic<bool> halted_{false};
    std::function<void(const EventRecord &)> observer_;
};

} // namespace vlab
