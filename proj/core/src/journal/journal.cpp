// SPDX-License-Identifier: Apache-2.0
#include "vlab/journal/journal.hpp"

#include "vlab/common/error.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

namespace vlab {

void MemoryStorage::append_line(std::string_view line)
{
    std::lock_guard lock(mutex_);
    lines_.emplace_back(line);
}

std::vector<std::string> MemoryStorage::read_lines() const
{
    std::lock_guard lock(mutex_);
    return lines_;
}

std::string MemoryStorage::bytes() const
{
    std::lock_guard lock(mutex_);
    std::string out;
    for (auto &l : lines_) {
        out += l;
        out += '\n';
    }
    return out;
}

FileStorage::FileStorage(std::filesystem::path path, bool fsync) : path_(std::move(path)), fsync_(fsync)
{
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0640);
    if (fd_ < 0)
        fail(Errc::io_error, "cannot open journal " + path_.string() + ": " + std::strerror(errno));
}

FileStorage::~FileStorage()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void FileStorage::append_line(std::string_view line)
{
    std::string buf(line);
    buf += '\n';
    std::size_t written = 0;
    while (written < buf.size()) {
        auto n = ::write(fd_, buf.data() + written, buf.size() - written);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            fail(Errc::journal_failure, std::string("journal write failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    if (fsync_ && ::fdatasync(fd_) != 0)
        fail(Errc::journal_failure, std::string("journal sync failed: ") + std::strerror(errno));
}

std::vector<std::string> FileStorage::read_lines() const
{
    std::ifstream in(path_);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        lines.push_back(line);
    return lines;
}

std::string journal_header()
{
    return to_text(Value{{"format", "vlab-journal"}, {"version", 1}});
}

JournalReadResult read_journal(const std::vector<std::string> &lines)
{
    JournalReadResult result;
    if (lines.empty())
        return result;
    try {
        auto header = Value::parse(lines.front());
        if (header.value("format", "") != "vlab-journal" || header.value("version", 0) != 1) {
            result.diagnostic = "line 1: not a version 1 vlab journal header";
            return result;
        }
    } catch (const std::exception &e) {
        result.diagnostic = std::string("line 1: bad header: ") + e.what();
        return result;
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        try {
            auto record = record_from_value(Value::parse(lines[i]));
            if (record.offset != result.records.size()) {
                result.diagnostic = "line " + std::to_string(i + 1) + ": expected offset " +
                                    std::to_string(result.records.size()) + ", found " +
                                    std::to_string(record.offset);
                return result;
            }
            result.records.push_back(std::move(record));
        } catch (const std::exception &e) {
            result.diagnostic = "line " + std::to_string(i + 1) + ": corrupt record after offset " +
                                (result.records.empty() ? std::string("(none)")
                                                        : std::to_string(result.records.back().offset)) +
                                ": " + e.what();
            return result;
        }
    }
    return result;
}

Journal::Journal(std::unique_ptr<JournalStorage> storage) : storage_(std::move(storage))
{
    auto lines = storage_->read_lines();
    if (lines.empty()) {
        storage_->append_line(journal_header());
        return;
    }
    auto existing = read_journal(lines);
    if (existing.diagnostic)
        fail(Errc::journal_failure, "existing journal is damaged: " + *existing.diagnostic);
    next_offset_ = existing.records.size();
}

std::uint64_t Journal::commit(EventKind kind, Value body, TimeMs at, const std::function<void()> &apply)
{
    std::lock_guard lock(mutex_);
    if (halted_)
        fail(Errc::journal_failure, "journal halted after a storage failure");
    EventRecord record{next_offset_, at, kind, std::move(body)};
    try {
        storage_->append_line(to_text(to_value(record)));
    } catch (...) {
        halted_ = true;
        throw;
    }
    ++next_offset_;
    if (apply)
        apply();
    if (observer_)
        observer_(record);
    return record.offset;
}

std::uint64_t Journal::next_offset() const
{
    std::lock_guard lock(mutex_);
    return next_offset_;
}

JournalReadResult Journal::read() const
{
    std::lock_guard lock(mutex_);
    return read_journal(storage_->read_lines());
}

void Journal::set_observer(std::function<void(const EventRecord &)> observer)
{
    std::lock_guard lock(mutex_);
    observer_ = std::move(observer);
}

} // namespace vlab
