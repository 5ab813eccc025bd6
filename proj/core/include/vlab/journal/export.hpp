// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/ids.hpp"
#include "vlab/common/value.hpp"
#include "vlab/model/engine_state.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlab {

enum class ExportFormat { csv_bundle, jsonl };

std::string_view to_string(ExportFormat format) noexcept;
std::optional<ExportFormat> parse_export_format(std::string_view text) noexcept;

struct ExportOptions {
    ExportFormat format = ExportFormat::csv_bundle;
    bool include_identifiers = false;
    // Allow batches that are still created or running.
    bool partial = false;
};

struct ExportTable {
    std::string name;
    std::vector<std::string> columns;
    // Cells already rendered; missing attributes are empty.
    std::vector<std::vector<std::string>> rows;
};

struct ExportFile {
    std::string name;
    std::string content;
};

struct ExportBundle {
    std::vector<ExportTable> tables;
    Value manifest;
    std::vector<ExportFile> files;

    const ExportTable *table(std::string_view name) const;
};

// One table per scope kind plus logs and a manifest. Throws not-found for an
// unknown batch and batch-not-terminal for a live one unless partial is set.
ExportBundle export_batch(const EngineState &state, const BatchId &batch, const ExportOptions &options = {});

// Writes every file into `dir`, creating it; throws io-error.
void write_bundle(const ExportBundle &bundle, const std::filesystem::path &dir);

// RFC 4180 with CRLF line ends.
std::string csv_escape(std::string_view field);

} // namespace vlab
