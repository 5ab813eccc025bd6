// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vlab::cli {

struct ScaffoldFile {
    std::string path;
    std::string content;
};

// Fixed contents: the same tool version always produces the same bytes.
const std::vector<ScaffoldFile> &scaffold_files();

// Throws conflict when `dir` has entries and force is off; returns the paths written.
std::vector<std::filesystem::path> scaffold(const std::filesystem::path &dir, bool force);

} // namespace vlab::cli
