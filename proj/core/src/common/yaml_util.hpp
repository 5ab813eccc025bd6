// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"
#include "vlab/treatments/protocol.hpp"

#include <yaml-cpp/yaml.h>

#include <initializer_list>
#include <string>
#include <string_view>

namespace vlab::yaml {

int line_of(const YAML::Node &node);
[[noreturn]] void invalid(const YAML::Node &node, const std::string &message);
// Parses a document, turning syntax errors into parse-error with the line.
YAML::Node load(std::string_view text);
void expect_map(const YAML::Node &node, const std::string &what);
void expect_seq(const YAML::Node &node, const std::string &what);
void check_keys(const YAML::Node &node, std::initializer_list<std::string_view> allowed, const std::string &context);
std::string text(const YAML::Node &node, const std::string &what);
int integer(const YAML::Node &node, const std::string &what);
double number(const YAML::Node &node, const std::string &what);
bool boolean(const YAML::Node &node, const std::string &what);
// Plain scalars become null, bool, integer, double or string in that order of preference.
Value to_value(const YAML::Node &node);

} // namespace vlab::yaml
