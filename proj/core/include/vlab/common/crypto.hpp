// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>

namespace vlab {

std::string sha256_hex(std::string_view data);
std::string to_hex(const unsigned char *data, std::size_t size);
std::string from_hex(std::string_view hex);

// Compares in time independent of where the inputs differ.
bool constant_time_equal(std::string_view a, std::string_view b) noexcept;

std::string pbkdf2_sha256_hex(std::string_view password, std::string_view salt, int iterations);

// Source of opaque session secrets. Production uses the OS CSPRNG; scenario runs
// use a seeded generator so journals are reproducible.
class TokenSource {
public:
    virtual ~TokenSource() = default;
    // 32 hex characters (128 bits) at minimum.
    virtual std::string next_token() = 0;
};

class SecureTokenSource final : public TokenSource {
public:
    std::string next_token() override;
};

class SeededTokenSource final : public TokenSource {
public:
    explicit SeededTokenSource(std::uint64_t seed) : rng_(seed) {}
    std::string next_token() override;

private:
    std::mt19937_64 rng_;
};

// Unbiased index in [0, n) that does not depend on the standard library's
// distribution implementation, so seeded runs replay identically everywhere.
std::size_t uniform_index(std::mt19937_64 &rng, std::size_t n);

// Uniform integer in [lo, hi].
std::int64_t uniform_int(std::mt19937_64 &rng, std::int64_t lo, std::int64_t hi);

// Uniform double in [lo, hi) built from the top 53 bits.
double uniform_real(std::mt19937_64 &rng, double lo, double hi);

} // namespace vlab
