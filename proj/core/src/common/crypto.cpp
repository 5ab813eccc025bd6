// SPDX-License-Identifier: Apache-2.0
#include "vlab/common/crypto.hpp"

#include "vlab/common/error.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <array>
#include <limits>

namespace vlab {

std::string to_hex(const unsigned char *data, std::size_t size)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(size * 2);
    for (std::size_t i = 0; i < size; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0f]);
    }
    return out;
}

std::string from_hex(std::string_view hex)
{
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0)
        fail(Errc::invalid_argument, "odd-length hex string");
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]);
        int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0)
            fail(Errc::invalid_argument, "bad hex digit");
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
    SHA256(reinterpret_cast<const unsigned char *>(data.data()), data.size(), digest.data());
    return to_hex(digest.data(), digest.size());
}

bool constant_time_equal(std::string_view a, std::string_view b) noexcept
{
    if (a.size() != b.size())
        return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::string pbkdf2_sha256_hex(std::string_view password, std::string_view salt, int iterations)
{
    std::array<unsigned char, 32> out{};
    if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()),
                          reinterpret_cast<const unsigned char *>(salt.data()), static_cast<int>(salt.size()),
                          iterations, EVP_sha256(), static_cast<int>(out.size()), out.data()) != 1)
        fail(Errc::io_error, "PBKDF2 failed");
    return to_hex(out.data(), out.size());
}

std::string SecureTokenSource::next_token()
{
    std::array<unsigned char, 24> bytes{};
    if (RAND_bytes(bytes.data(), static_cast<int>(bytes.size())) != 1)
        fail(Errc::io_error, "CSPRNG unavailable");
    return to_hex(bytes.data(), bytes.size());
}

std::string SeededTokenSource::next_token()
{
    std::array<unsigned char, 24> bytes{};
    for (std::size_t i = 0; i < bytes.size(); i += 8) {
        auto word = rng_();
        for (std::size_t j = 0; j < 8; ++j)
            bytes[i + j] = static_cast<unsigned char>(word >> (8 * j));
    }
    return to_hex(bytes.data(), bytes.size());
}

std::size_t uniform_index(std::mt19937_64 &rng, std::size_t n)
{
    if (n == 0)
        fail(Errc::invalid_argument, "uniform_index over empty range");
    const std::uint64_t bound = n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % bound);
}

std::int64_t uniform_int(std::mt19937_64 &rng, std::int64_t lo, std::int64_t hi)
{
    if (hi < lo)
        fail(Errc::invalid_argument, "uniform_int with hi < lo");
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0)
        return static_cast<std::int64_t>(rng());
    return lo + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(span)));
}

double uniform_real(std::mt19937_64 &rng, double lo, double hi)
{
    double unit = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * unit;
}

} // namespace vlab
