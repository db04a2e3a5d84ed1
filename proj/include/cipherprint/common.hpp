#pragma once
// Shared aliases, error types and small helpers used across the pipeline.

#include <array>
#include <cstddef>
#include <functional>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cipherprint {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Seed = std::array<std::uint8_t, 32>;

// Errors carry the process exit code the CLI maps them to.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, int exit_code = 1)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

struct HashMismatch : Error {
    explicit HashMismatch(const std::string& what) : Error(what, 3) {}
};

struct UpstreamMissing : Error {
    explicit UpstreamMissing(const std::string& what) : Error(what, 4) {}
};

inline constexpr std::size_t kWindowBytes = 8192;
inline constexpr std::size_t kUnitBlockBytes = 1024;

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);
Seed seed_from_hex(std::string_view hex);
std::string seed_to_hex(const Seed& seed);

// SHA-256 helpers (OpenSSL backed).
std::array<std::uint8_t, 32> sha256(ByteView data);
std::string sha256_hex(ByteView data);
std::string sha256_hex(std::string_view text);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index runs exactly once, so
// writing results into slot i keeps the output order independent of scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace cipherprint
