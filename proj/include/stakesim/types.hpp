#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stakesim {

using Gwei = std::int64_t;
using ValidatorId = std::uint32_t;
using NodeId = std::uint32_t;
using PrefixId = std::uint32_t;
using Asn = std::uint32_t;
using Slot = std::int64_t;
using Epoch = std::int64_t;
using Millis = double;

inline constexpr Gwei kGweiPerEth = 1'000'000'000;

inline double to_eth(double gwei) { return gwei / static_cast<double>(kGweiPerEth); }

// Floor of sqrt for 128-bit non-negative values, via Newton iteration.
inline std::uint64_t isqrt_u128(unsigned __int128 n) {
    if (n == 0) return 0;
    unsigned __int128 x = n;
    unsigned __int128 y = (x + 1) >> 1;
    while (y < x) {
        x = y;
        y = (x + n / x) >> 1;
    }
    return static_cast<std::uint64_t>(x);
}

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stakesim
