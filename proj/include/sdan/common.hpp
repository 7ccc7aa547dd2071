#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sdan {

// Error taxonomy. The CLI maps these onto stable exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct UndefinedResultError : Error {
    using Error::Error;
};
struct GenerationError : Error {
    using Error::Error;
};
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, long step) : Error(msg), step(step) {}
    long step;
};

// Process-global switches.
// checked: reject NaN/Inf at tensor construction.
// deterministic: pin reduction order / thread counts so reruns are bit-identical.
void set_checked_mode(bool on);
bool checked_mode();
void set_deterministic(bool on);
bool deterministic();

// Worker-thread cap from SDAN_THREADS (0 = auto). Also caps BLAS threads.
int thread_count();
void set_thread_count(int n);

// splitmix64: cheap stateless stream derivation, used to give each dataset
// pair / init site its own RNG stream from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 1));
}

}  // namespace sdan
