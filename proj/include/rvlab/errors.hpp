#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rvlab {

// Invalid model or experiment description (bad dimensions, missing fields, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A ratio estimator whose denominator has no exceedances. Carries the raw
// counts so callers can report them.
class UndefinedRatioError : public std::runtime_error {
public:
    UndefinedRatioError(const std::string& what, std::uint64_t num_count,
                        std::uint64_t den_count, std::uint64_t total)
        : std::runtime_error(what),
          numerator_count(num_count),
          denominator_count(den_count),
          n_total(total) {}

    std::uint64_t numerator_count;
    std::uint64_t denominator_count;
    std::uint64_t n_total;
};

class InsufficientDataError : public std::runtime_error {
public:
    InsufficientDataError(const std::string& what, std::uint64_t got, std::uint64_t required)
        : std::runtime_error(what), n_exceedances(got), n_required(required) {}

    std::uint64_t n_exceedances;
    std::uint64_t n_required;
};

// A moment or contraction condition required by the requested computation
// does not hold (e.g. E||A||^alpha >= 1 in a series construction).
class RegimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateLawError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rvlab
