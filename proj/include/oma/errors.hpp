#pragma once

#include <stdexcept>
#include <string>

namespace oma {

// Bad inputs / bad config. The CLI maps this to exit code 2.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

// A numerical procedure failed (non-finite values, no convergence, ...).
// The CLI maps this to exit code 3.
class NumericFailure : public std::runtime_error {
public:
    explicit NumericFailure(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace oma

#define OMA_REQUIRE(cond, msg)                                                 \
    do {                                                                       \
        if (!(cond)) throw ::oma::InvalidInput(msg);                           \
    } while (0)

#define OMA_NUMERIC_CHECK(cond, msg)                                           \
    do {                                                                       \
        if (!(cond)) throw ::oma::NumericFailure(msg);                         \
    } while (0)
