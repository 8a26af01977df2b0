#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nilgrowth {

// Enumeration/convolution state budget.  Exceeding it is a deterministic,
// reported failure: the tool is a desk-scale instrument.
struct EnumCaps {
    std::uint64_t max_states = 10'000'000;
};

class CapExceededError : public std::runtime_error {
  public:
    CapExceededError(std::string what, std::uint64_t states_visited, std::uint64_t partial_count)
        : std::runtime_error(std::move(what)), states_visited(states_visited), partial_count(partial_count) {}
    std::uint64_t states_visited;
    std::uint64_t partial_count;  // distinct elements seen before aborting
};

class BackendMismatchError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class NotNilpotentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class DependentGeneratorsError : public std::invalid_argument {
  public:
    DependentGeneratorsError(std::string what, std::string certificate)
        : std::invalid_argument(std::move(what)), certificate(std::move(certificate)) {}
    // Rational coefficients of a vanishing combination, or the word that
    // falls outside the generator span.
    std::string certificate;
};

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace nilgrowth
