#pragma once

#include <stdexcept>
#include <string>

namespace docaug {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A generation pipeline ran out of attempts. `detail` carries a summary of
// the last failed attempt.
struct GenerationExhausted : Error {
    explicit GenerationExhausted(std::string detail_)
        : Error("generation exhausted after all retries: " + detail_),
          detail(std::move(detail_)) {}
    std::string detail;
};

}  // namespace docaug
