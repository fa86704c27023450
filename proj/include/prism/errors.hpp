#pragma once

#include <stdexcept>
#include <string>

namespace prism {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A generation normalized to zero usable steps.
struct EmptyTraceError : Error {
    using Error::Error;
};

// A prompt template referenced a placeholder the caller did not supply.
struct TemplateError : Error {
    using Error::Error;
};

// Feedback with no step labels where a ratio is required.
struct DegenerateTraceError : Error {
    using Error::Error;
};

// Weight vector with no positive mass.
struct DegeneratePopulationError : Error {
    using Error::Error;
};

// Correctness histories of unequal length.
struct MalformedHistoryError : Error {
    using Error::Error;
};

// Negative token counts or otherwise inconsistent usage records.
struct AccountingError : Error {
    using Error::Error;
};

// Invalid or unknown keys in a run configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Thrown by the test-only abort hook to simulate an interrupted run.
struct AbortRunError : Error {
    using Error::Error;
};

}  // namespace prism
