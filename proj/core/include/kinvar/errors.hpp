#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kinvar {

// base for everything we throw on purpose
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// malformed input files / configs
struct ParseError : Error {
    using Error::Error;
};

// optimization failed for good: the divergence-recovery budget ran out
struct DivergenceError : Error {
    using Error::Error;
};

// a non-finite value showed up in a numeric computation.  carries enough
// context to localize the failure: the operation name, the position in the
// recording, and the active scope label at the time.
struct NumericError : Error {
    std::string op;
    std::size_t index = 0;
    std::string scope;

    NumericError(std::string op_, std::size_t index_, std::string scope_)
        : Error("non-finite value from op '" + op_ + "' at node " + std::to_string(index_) +
                (scope_.empty() ? std::string() : " in scope '" + scope_ + "'")),
          op(std::move(op_)), index(index_), scope(std::move(scope_)) {}
};

} // namespace kinvar
