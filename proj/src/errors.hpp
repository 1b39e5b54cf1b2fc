// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tstcd {

// File or stream content that does not parse (CSV, config, checkpoint).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or combination.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem failures (missing file, short read, write failure).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric-domain violations and non-finite results.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tstcd
