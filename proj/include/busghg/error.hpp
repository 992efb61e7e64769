#pragma once

#include <stdexcept>
#include <string>

namespace busghg {

/// Invalid or missing configuration (bad key, missing file, uncovered fuel date).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data that cannot be processed (unreadable stream, schema mismatch,
/// no usable sinuosity samples).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace busghg
