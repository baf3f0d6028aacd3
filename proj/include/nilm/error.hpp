#pragma once

#include <stdexcept>
#include <string>

namespace nilm {

// Raised for every contract violation: bad shapes, malformed files, invalid
// configuration. The message is a one-line diagnostic suitable for the CLI.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nilm
