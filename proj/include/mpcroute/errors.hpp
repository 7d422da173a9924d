#pragma once

#include <stdexcept>
#include <string>

namespace mpcroute {

// Value outside the representable fixed-point range.
struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lockstep violation: desync, scale/shape mismatch between parties,
// malformed frame, triple reuse or exhaustion.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Peer gone or socket failure.
struct ConnectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss or otherwise unusable training state.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mpcroute
