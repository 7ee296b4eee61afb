#pragma once

#include <stdexcept>

namespace bellsim {

/// The guiding density vanished where the beable sits (a node of the pilot state).
class NodeVisitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adaptive step control could not honour its bound above the step floor.
class StepFloorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace bellsim
