// Exception type for breaches of runtime numerical contracts (mass monitors,
// truncation guards). Kept distinct from std::invalid_argument so callers can
// map input validation and contract breaches to different exit codes.

#ifndef KINLAB_ERRORS_HPP
#define KINLAB_ERRORS_HPP

#include <stdexcept>

namespace kinlab {

struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kinlab

#endif
