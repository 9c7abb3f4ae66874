#ifndef ISCHED_ERROR_HPP
#define ISCHED_ERROR_HPP

#include <stdexcept>
#include <string>

namespace isched {

/// Malformed or out-of-contract input (bad trace, bad parameters, bad workload).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A consumer asked the capacitor for more energy than it holds.
class InsufficientEnergy : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw InvalidInput(message);
    }
}

}  // namespace detail

}  // namespace isched

#endif  // ISCHED_ERROR_HPP
