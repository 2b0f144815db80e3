#ifndef BLNO_ERROR_HPP_
#define BLNO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace blno {

// Thrown by numeric routines when a contract cannot be met (singular
// system, non-convergence, non-finite state). The CLI maps it to exit
// code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace blno

#endif  // BLNO_ERROR_HPP_
