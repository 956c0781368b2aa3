#ifndef CATLEP_ERROR_HPP
#define CATLEP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace catlep {

enum class Errc {
  invalid_argument,
  degenerate_manifold,
  divergent,
  insufficient_dimension,
  degenerate_kernel,
  numerical_failure,
  io_failure,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::degenerate_manifold: return "degenerate_manifold";
    case Errc::divergent: return "divergent";
    case Errc::insufficient_dimension: return "insufficient_dimension";
    case Errc::degenerate_kernel: return "degenerate_kernel";
    case Errc::numerical_failure: return "numerical_failure";
    case Errc::io_failure: return "io_failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace catlep

#endif  // CATLEP_ERROR_HPP
