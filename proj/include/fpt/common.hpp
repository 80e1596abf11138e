#ifndef FPT_COMMON_HPP
#define FPT_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace fpt {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidTimeOrder : public Error { using Error::Error; };
class IntegrationDiverged : public Error { using Error::Error; };
class GridDegenerate : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class PreconditionError : public Error { using Error::Error; };
class SolverDiverged : public Error { using Error::Error; };
class WindowTooLong : public Error { using Error::Error; };
class RepresentationMismatch : public Error { using Error::Error; };
class TooFewHits : public Error { using Error::Error; };
class MoreTermsNeeded : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace fpt

#endif  // FPT_COMMON_HPP
