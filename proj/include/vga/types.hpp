#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vga {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

// Bad input: malformed config, invalid model, violated precondition.
// The CLI maps these to exit code 1.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical or physical failure (singular inertia, divergence, no plan).
// The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularJacobianError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoFeasibleGearError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoPlanFoundError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

// Wraps an angle difference into [-pi, pi).
inline double wrap_angle(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0) w += 2.0 * kPi;
  return w - kPi;
}

}  // namespace vga
