#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ptrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Scenario parse or validation failure. `field()` names the offending key
/// path (e.g. "dynamics.friction") when one is known.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Bearing undefined because two planar positions coincide.
class DegenerateGeometry : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input matrix failed a symmetric positive semidefinite check.
class NotPsdError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline Vec3 position_of(const Vec6& x) { return x.head<3>(); }
inline Vec3 velocity_of(const Vec6& x) { return x.tail<3>(); }

/// Symmetrize in place: (M + M^T) / 2.
template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

/// True if `m` is symmetric to `sym_tol` and its smallest eigenvalue is
/// no less than `-eig_tol`.
bool is_psd(const MatX& m, double sym_tol = 1e-9, double eig_tol = 1e-9);

}  // namespace ptrack
