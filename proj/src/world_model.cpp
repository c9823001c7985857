#include "ptrack/world_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ptrack {

bool is_psd(const MatX& m, double sym_tol, double eig_tol) {
  if (m.rows() != m.cols()) return false;
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > sym_tol * std::max(1.0, m.cwiseAbs().maxCoeff()))
    return false;
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -eig_tol;
}

namespace {

void check_dynamics_params(double dt, double friction, double mass) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dynamics.dt", "must be > 0");
  if (!(friction >= 0.0 && friction <= 1.0))
    throw ConfigError("dynamics.friction", "must lie in [0, 1]");
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("dynamics.mass", "must be > 0");
}

DynamicsModel make_blocks(double dt, double friction, double mass) {
  DynamicsModel m;
  m.dt = dt;
  m.friction = friction;
  m.mass = mass;
  m.A.setIdentity();
  m.A.block<3, 3>(0, 3) = dt * Mat3::Identity();
  m.A.block<3, 3>(3, 3) = (1.0 - friction) * Mat3::Identity();
  m.B.setZero();
  m.B.block<3, 3>(3, 0) = (dt / mass) * Mat3::Identity();
  return m;
}

}  // namespace

DynamicsModel build_dynamics(double dt, double friction, double mass, const Vec6& q_diag) {
  check_dynamics_params(dt, friction, mass);
  for (int i = 0; i < 6; ++i) {
    if (!(q_diag[i] >= 0.0) || !std::isfinite(q_diag[i]))
      throw ConfigError("dynamics.q_diag", "entries must be finite and >= 0");
  }
  DynamicsModel m = make_blocks(dt, friction, mass);
  m.Q = q_diag.asDiagonal();
  return m;
}

DynamicsModel build_dynamics(double dt, double friction, double mass, const Mat6& q) {
  check_dynamics_params(dt, friction, mass);
  if (!is_psd(q, 1e-12, 1e-12)) throw ConfigError("dynamics.q", "must be symmetric PSD");
  DynamicsModel m = make_blocks(dt, friction, mass);
  m.Q = q;
  return m;
}

TargetState propagate_state(const DynamicsModel& model, const TargetState& x, const Vec3& u,
                            const Vec6& noise) {
  return model.A * x + model.B * u + noise;
}

Cuboid Cuboid::from_faces(const std::array<Face, kFaces>& faces) {
  for (std::size_t i = 0; i < kFaces; ++i) {
    const double n = faces[i].normal.norm();
    if (std::abs(n - 1.0) > 1e-9 || !std::isfinite(faces[i].offset))
      throw ConfigError("obstacles.faces[" + std::to_string(i) + "]", "normal must be unit length");
  }
  for (std::size_t i = 0; i < kFaces; i += 2) {
    if ((faces[i].normal + faces[i + 1].normal).norm() > 1e-9)
      throw ConfigError("obstacles.faces[" + std::to_string(i) + "]",
                        "opposite face normals must be anti-parallel");
  }
  Cuboid c(faces);
  Mat3 n;
  for (int k = 0; k < 3; ++k) n.row(k) = faces[2 * k].normal.transpose();
  if (std::abs(n.determinant()) < 1e-9)
    throw ConfigError("obstacles.faces", "face pairs do not bound a volume");
  const Vec3 mid = c.centroid();
  for (std::size_t i = 0; i < kFaces; ++i) {
    if (face_slack(c, mid, i) >= 0.0)
      throw ConfigError("obstacles.faces", "half-space intersection is empty");
  }
  return c;
}

Cuboid Cuboid::axis_aligned(const Vec3& lo, const Vec3& hi) {
  if (!((hi.array() > lo.array()).all()))
    throw ConfigError("obstacles.max", "must exceed obstacles.min on every axis");
  std::array<Face, kFaces> f;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 e = Vec3::Zero();
    e[axis] = 1.0;
    f[2 * axis] = Face{e, hi[axis]};
    f[2 * axis + 1] = Face{-e, -lo[axis]};
  }
  return from_faces(f);
}

const Face& Cuboid::face(std::size_t i) const {
  if (i >= kFaces) throw std::out_of_range("cuboid face index " + std::to_string(i));
  return faces_[i];
}

Vec3 Cuboid::centroid() const {
  // Mid-plane of each opposite pair: n . p = (b_i - b_j) / 2.
  Mat3 n;
  Vec3 rhs;
  for (int k = 0; k < 3; ++k) {
    n.row(k) = faces_[2 * k].normal.transpose();
    rhs[k] = 0.5 * (faces_[2 * k].offset - faces_[2 * k + 1].offset);
  }
  return n.partialPivLu().solve(rhs);
}

bool contains(const Cuboid& c, const Vec3& p) {
  for (const Face& f : c.faces()) {
    if (f.normal.dot(p) > f.offset) return false;
  }
  return true;
}

double face_slack(const Cuboid& c, const Vec3& p, std::size_t i) {
  const Face& f = c.face(i);
  return f.normal.dot(p) - f.offset;
}

std::size_t max_slack_face(const Cuboid& c, const Vec3& p) {
  std::size_t best = 0;
  double best_slack = face_slack(c, p, 0);
  for (std::size_t i = 1; i < Cuboid::kFaces; ++i) {
    const double s = face_slack(c, p, i);
    if (s > best_slack) {
      best_slack = s;
      best = i;
    }
  }
  return best;
}

}  // namespace ptrack
