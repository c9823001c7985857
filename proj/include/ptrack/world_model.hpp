#pragma once

#include "ptrack/types.hpp"

#include <array>
#include <cstddef>

namespace ptrack {

/// Linear target motion x' = A x + B u + noise, noise ~ N(0, Q).
///
/// A = [[I, dt I], [0, (1 - friction) I]] and B = [[0], [dt / mass I]] in
/// 3x3 blocks. Only build_dynamics() creates these; the fields are kept
/// together so the construction parameters can be read back.
struct DynamicsModel {
  Mat6 A = Mat6::Identity();
  Mat63 B = Mat63::Zero();
  Mat6 Q = Mat6::Zero();
  double dt = 1.0;
  double friction = 0.0;
  double mass = 1.0;
};

/// Throws ConfigError naming the field when a parameter is out of range.
DynamicsModel build_dynamics(double dt, double friction, double mass, const Vec6& q_diag);

/// Same as above with a full process-noise matrix; it must be symmetric PSD.
DynamicsModel build_dynamics(double dt, double friction, double mass, const Mat6& q);

/// Target state [x, y, z, vx, vy, vz] in metres and metres per second.
using TargetState = Vec6;

TargetState propagate_state(const DynamicsModel& model, const TargetState& x, const Vec3& u,
                            const Vec6& noise);

/// One face of a convex obstacle: the half-space normal . p <= offset.
struct Face {
  Vec3 normal = Vec3::UnitX();
  double offset = 0.0;
};

/// Convex box given by six outward faces. Faces come in opposite pairs
/// (0,1), (2,3), (4,5). For axis-aligned boxes the order is
/// +x, -x, +y, -y, +z, -z.
class Cuboid {
public:
  static constexpr std::size_t kFaces = 6;

  /// Validates unit normals, anti-parallel pairs and a nonempty bounded
  /// interior. Throws ConfigError on failure.
  static Cuboid from_faces(const std::array<Face, kFaces>& faces);
  static Cuboid axis_aligned(const Vec3& lo, const Vec3& hi);

  const std::array<Face, kFaces>& faces() const noexcept { return faces_; }
  const Face& face(std::size_t i) const;
  Vec3 centroid() const;

private:
  explicit Cuboid(const std::array<Face, kFaces>& f) : faces_(f) {}
  std::array<Face, kFaces> faces_;
};

/// Boundary points count as inside.
bool contains(const Cuboid& c, const Vec3& p);

/// dot(normal_i, p) - offset_i. Positive means p is on the outward side of
/// face i. Throws std::out_of_range for i >= 6.
double face_slack(const Cuboid& c, const Vec3& p, std::size_t i);

/// Index of the face with the largest slack; ties go to the lowest index.
std::size_t max_slack_face(const Cuboid& c, const Vec3& p);

/// Axis-aligned rectangle on the ground plane.
struct GoalRegion {
  Vec3 center = Vec3::Zero();
  Vec2 half_extents = Vec2::Ones();

  bool contains(const Vec3& p) const {
    return std::abs(p.x() - center.x()) <= half_extents.x() &&
           std::abs(p.y() - center.y()) <= half_extents.y();
  }
};

struct Box3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool contains_planar(double x, double y) const {
    return x >= lo.x() && x <= hi.x() && y >= lo.y() && y <= hi.y();
  }
};

}  // namespace ptrack
