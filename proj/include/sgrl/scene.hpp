#pragma once

#include <string>
#include <vector>

#include "sgrl/common.hpp"

namespace sgrl {

enum class ShapeKind { kSphere, kFloor, kBox };

/// Which generalized coordinates (if any) position a shape.
enum class Body { kObject, kRobot, kStatic };

struct Shape {
  int id = 0;
  std::string name;
  ShapeKind kind = ShapeKind::kSphere;
  Body body = Body::kStatic;
  double radius = 0.0;        // sphere
  double height = 0.0;        // floor: boundary plane z = height
  Vec3 center = Vec3::Zero();  // static sphere or box center
  Vec3 half_extents = Vec3::Zero();  // box
};

/// The manipulated object is always shape 1.
inline constexpr int kObjectId = 1;

struct SceneSpec {
  std::vector<Shape> shapes;
  std::vector<int> support_set;
  Vec6 box_lower = Vec6::Zero();
  Vec6 box_upper = Vec6::Ones();
  double gravity = 9.81;  // acts along -z
  double mu = 0.8;
  double sigma = 0.2;     // contact-proximity scale of the feature embedding
  double object_mass = 0.1;
  Mat6 object_inertia = Mat6::Identity();

  int num_shapes() const { return static_cast<int>(shapes.size()); }
  const Shape& shape(int id) const;
  int robot_id() const;
  /// Throws ConfigError when an invariant is broken.
  void validate() const;
  /// Gravity acceleration vector (0, 0, -gravity).
  Vec3 gravity_vector() const { return Vec3(0.0, 0.0, -gravity); }
};

/// Inertial matrix diag(m I3, (2/5) m r^2 I3) of a solid sphere.
Mat6 sphere_inertia(double mass, double radius);

/// Floor at z = 0, two perpendicular walls meeting at the origin corner,
/// object and robot spheres of radius 0.08 m, sampling box [0,1]x[0,1]x[0,0.6].
SceneSpec default_double_sphere_scene();

SceneSpec load_scene(const std::string& path);
void save_scene(const SceneSpec& spec, const std::string& path);
std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& text);
/// FNV-1a over the canonical serialization, as 16 hex digits.
std::string scene_hash(const SceneSpec& spec);

// Generalized coordinates s = (robot center q, object center p).
inline Eigen::Ref<const Vec3> robot_position(const Vec6& s) { return s.head<3>(); }
inline Eigen::Ref<const Vec3> object_position(const Vec6& s) { return s.tail<3>(); }

/// Column offset of a shape's center inside s, or -1 for static shapes.
int config_offset(const Shape& shape);
/// World-frame center of a sphere or box shape at configuration s.
Vec3 shape_center(const Shape& shape, const Vec6& s);

/// Signed distance between two shapes with first-order information w.r.t. s.
struct PairDistance {
  double distance = 0.0;
  Vec3 normal = Vec3::Zero();  // unit, pointing from shape j toward shape i
  Vec3 witness_i = Vec3::Zero();
  Vec3 witness_j = Vec3::Zero();
  Row6 d_distance = Row6::Zero();
  Mat36 d_normal = Mat36::Zero();
};

PairDistance pair_distance(const SceneSpec& spec, int i, int j, const Vec6& s);

/// Signed distance of a point to the surface of shape i (negative inside).
struct SurfaceDistance {
  double distance = 0.0;
  Vec3 d_point = Vec3::Zero();
  Row6 d_config = Row6::Zero();
};

SurfaceDistance poa_surface_distance(const SceneSpec& spec, int i,
                                     const Vec3& point, const Vec6& s);

/// Signed box distance and its gradient w.r.t. the query point.
double box_signed_distance(const Vec3& center, const Vec3& half_extents,
                           const Vec3& point, Vec3* gradient = nullptr);

/// Binary support assignment of the object plus its per-contact auxiliaries.
/// Supports are kept sorted; poa and force are parallel to supports.
struct ContactMode {
  std::vector<int> supports;
  std::vector<Vec3> poa;
  std::vector<Vec3> force;

  int arity() const { return static_cast<int>(supports.size()); }
  bool is_exactly(int support) const {
    return supports.size() == 1 && supports.front() == support;
  }
};

struct StaticConfig {
  Vec6 s = Vec6::Zero();
  ContactMode mode;
  double violation = 0.0;
};

struct DynState {
  Vec3 q = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 qd = Vec3::Zero();
  Vec3 pd = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Eigen::Quaterniond quat = Eigen::Quaterniond::Identity();
  Vec3 ref = Vec3::Zero();
  Vec3 ref_vel = Vec3::Zero();
  double t = 0.0;

  /// Configuration at rest with the actuator reference on the robot.
  static DynState at_rest(const Vec6& s);
  Vec6 config() const;

  static constexpr int kFlatSize = 26;
  /// q, p, qd, pd, omega, quat (w,x,y,z), ref, ref_vel, t.
  Eigen::Matrix<double, kFlatSize, 1> flatten() const;
  static DynState unflatten(const Eigen::Ref<const VecX>& flat);
};

/// Feature dimension 6 + 2*3 + (m - 1).
int feature_dim(const SceneSpec& spec);

/// Proximity indicators c_i = 1 - clip(d_1i / sigma, 0, 1) for shapes 2..m.
VecX contact_proximity(const SceneSpec& spec, const Vec6& s);

/// (2p, q, 0.1 pd, 0.1 qd, 0.1 c).
VecX feature_embed(const SceneSpec& spec, const DynState& state);
/// Embedding of a static configuration (zero velocities).
VecX feature_embed(const SceneSpec& spec, const Vec6& s);

}  // namespace sgrl
