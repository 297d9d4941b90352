#include "sgrl/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sgrl/io.hpp"

namespace sgrl {

using nlohmann::json;

const Shape& SceneSpec::shape(int id) const {
  if (id < 1 || id > num_shapes()) {
    throw ConfigError("unknown shape id " + std::to_string(id));
  }
  return shapes[id - 1];
}

int SceneSpec::robot_id() const {
  for (const auto& sh : shapes) {
    if (sh.body == Body::kRobot) return sh.id;
  }
  throw ConfigError("scene has no robot shape");
}

void SceneSpec::validate() const {
  if (shapes.empty()) throw ConfigError("scene has no shapes");
  int robots = 0;
  for (int k = 0; k < num_shapes(); ++k) {
    const Shape& sh = shapes[k];
    if (sh.id != k + 1) throw ConfigError("shape ids must be contiguous 1..m");
    if (sh.kind == ShapeKind::kSphere && !(sh.radius > 0.0)) {
      throw ConfigError("sphere radius must be positive (shape " +
                        std::to_string(sh.id) + ")");
    }
    if (sh.kind == ShapeKind::kBox && !(sh.half_extents.array() > 0.0).all()) {
      throw ConfigError("box half-extents must be positive (shape " +
                        std::to_string(sh.id) + ")");
    }
    if (sh.body != Body::kStatic && sh.kind != ShapeKind::kSphere) {
      throw ConfigError("only spheres can be movable bodies");
    }
    if (sh.body == Body::kRobot) ++robots;
  }
  if (shapes[0].body != Body::kObject || shapes[0].kind != ShapeKind::kSphere) {
    throw ConfigError("shape 1 must be the object sphere");
  }
  for (int k = 1; k < num_shapes(); ++k) {
    if (shapes[k].body == Body::kObject) {
      throw ConfigError("only shape 1 may be the object");
    }
  }
  if (robots != 1) throw ConfigError("scene needs exactly one robot sphere");
  if (support_set.empty()) throw ConfigError("support set is empty");
  std::set<int> seen;
  for (int j : support_set) {
    if (j < 2 || j > num_shapes()) {
      throw ConfigError("support id out of range: " + std::to_string(j));
    }
    if (!seen.insert(j).second) throw ConfigError("duplicate support id");
  }
  if (!(box_lower.array() < box_upper.array()).all()) {
    throw ConfigError("box bounds need lower < upper");
  }
  if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
  if (!(object_mass > 0.0)) throw ConfigError("object mass must be positive");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
}

Mat6 sphere_inertia(double mass, double radius) {
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = mass * Mat3::Identity();
  m.bottomRightCorner<3, 3>() = 0.4 * mass * radius * radius * Mat3::Identity();
  return m;
}

SceneSpec default_double_sphere_scene() {
  SceneSpec spec;
  Shape object;
  object.id = 1;
  object.name = "object";
  object.kind = ShapeKind::kSphere;
  object.body = Body::kObject;
  object.radius = 0.08;

  Shape robot;
  robot.id = 2;
  robot.name = "robot";
  robot.kind = ShapeKind::kSphere;
  robot.body = Body::kRobot;
  robot.radius = 0.08;

  Shape floor;
  floor.id = 3;
  floor.name = "floor";
  floor.kind = ShapeKind::kFloor;
  floor.height = 0.0;

  Shape wall_x;
  wall_x.id = 4;
  wall_x.name = "wall_x";
  wall_x.kind = ShapeKind::kBox;
  wall_x.center = Vec3(-0.05, 0.5, 0.3);
  wall_x.half_extents = Vec3(0.05, 0.6, 0.3);

  Shape wall_y;
  wall_y.id = 5;
  wall_y.name = "wall_y";
  wall_y.kind = ShapeKind::kBox;
  wall_y.center = Vec3(0.5, -0.05, 0.3);
  wall_y.half_extents = Vec3(0.6, 0.05, 0.3);

  spec.shapes = {object, robot, floor, wall_x, wall_y};
  spec.support_set = {2, 3, 4, 5};
  spec.box_lower << 0.0, 0.0, 0.0, 0.0, 0.0, 0.0;
  spec.box_upper << 1.0, 1.0, 0.6, 1.0, 1.0, 0.6;
  spec.gravity = 9.81;
  spec.mu = 0.8;
  spec.sigma = 0.2;
  spec.object_mass = 0.1;
  spec.object_inertia = sphere_inertia(spec.object_mass, object.radius);
  return spec;
}

namespace {

std::string kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kFloor: return "floor";
    case ShapeKind::kBox: return "box";
  }
  return "?";
}

std::string body_name(Body b) {
  switch (b) {
    case Body::kObject: return "object";
    case Body::kRobot: return "robot";
    case Body::kStatic: return "static";
  }
  return "?";
}

template <typename Derived>
json to_array(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> from_array(const json& a) {
  if (!a.is_array() || static_cast<int>(a.size()) != N) {
    throw ConfigError("expected array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int k = 0; k < N; ++k) v(k) = a.at(k).get<double>();
  return v;
}

}  // namespace

std::string scene_to_json(const SceneSpec& spec) {
  json j;
  j["format"] = "sgrl.scene";
  j["version"] = 1;
  j["gravity"] = spec.gravity;
  j["mu"] = spec.mu;
  j["sigma"] = spec.sigma;
  j["object_mass"] = spec.object_mass;
  j["box_lower"] = to_array(spec.box_lower);
  j["box_upper"] = to_array(spec.box_upper);
  j["support_set"] = spec.support_set;
  json inertia = json::array();
  for (int r = 0; r < 6; ++r) inertia.push_back(to_array(spec.object_inertia.row(r).transpose()));
  j["object_inertia"] = inertia;
  json shapes = json::array();
  for (const auto& sh : spec.shapes) {
    json o;
    o["id"] = sh.id;
    o["name"] = sh.name;
    o["kind"] = kind_name(sh.kind);
    o["body"] = body_name(sh.body);
    switch (sh.kind) {
      case ShapeKind::kSphere:
        o["radius"] = sh.radius;
        if (sh.body == Body::kStatic) o["center"] = to_array(sh.center);
        break;
      case ShapeKind::kFloor:
        o["height"] = sh.height;
        break;
      case ShapeKind::kBox:
        o["center"] = to_array(sh.center);
        o["half_extents"] = to_array(sh.half_extents);
        break;
    }
    shapes.push_back(o);
  }
  j["shapes"] = shapes;
  return j.dump(2);
}

SceneSpec scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene file is not valid JSON: ") + e.what());
  }
  try {
    SceneSpec spec;
    spec.gravity = j.value("gravity", 9.81);
    spec.mu = j.value("mu", 0.8);
    spec.sigma = j.value("sigma", 0.2);
    spec.object_mass = j.at("object_mass").get<double>();
    spec.box_lower = from_array<6>(j.at("box_lower"));
    spec.box_upper = from_array<6>(j.at("box_upper"));
    spec.support_set = j.at("support_set").get<std::vector<int>>();
    for (const auto& o : j.at("shapes")) {
      Shape sh;
      sh.id = o.at("id").get<int>();
      sh.name = o.value("name", "");
      const std::string kind = o.at("kind").get<std::string>();
      const std::string body = o.value("body", "static");
      if (kind == "sphere") {
        sh.kind = ShapeKind::kSphere;
        sh.radius = o.at("radius").get<double>();
        if (o.contains("center")) sh.center = from_array<3>(o.at("center"));
      } else if (kind == "floor") {
        sh.kind = ShapeKind::kFloor;
        sh.height = o.value("height", 0.0);
      } else if (kind == "box") {
        sh.kind = ShapeKind::kBox;
        sh.center = from_array<3>(o.at("center"));
        sh.half_extents = from_array<3>(o.at("half_extents"));
      } else {
        throw ConfigError("unknown shape kind '" + kind + "'");
      }
      if (body == "object") {
        sh.body = Body::kObject;
      } else if (body == "robot") {
        sh.body = Body::kRobot;
      } else if (body == "static") {
        sh.body = Body::kStatic;
      } else {
        throw ConfigError("unknown body '" + body + "'");
      }
      spec.shapes.push_back(sh);
    }
    std::sort(spec.shapes.begin(), spec.shapes.end(),
              [](const Shape& a, const Shape& b) { return a.id < b.id; });
    if (j.contains("object_inertia")) {
      const auto& rows = j.at("object_inertia");
      if (!rows.is_array() || rows.size() != 6) throw ConfigError("object_inertia must be 6x6");
      for (int r = 0; r < 6; ++r) spec.object_inertia.row(r) = from_array<6>(rows.at(r)).transpose();
    } else if (!spec.shapes.empty()) {
      spec.object_inertia = sphere_inertia(spec.object_mass, spec.shapes.front().radius);
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scene: ") + e.what());
  }
}

SceneSpec load_scene(const std::string& path) {
  return scene_from_json(read_text_file(path));
}

void save_scene(const SceneSpec& spec, const std::string& path) {
  write_text_file(path, scene_to_json(spec) + "\n");
}

std::string scene_hash(const SceneSpec& spec) {
  return fnv1a_hex(scene_to_json(spec));
}

int config_offset(const Shape& shape) {
  switch (shape.body) {
    case Body::kRobot: return 0;
    case Body::kObject: return 3;
    case Body::kStatic: return -1;
  }
  return -1;
}

Vec3 shape_center(const Shape& shape, const Vec6& s) {
  const int off = config_offset(shape);
  if (off >= 0) return s.segment<3>(off);
  return shape.center;
}

double box_signed_distance(const Vec3& center, const Vec3& half_extents,
                           const Vec3& point, Vec3* gradient) {
  const Vec3 local = point - center;
  const Vec3 q = local.cwiseAbs() - half_extents;
  if ((q.array() > 0.0).any()) {
    const Vec3 outside = q.cwiseMax(0.0);
    const double dist = outside.norm();
    if (gradient) {
      for (int k = 0; k < 3; ++k) {
        (*gradient)(k) = outside(k) * (local(k) < 0.0 ? -1.0 : 1.0) / dist;
      }
    }
    return dist;
  }
  int axis = 0;
  for (int k = 1; k < 3; ++k) {
    if (q(k) > q(axis)) axis = k;
  }
  if (gradient) {
    gradient->setZero();
    (*gradient)(axis) = local(axis) < 0.0 ? -1.0 : 1.0;
  }
  return q(axis);
}

namespace {

// Distance from sphere a to shape b, normal pointing from b toward a.
// Derivatives are w.r.t. the centers of a and (if a sphere) b.
struct SphereQuery {
  double distance;
  Vec3 normal;
  Vec3 witness_a;
  Vec3 witness_b;
  Mat3 dn_dca;  // d normal / d center_a
  Mat3 dn_dcb;  // d normal / d center_b (spheres only)
  bool b_is_sphere;
};

SphereQuery sphere_vs(const Shape& a, const Shape& b, const Vec6& s) {
  const Vec3 ca = shape_center(a, s);
  SphereQuery r{};
  r.dn_dca.setZero();
  r.dn_dcb.setZero();
  r.b_is_sphere = false;
  switch (b.kind) {
    case ShapeKind::kSphere: {
      const Vec3 cb = shape_center(b, s);
      const Vec3 u = ca - cb;
      const double len = u.norm();
      if (len < 1e-12) {
        throw DegenerateGeometryError("coincident sphere centers (shapes " +
                                      std::to_string(a.id) + ", " +
                                      std::to_string(b.id) + ")");
      }
      r.normal = u / len;
      r.distance = len - a.radius - b.radius;
      r.dn_dca = (Mat3::Identity() - r.normal * r.normal.transpose()) / len;
      r.dn_dcb = -r.dn_dca;
      r.witness_b = cb + b.radius * r.normal;
      r.b_is_sphere = true;
      break;
    }
    case ShapeKind::kFloor: {
      r.normal = Vec3::UnitZ();
      r.distance = ca.z() - b.height - a.radius;
      r.witness_b = Vec3(ca.x(), ca.y(), b.height);
      break;
    }
    case ShapeKind::kBox: {
      Vec3 grad;
      const double sdf = box_signed_distance(b.center, b.half_extents, ca, &grad);
      r.normal = grad;
      r.distance = sdf - a.radius;
      if (sdf > 0.0) {
        const Vec3 local = ca - b.center;
        Mat3 proj = Mat3::Zero();
        for (int k = 0; k < 3; ++k) {
          if (std::abs(local(k)) > b.half_extents(k)) proj(k, k) = 1.0;
        }
        r.dn_dca = (Mat3::Identity() - grad * grad.transpose()) * proj / sdf;
      }
      r.witness_b = ca - sdf * grad;
      break;
    }
  }
  r.witness_a = ca - a.radius * r.normal;
  return r;
}

}  // namespace

PairDistance pair_distance(const SceneSpec& spec, int i, int j, const Vec6& s) {
  if (i == j) throw ConfigError("pair_distance needs two distinct shapes");
  const Shape& a = spec.shape(i);
  const Shape& b = spec.shape(j);
  if (a.kind != ShapeKind::kSphere) {
    if (b.kind != ShapeKind::kSphere) {
      throw ConfigError("no distance between non-sphere shapes " +
                        std::to_string(i) + " and " + std::to_string(j));
    }
    PairDistance flipped = pair_distance(spec, j, i, s);
    std::swap(flipped.witness_i, flipped.witness_j);
    flipped.normal = -flipped.normal;
    flipped.d_normal = -flipped.d_normal;
    return flipped;
  }
  const SphereQuery q = sphere_vs(a, b, s);
  PairDistance out;
  out.distance = q.distance;
  out.normal = q.normal;
  out.witness_i = q.witness_a;
  out.witness_j = q.witness_b;
  const int off_a = config_offset(a);
  const int off_b = config_offset(b);
  if (off_a >= 0) {
    out.d_distance.segment<3>(off_a) += q.normal.transpose();
    out.d_normal.block<3, 3>(0, off_a) += q.dn_dca;
  }
  if (off_b >= 0 && q.b_is_sphere) {
    out.d_distance.segment<3>(off_b) -= q.normal.transpose();
    out.d_normal.block<3, 3>(0, off_b) += q.dn_dcb;
  }
  return out;
}

SurfaceDistance poa_surface_distance(const SceneSpec& spec, int i,
                                     const Vec3& point, const Vec6& s) {
  const Shape& sh = spec.shape(i);
  SurfaceDistance out;
  switch (sh.kind) {
    case ShapeKind::kSphere: {
      const Vec3 c = shape_center(sh, s);
      const Vec3 u = point - c;
      const double len = u.norm();
      if (len < 1e-12) {
        throw DegenerateGeometryError("point of attack at sphere center (shape " +
                                      std::to_string(i) + ")");
      }
      out.distance = len - sh.radius;
      out.d_point = u / len;
      const int off = config_offset(sh);
      if (off >= 0) out.d_config.segment<3>(off) = -out.d_point.transpose();
      break;
    }
    case ShapeKind::kFloor:
      out.distance = point.z() - sh.height;
      out.d_point = Vec3::UnitZ();
      break;
    case ShapeKind::kBox:
      out.distance = box_signed_distance(sh.center, sh.half_extents, point, &out.d_point);
      break;
  }
  return out;
}

DynState DynState::at_rest(const Vec6& s) {
  DynState st;
  st.q = s.head<3>();
  st.p = s.tail<3>();
  st.ref = st.q;
  return st;
}

Vec6 DynState::config() const {
  Vec6 s;
  s << q, p;
  return s;
}

Eigen::Matrix<double, DynState::kFlatSize, 1> DynState::flatten() const {
  Eigen::Matrix<double, kFlatSize, 1> f;
  f << q, p, qd, pd, omega, quat.w(), quat.x(), quat.y(), quat.z(), ref, ref_vel, t;
  return f;
}

DynState DynState::unflatten(const Eigen::Ref<const VecX>& f) {
  if (f.size() != kFlatSize) throw ConfigError("state snapshot needs 26 values");
  DynState st;
  st.q = f.segment<3>(0);
  st.p = f.segment<3>(3);
  st.qd = f.segment<3>(6);
  st.pd = f.segment<3>(9);
  st.omega = f.segment<3>(12);
  st.quat = Eigen::Quaterniond(f(15), f(16), f(17), f(18));
  st.ref = f.segment<3>(19);
  st.ref_vel = f.segment<3>(22);
  st.t = f(25);
  return st;
}

int feature_dim(const SceneSpec& spec) { return 12 + spec.num_shapes() - 1; }

VecX contact_proximity(const SceneSpec& spec, const Vec6& s) {
  const int m = spec.num_shapes();
  VecX c(m - 1);
  const Shape& obj = spec.shape(kObjectId);
  const Vec3 p = object_position(s);
  for (int id = 2; id <= m; ++id) {
    const Shape& other = spec.shape(id);
    double d;
    if (other.kind == ShapeKind::kSphere) {
      // Coincident centers still have a well-defined (maximal) penetration.
      d = (p - shape_center(other, s)).norm() - obj.radius - other.radius;
    } else {
      d = pair_distance(spec, kObjectId, id, s).distance;
    }
    c(id - 2) = 1.0 - std::clamp(d / spec.sigma, 0.0, 1.0);
  }
  return c;
}

VecX feature_embed(const SceneSpec& spec, const DynState& state) {
  VecX phi(feature_dim(spec));
  phi << 2.0 * state.p, state.q, 0.1 * state.pd, 0.1 * state.qd,
      0.1 * contact_proximity(spec, state.config());
  return phi;
}

VecX feature_embed(const SceneSpec& spec, const Vec6& s) {
  return feature_embed(spec, DynState::at_rest(s));
}

}  // namespace sgrl
