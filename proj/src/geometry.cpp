#include "svs/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace svs {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

double ObjectGeometry::bbox_diagonal() const {
  return std::sqrt(length * length + width * width + height * height);
}

double compute_radius(const ObjectGeometry& geom, const CameraIntrinsics& intr,
                      double fill) {
  require(geom.length > 0.0 && geom.width > 0.0 && geom.height > 0.0,
          ErrorCode::InvalidArgument, "object dimensions must be positive");
  require(intr.focal_px > 0.0 && intr.image_width > 0 && intr.image_height > 0,
          ErrorCode::InvalidArgument, "camera intrinsics must be positive");
  require(fill > 0.0 && fill <= 1.0, ErrorCode::InvalidArgument,
          "fill must be in (0, 1]");
  const double min_dim = std::min(intr.image_width, intr.image_height);
  return intr.focal_px * geom.bbox_diagonal() / (fill * min_dim);
}

std::vector<GridAngle> pose_grid(double theta_step,
                                 const std::vector<double>& phi_values,
                                 const std::vector<double>& theta_exclusions) {
  require(theta_step > 0.0, ErrorCode::InvalidArgument,
          "theta_step must be positive");
  const double steps = 360.0 / theta_step;
  require(std::abs(steps - std::round(steps)) < 1e-9,
          ErrorCode::InvalidArgument, "theta_step must divide 360");

  std::vector<double> phis = phi_values;
  std::sort(phis.begin(), phis.end());

  std::vector<GridAngle> grid;
  for (double theta = 0.0; theta < 360.0 - 1e-9; theta += theta_step) {
    bool excluded = false;
    for (double ex : theta_exclusions)
      if (std::abs(theta - ex) < 1e-9) excluded = true;
    if (excluded) continue;
    for (double phi : phis) grid.push_back({theta, phi});
  }
  return grid;
}

CameraPose pose_to_transform(const ObjectGeometry& geom, double theta_deg,
                             double phi_deg, double radius) {
  require(phi_deg > 0.0 && phi_deg <= 90.0, ErrorCode::InvalidArgument,
          "phi must be in (0, 90]");
  require(radius > 0.0, ErrorCode::InvalidArgument, "radius must be positive");

  const double theta = theta_deg * kDegToRad;
  const double phi = phi_deg * kDegToRad;

  CameraPose pose;
  pose.theta_deg = theta_deg;
  pose.phi_deg = phi_deg;
  pose.radius = radius;

  const Eigen::Vector3d dir(std::cos(phi) * std::cos(theta),
                            std::cos(phi) * std::sin(theta), std::sin(phi));
  pose.position = geom.gc + radius * dir;

  const Eigen::Vector3d z_cam = -dir;  // toward gc, unit by construction
  const Eigen::Vector3d world_z(0.0, 0.0, 1.0);

  Eigen::Vector3d x_cam = z_cam.cross(world_z);
  const double norm = x_cam.norm();
  if (norm < 1e-12) {
    // Looking straight down: x underdetermined, pin to world x.
    x_cam = Eigen::Vector3d(1.0, 0.0, 0.0);
  } else {
    x_cam /= norm;
  }
  Eigen::Vector3d y_cam = z_cam.cross(x_cam);
  if (y_cam.dot(world_z) < 0.0) {
    // Flip both to keep the frame right-handed with y upward.
    x_cam = -x_cam;
    y_cam = -y_cam;
  }

  pose.rotation.col(0) = x_cam;
  pose.rotation.col(1) = y_cam;
  pose.rotation.col(2) = z_cam;
  return pose;
}

}  // namespace svs
