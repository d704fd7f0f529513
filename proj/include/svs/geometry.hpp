#pragma once

#include <Eigen/Dense>
#include <vector>

#include "svs/errors.hpp"

namespace svs {

/// Object bounding box; gc is the geometric center in world coordinates.
struct ObjectGeometry {
  Eigen::Vector3d gc = Eigen::Vector3d::Zero();
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;

  double bbox_diagonal() const;
};

struct CameraIntrinsics {
  double focal_px = 0.0;
  int image_width = 0;
  int image_height = 0;
};

/// Camera placement on the view half-sphere. `rotation` columns are the
/// camera axes (x, y, z) expressed in world coordinates; z looks at gc.
struct CameraPose {
  double theta_deg = 0.0;
  double phi_deg = 0.0;
  double radius = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

struct GridAngle {
  double theta = 0.0;
  double phi = 0.0;

  bool operator==(const GridAngle&) const = default;
};

/// Half-sphere radius such that the bounding-box diagonal spans `fill` of
/// the smaller image dimension under a pinhole projection.
double compute_radius(const ObjectGeometry& geom, const CameraIntrinsics& intr,
                      double fill = 0.7);

/// (theta, phi) lattice: theta from 0 by theta_step below 360 minus the
/// exclusions, phi from phi_values; ordered theta ascending, phi ascending.
std::vector<GridAngle> pose_grid(
    double theta_step = 45.0,
    const std::vector<double>& phi_values = {45.0, 60.0, 75.0},
    const std::vector<double>& theta_exclusions = {270.0});

/// Rigid camera transform for a sphere point: position at
/// gc + R*(cos(phi)cos(theta), cos(phi)sin(theta), sin(phi)), z axis toward
/// gc, x axis in the world xy-plane, y axis pointing upward. At phi == 90
/// the x axis is pinned to world x.
CameraPose pose_to_transform(const ObjectGeometry& geom, double theta_deg,
                             double phi_deg, double radius);

}  // namespace svs
