#pragma once

#include <array>
#include <cmath>
#include <utility>

#include "trackmine/errors.hpp"

namespace trackmine {

using Vec3 = std::array<double, 3>;

/// Axis-aligned box, top-left origin, sub-pixel coordinates.
/// Area convention is w*h (no +1): proposals come from sub-pixel regressors.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }

    bool valid() const {
        return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y) &&
               std::isfinite(w) && std::isfinite(h);
    }
};

inline double iou(const BBox& a, const BBox& b) {
    double ix = std::max(a.x, b.x);
    double iy = std::max(a.y, b.y);
    double ix2 = std::min(a.x + a.w, b.x + b.w);
    double iy2 = std::min(a.y + a.h, b.y + b.h);
    double iw = ix2 - ix;
    double ih = iy2 - iy;
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

inline BBox union_rect(const BBox& a, const BBox& b) {
    double x = std::min(a.x, b.x);
    double y = std::min(a.y, b.y);
    double x2 = std::max(a.x + a.w, b.x + b.w);
    double y2 = std::max(a.y + a.h, b.y + b.h);
    return BBox{x, y, x2 - x, y2 - y};
}

/// Pinhole camera. Frame convention: x right, y down, z forward.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int image_w = 0;
    int image_h = 0;

    bool valid() const {
        return fx > 0.0 && fy > 0.0 && cx >= 0.0 && cx < image_w && cy >= 0.0 && cy < image_h;
    }
};

/// Plane in camera coordinates; height(P) = normal . P + offset.
/// With the y-down camera convention an upward normal has negative y.
struct GroundPlane {
    Vec3 normal{0.0, -1.0, 0.0};
    double offset = 0.0;

    bool valid() const {
        double n2 = normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2];
        return std::abs(std::sqrt(n2) - 1.0) <= 1e-9;
    }
};

inline Vec3 backproject(double u, double v, double depth, const CameraIntrinsics& k) {
    if (!(depth > 0.0)) throw DataError("backproject: depth must be positive");
    return Vec3{depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth};
}

/// Inverse of backproject; P must have z > 0.
inline std::pair<double, double> project(const Vec3& p, const CameraIntrinsics& k) {
    return {k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy};
}

inline double height_above_plane(const Vec3& p, const GroundPlane& plane) {
    return plane.normal[0] * p[0] + plane.normal[1] * p[1] + plane.normal[2] * p[2] + plane.offset;
}

}  // namespace trackmine
