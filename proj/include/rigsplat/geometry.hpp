#pragma once

#include "rigsplat/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace rigsplat {

// One Gaussian in the local frame of its parent triangle.
// Scale is stored as log-scale and opacity as a logit so the optimizer
// works on unconstrained values.
struct RiggedSplat {
    Vec3 mu_local = Vec3::Zero();
    Vec4 rot_local = Vec4(1, 0, 0, 0); // (w, x, y, z), unit norm
    Vec3 log_scale = Vec3::Zero();
    Scalar opacity_logit = 0.0;
    Vec3 color = Vec3(0.5, 0.5, 0.5);
    uint32_t binding = 0;

    Vec3 scale_local() const { return log_scale.array().exp(); }
    Scalar opacity() const { return sigmoid(opacity_logit); }

    void set_scale_local(const Vec3& s) { log_scale = s.array().log(); }
    void set_opacity(Scalar o) { opacity_logit = logit(o); }

    void normalize_rotation() { rot_local.normalize(); }
};

// Local coordinate frame of one triangle: origin, orientation, and an
// isotropic scale derived from the triangle's size.
struct TriangleFrame {
    Vec3 origin = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();
    Scalar scale = 1.0;
};

// Fixed-topology triangle mesh with one vertex array per timestep.
struct RigMesh {
    std::vector<std::array<uint32_t, 3>> faces;
    std::vector<std::vector<Vec3>> frames;

    size_t face_count() const { return faces.size(); }
    size_t frame_count() const { return frames.size(); }
    size_t vertex_count() const { return frames.empty() ? 0 : frames[0].size(); }

    void validate() const;
};

// Pinhole camera. Frame convention: x right, y down, z forward.
// Pixel (i, j) has its center at (i + 0.5, j + 0.5).
struct Camera {
    Scalar fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rotation = Mat3::Identity(); // world-to-camera
    Vec3 translation = Vec3::Zero();

    Vec3 to_camera(const Vec3& p_world) const { return rotation * p_world + translation; }
    void validate() const;
};

// One Gaussian in world space, ready for projection.
struct GaussianWorld {
    Vec3 mean = Vec3::Zero();
    Mat3 cov = Mat3::Identity();
    Scalar opacity = 0.5;
    Vec3 color = Vec3(0.5, 0.5, 0.5);
};

// Rotation matrix of a quaternion (w, x, y, z). Exact for unit
// quaternions; intentionally does not normalize so that gradients of
// the raw 4-vector stay consistent with the forward evaluation.
Mat3 quat_to_mat(const Vec4& q);

// Quaternion (w, x, y, z) of a rotation matrix, w >= 0.
Vec4 mat_to_quat(const Mat3& r);

// Hamilton product a*b in (w, x, y, z) layout.
Vec4 quat_mul(const Vec4& a, const Vec4& b);

// Frame of a single triangle. Columns of the rotation are the unit
// v0->v1 edge, the unit face normal, and their cross product; scale is
// the mean of the edge length and the height of v2 above that edge.
TriangleFrame compute_triangle_frame(const Vec3& v0, const Vec3& v1, const Vec3& v2);

// All triangle frames of one mesh timestep, in face order.
std::vector<TriangleFrame> build_frames(const RigMesh& mesh, size_t timestep);

// Local-to-world transform of one splat through its triangle frame.
GaussianWorld local_to_global(const RiggedSplat& splat, const TriangleFrame& frame);

// Batched local_to_global over a splat list using each splat's binding.
std::vector<GaussianWorld> splats_to_world(const std::vector<RiggedSplat>& splats,
                                           const std::vector<TriangleFrame>& frames);

} // namespace rigsplat
