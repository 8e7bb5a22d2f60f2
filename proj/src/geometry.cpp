#include "rigsplat/geometry.hpp"

#include <cmath>

namespace rigsplat {

void RigMesh::validate() const {
    const size_t nv = vertex_count();
    for (const auto& frame : frames)
        if (frame.size() != nv)
            throw ShapeMismatch("RigMesh: frames have differing vertex counts");
    for (const auto& f : faces)
        for (uint32_t idx : f)
            if (idx >= nv) throw IndexOutOfRange("RigMesh: face index " + std::to_string(idx) +
                                                 " out of range for " + std::to_string(nv) + " vertices");
}

void Camera::validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("Camera: focal lengths must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
        throw std::invalid_argument("Camera: principal point outside image");
    if ((rotation * rotation.transpose() - Mat3::Identity()).norm() > 1e-6 ||
        std::abs(rotation.determinant() - 1.0) > 1e-6)
        throw std::invalid_argument("Camera: rotation not orthonormal");
}

Mat3 quat_to_mat(const Vec4& q) {
    const Scalar w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Vec4 mat_to_quat(const Mat3& r) {
    Quat q(r);
    q.normalize();
    Vec4 out(q.w(), q.x(), q.y(), q.z());
    if (out[0] < 0) out = -out;
    return out;
}

Vec4 quat_mul(const Vec4& a, const Vec4& b) {
    return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

TriangleFrame compute_triangle_frame(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    const Vec3 edge = v1 - v0;
    const Vec3 cross = edge.cross(v2 - v0);
    const Scalar cross_norm = cross.norm();
    if (0.5 * cross_norm <= 1e-12)
        throw DegenerateTriangle("triangle area below threshold");

    const Scalar edge_len = edge.norm();
    const Vec3 e_hat = edge / edge_len;
    const Vec3 n_hat = cross / cross_norm;
    // Height of v2 above the v0->v1 line: |edge x (v2-v0)| / |edge|.
    const Scalar height = cross_norm / edge_len;

    TriangleFrame frame;
    frame.origin = (v0 + v1 + v2) / 3.0;
    frame.rotation.col(0) = e_hat;
    frame.rotation.col(1) = n_hat;
    frame.rotation.col(2) = e_hat.cross(n_hat);
    frame.scale = 0.5 * (edge_len + height);
    return frame;
}

std::vector<TriangleFrame> build_frames(const RigMesh& mesh, size_t timestep) {
    if (timestep >= mesh.frame_count())
        throw IndexOutOfRange("build_frames: timestep " + std::to_string(timestep) +
                              " >= frame count " + std::to_string(mesh.frame_count()));
    const auto& verts = mesh.frames[timestep];
    std::vector<TriangleFrame> frames;
    frames.reserve(mesh.faces.size());
    for (size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        try {
            frames.push_back(compute_triangle_frame(verts[f[0]], verts[f[1]], verts[f[2]]));
        } catch (const DegenerateTriangle&) {
            throw DegenerateTriangle("build_frames: degenerate face " + std::to_string(i));
        }
    }
    return frames;
}

GaussianWorld local_to_global(const RiggedSplat& splat, const TriangleFrame& frame) {
    GaussianWorld g;
    const Mat3 rot_world = frame.rotation * quat_to_mat(splat.rot_local);
    g.mean = frame.scale * (frame.rotation * splat.mu_local) + frame.origin;
    const Vec3 scale_world = frame.scale * splat.scale_local();
    g.cov = rot_world * scale_world.array().square().matrix().asDiagonal() * rot_world.transpose();
    g.opacity = splat.opacity();
    g.color = splat.color;
    return g;
}

std::vector<GaussianWorld> splats_to_world(const std::vector<RiggedSplat>& splats,
                                           const std::vector<TriangleFrame>& frames) {
    std::vector<GaussianWorld> out;
    out.reserve(splats.size());
    for (const auto& s : splats) {
        if (s.binding >= frames.size())
            throw IndexOutOfRange("splats_to_world: binding " + std::to_string(s.binding) +
                                  " >= frame count " + std::to_string(frames.size()));
        out.push_back(local_to_global(s, frames[s.binding]));
    }
    return out;
}

} // namespace rigsplat
