#include "rigsplat/grad.hpp"

#include "rigsplat/parallel.hpp"

#include <cmath>

namespace rigsplat {

void SplatGradients::add(const SplatGradients& other) {
    if (other.size() != size()) throw ShapeMismatch("SplatGradients::add: size mismatch");
    for (size_t i = 0; i < size(); ++i) {
        d_mu_local[i] += other.d_mu_local[i];
        d_rot_local[i] += other.d_rot_local[i];
        d_log_scale[i] += other.d_log_scale[i];
        d_opacity_logit[i] += other.d_opacity_logit[i];
        d_color[i] += other.d_color[i];
        d_mean2d_ndc[i] += other.d_mean2d_ndc[i];
    }
}

bool SplatGradients::all_finite() const {
    for (size_t i = 0; i < size(); ++i) {
        if (!d_mu_local[i].allFinite() || !d_rot_local[i].allFinite() ||
            !d_log_scale[i].allFinite() || !std::isfinite(d_opacity_logit[i]) ||
            !d_color[i].allFinite() || !d_mean2d_ndc[i].allFinite())
            return false;
    }
    return true;
}

namespace {

// Screen-space gradient slots for one (tile, entry) pair. d_conic holds
// dL/dA in full-matrix convention (the off-diagonal value applies to
// both symmetric entries).
struct ScreenGrad {
    Vec2 d_mean2d = Vec2::Zero();
    Scalar d_conic00 = 0, d_conic01 = 0, d_conic11 = 0;
    Scalar d_opacity = 0;
    Vec3 d_color = Vec3::Zero();
};

// d(quat_to_mat)/dq contracted with a matrix gradient, for q = (w,x,y,z).
Vec4 quat_rotation_backward(const Vec4& q, const Mat3& g) {
    const Scalar w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 d;
    d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
                z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
    d[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
    d[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
                y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return d;
}

} // namespace

SplatGradients render_backward(const std::vector<RiggedSplat>& splats,
                               const std::vector<TriangleFrame>& frames, const Camera& cam,
                               const ImageBuffer& dL_dimage, const RasterOptions& opts) {
    if (dL_dimage.width != cam.width || dL_dimage.height != cam.height || dL_dimage.channels != 3)
        throw ShapeMismatch("render_backward: dL_dimage does not match camera");

    const std::vector<GaussianWorld> world = splats_to_world(splats, frames);
    const PreparedScene scene = prepare_scene(world, cam, opts.threads);

    SplatGradients grads(splats.size());
    const int64_t n_tiles = static_cast<int64_t>(scene.tile_entries.size());
    std::vector<std::vector<ScreenGrad>> tile_grads(n_tiles);

    // Pixel-space blending backward, tile-parallel into per-tile slots.
    parallel_for(n_tiles, [&](int64_t t) {
        const auto& list = scene.tile_entries[t];
        if (list.empty()) return;
        auto& slots = tile_grads[t];
        slots.assign(list.size(), ScreenGrad());

        const int tx = static_cast<int>(t % scene.tiles_x);
        const int ty = static_cast<int>(t / scene.tiles_x);
        const int x0 = tx * raster::kTileSize;
        const int y0 = ty * raster::kTileSize;
        const int x1 = std::min(scene.width, x0 + raster::kTileSize);
        const int y1 = std::min(scene.height, y0 + raster::kTileSize);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const Vec3 g_pix(dL_dimage.at(x, y, 0), dL_dimage.at(x, y, 1),
                                 dL_dimage.at(x, y, 2));
                if (g_pix.isZero()) continue;
                const Vec2 pixel(x + 0.5, y + 0.5);

                // Forward replay: find last contributing position and final T.
                Scalar transmittance = 1.0;
                int last_pos = -1;
                for (int pos = 0; pos < static_cast<int>(list.size()); ++pos) {
                    const Projected2D& p = scene.visible[list[pos]];
                    const Vec2 d = pixel - p.mean2d;
                    const Scalar q = p.conic(0, 0) * d.x() * d.x() +
                                     2.0 * p.conic(0, 1) * d.x() * d.y() +
                                     p.conic(1, 1) * d.y() * d.y();
                    if (q > raster::kCutoffSq) continue;
                    Scalar alpha = p.opacity * std::exp(-0.5 * q);
                    if (alpha > raster::kAlphaClamp) alpha = raster::kAlphaClamp;
                    if (alpha < raster::kAlphaSkip) continue;
                    transmittance *= 1.0 - alpha;
                    last_pos = pos;
                    if (transmittance < raster::kTransmittanceStop) break;
                }

                // Back-to-front sweep recovers per-splat transmittance and
                // the suffix color sum without storing intermediates.
                Scalar t_after = transmittance;
                Vec3 suffix = Vec3::Zero(); // sum_{j>i} w_j c_j
                for (int pos = last_pos; pos >= 0; --pos) {
                    const Projected2D& p = scene.visible[list[pos]];
                    const Vec2 d = pixel - p.mean2d;
                    const Scalar q = p.conic(0, 0) * d.x() * d.x() +
                                     2.0 * p.conic(0, 1) * d.x() * d.y() +
                                     p.conic(1, 1) * d.y() * d.y();
                    if (q > raster::kCutoffSq) continue;
                    const Scalar alpha_raw = p.opacity * std::exp(-0.5 * q);
                    const bool clamped = alpha_raw > raster::kAlphaClamp;
                    const Scalar alpha = clamped ? raster::kAlphaClamp : alpha_raw;
                    if (alpha < raster::kAlphaSkip) continue;

                    const Scalar t_before = t_after / (1.0 - alpha);
                    const Scalar w = alpha * t_before;

                    ScreenGrad& slot = slots[pos];
                    slot.d_color += w * g_pix;

                    Scalar d_alpha = 0.0;
                    for (int c = 0; c < 3; ++c)
                        d_alpha += g_pix[c] * (p.color[c] * t_before - suffix[c] / (1.0 - alpha));

                    if (!clamped) {
                        const Scalar gauss = std::exp(-0.5 * q);
                        slot.d_opacity += gauss * d_alpha;
                        const Scalar d_q = -0.5 * alpha_raw * d_alpha;
                        // q = d' A d: dq/dmean2d = -2 A d, dq/dA = d d'.
                        const Vec2 ad(p.conic(0, 0) * d.x() + p.conic(0, 1) * d.y(),
                                      p.conic(0, 1) * d.x() + p.conic(1, 1) * d.y());
                        slot.d_mean2d += -2.0 * d_q * ad;
                        slot.d_conic00 += d_q * d.x() * d.x();
                        slot.d_conic01 += d_q * d.x() * d.y();
                        slot.d_conic11 += d_q * d.y() * d.y();
                    }

                    suffix += w * p.color;
                    t_after = t_before;
                }
            }
        }
    }, opts.threads);

    // Merge tile slots into per-visible-splat totals, fixed tile order.
    std::vector<ScreenGrad> per_entry(scene.visible.size());
    for (int64_t t = 0; t < n_tiles; ++t) {
        const auto& list = scene.tile_entries[t];
        const auto& slots = tile_grads[t];
        for (size_t pos = 0; pos < slots.size(); ++pos) {
            ScreenGrad& dst = per_entry[list[pos]];
            const ScreenGrad& src = slots[pos];
            dst.d_mean2d += src.d_mean2d;
            dst.d_conic00 += src.d_conic00;
            dst.d_conic01 += src.d_conic01;
            dst.d_conic11 += src.d_conic11;
            dst.d_opacity += src.d_opacity;
            dst.d_color += src.d_color;
        }
    }

    // Chain through projection, covariance construction, and the rig
    // transform, parallel over visible splats.
    parallel_for(static_cast<int64_t>(scene.visible.size()), [&](int64_t e) {
        const Projected2D& p = scene.visible[e];
        const ScreenGrad& sg = per_entry[e];
        const int32_t si = p.splat_index;
        const RiggedSplat& splat = splats[si];
        const TriangleFrame& frame = frames[splat.binding];
        const GaussianWorld& g = world[si];

        grads.d_color[si] = sg.d_color;
        const Scalar o = g.opacity;
        grads.d_opacity_logit[si] = sg.d_opacity * o * (1.0 - o);
        grads.d_mean2d_ndc[si] =
            Vec2(sg.d_mean2d.x() * cam.width * 0.5, sg.d_mean2d.y() * cam.height * 0.5);

        // dL/dcov2d = -A dL/dA A  (A = conic = cov2d^{-1}).
        Mat2 g_conic;
        g_conic << sg.d_conic00, sg.d_conic01, sg.d_conic01, sg.d_conic11;
        const Mat2 g_cov2d = -p.conic * g_conic * p.conic;

        const Vec3 p_cam = cam.to_camera(g.mean);
        const Scalar z = p_cam.z();
        const Scalar inv_z = 1.0 / z;
        const Scalar inv_z2 = inv_z * inv_z;

        Eigen::Matrix<Scalar, 2, 3> jac;
        jac << cam.fx * inv_z, 0, -cam.fx * p_cam.x() * inv_z2,
               0, cam.fy * inv_z, -cam.fy * p_cam.y() * inv_z2;
        const Eigen::Matrix<Scalar, 2, 3> m = jac * cam.rotation;

        // cov2d = M Sigma M' + dilation.
        const Mat3 g_cov = m.transpose() * g_cov2d * m;
        const Eigen::Matrix<Scalar, 2, 3> g_m = 2.0 * g_cov2d * m * g.cov;
        const Eigen::Matrix<Scalar, 2, 3> g_jac = g_m * cam.rotation.transpose();

        Vec3 g_pcam = Vec3::Zero();
        // mean2d = (fx x/z + cx, fy y/z + cy).
        g_pcam.x() += sg.d_mean2d.x() * cam.fx * inv_z;
        g_pcam.y() += sg.d_mean2d.y() * cam.fy * inv_z;
        g_pcam.z() += -sg.d_mean2d.x() * cam.fx * p_cam.x() * inv_z2 -
                      sg.d_mean2d.y() * cam.fy * p_cam.y() * inv_z2;
        // Jacobian entries J00, J02, J11, J12 depend on p_cam.
        g_pcam.x() += g_jac(0, 2) * (-cam.fx * inv_z2);
        g_pcam.y() += g_jac(1, 2) * (-cam.fy * inv_z2);
        g_pcam.z() += g_jac(0, 0) * (-cam.fx * inv_z2) + g_jac(1, 1) * (-cam.fy * inv_z2) +
                      g_jac(0, 2) * (2.0 * cam.fx * p_cam.x() * inv_z2 * inv_z) +
                      g_jac(1, 2) * (2.0 * cam.fy * p_cam.y() * inv_z2 * inv_z);

        const Vec3 g_mean_world = cam.rotation.transpose() * g_pcam;

        // Sigma = Rw diag(s'^2) Rw'.
        const Mat3 rot_world = frame.rotation * quat_to_mat(splat.rot_local);
        const Vec3 scale_world = frame.scale * splat.scale_local();
        const Mat3 g_rot_world =
            2.0 * g_cov * rot_world * scale_world.array().square().matrix().asDiagonal();
        const Mat3 rt_gcov_r = rot_world.transpose() * g_cov * rot_world;
        Vec3 g_scale_world;
        for (int i = 0; i < 3; ++i) g_scale_world[i] = 2.0 * scale_world[i] * rt_gcov_r(i, i);

        // Rig transform: mean = k R mu + T, Rw = R rot(q), s' = k exp(rho).
        grads.d_mu_local[si] = frame.scale * frame.rotation.transpose() * g_mean_world;
        const Mat3 g_rot_local = frame.rotation.transpose() * g_rot_world;
        grads.d_rot_local[si] = quat_rotation_backward(splat.rot_local, g_rot_local);
        grads.d_log_scale[si] =
            (g_scale_world.array() * frame.scale * splat.scale_local().array()).matrix();
    }, opts.threads);

    return grads;
}

void accumulate_densify_stats(const SplatGradients& grads, DensifyStats& stats) {
    if (grads.size() != stats.size())
        throw IndexMismatch("accumulate_densify_stats: " + std::to_string(grads.size()) +
                            " gradients vs " + std::to_string(stats.size()) + " stat slots");
    for (size_t i = 0; i < grads.size(); ++i) {
        stats.norm_accum[i] += grads.screen_grad_norm(i);
        stats.mu_grad_accum[i] += grads.d_mu_local[i];
    }
    ++stats.count;
}

} // namespace rigsplat
