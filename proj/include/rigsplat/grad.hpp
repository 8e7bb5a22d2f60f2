#pragma once

#include "rigsplat/raster.hpp"

#include <vector>

namespace rigsplat {

// Per-splat gradients of an image loss with respect to the local
// (optimizable) splat parameters. d_mean2d_ndc is the screen-space mean
// gradient accumulated over pixels, scaled by (width/2, height/2) so
// the densification threshold applies in the units the ecosystem's
// 0.0002 convention expects.
struct SplatGradients {
    std::vector<Vec3> d_mu_local;
    std::vector<Vec4> d_rot_local;
    std::vector<Vec3> d_log_scale;
    std::vector<Scalar> d_opacity_logit;
    std::vector<Vec3> d_color;
    std::vector<Vec2> d_mean2d_ndc;

    explicit SplatGradients(size_t n = 0) { resize(n); }

    void resize(size_t n) {
        d_mu_local.assign(n, Vec3::Zero());
        d_rot_local.assign(n, Vec4::Zero());
        d_log_scale.assign(n, Vec3::Zero());
        d_opacity_logit.assign(n, 0.0);
        d_color.assign(n, Vec3::Zero());
        d_mean2d_ndc.assign(n, Vec2::Zero());
    }

    size_t size() const { return d_mu_local.size(); }

    Scalar screen_grad_norm(size_t i) const { return d_mean2d_ndc[i].norm(); }

    // Elementwise accumulation (gradients of summed losses add).
    void add(const SplatGradients& other);

    bool all_finite() const;
};

// Gradients of sum(dL_dimage .* rendered_image) with respect to every
// splat's local parameters. Triangle frames are constants. The chain
// rule applies the same clamp, skip, cutoff, and stop rules as the
// forward pass; clamped alphas contribute zero gradient.
SplatGradients render_backward(const std::vector<RiggedSplat>& splats,
                               const std::vector<TriangleFrame>& frames, const Camera& cam,
                               const ImageBuffer& dL_dimage, const RasterOptions& opts = {});

// Running per-splat densification statistics over one interval.
struct DensifyStats {
    std::vector<Scalar> norm_accum;    // sum of screen_grad_norm per splat
    std::vector<Vec3> mu_grad_accum;   // sum of d_mu_local, used for clone offsets
    int64_t count = 0;

    explicit DensifyStats(size_t n = 0) { reset(n); }

    void reset(size_t n) {
        norm_accum.assign(n, 0.0);
        mu_grad_accum.assign(n, Vec3::Zero());
        count = 0;
    }

    size_t size() const { return norm_accum.size(); }

    Scalar mean_norm(size_t i) const { return count > 0 ? norm_accum[i] / count : 0.0; }
    Vec3 mean_mu_grad(size_t i) const { return count > 0 ? Vec3(mu_grad_accum[i] / count) : Vec3::Zero(); }
};

void accumulate_densify_stats(const SplatGradients& grads, DensifyStats& stats);

} // namespace rigsplat
