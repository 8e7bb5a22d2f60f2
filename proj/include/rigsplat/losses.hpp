#pragma once

#include "rigsplat/geometry.hpp"
#include "rigsplat/image.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace rigsplat {

// Optional perceptual metric plug-in. Nothing in this artifact ships an
// implementation; the slot exists so a learned backend can be
// registered without touching the loss code.
struct PerceptualBackend {
    std::function<Scalar(const ImageBuffer&, const ImageBuffer&)> value;
    std::function<ImageBuffer(const ImageBuffer&, const ImageBuffer&)> grad_a;
};

struct LossWeights {
    Scalar lambda1 = 0.8;      // L1
    Scalar lambda2 = 0.2;      // 1 - SSIM
    Scalar lambda3 = 0.1;      // perceptual slot; contributes 0 without a backend
    Scalar lambda_pos = 0.01;
    Scalar lambda_scale = 1.0;
    Scalar eps_pos = 1.0;      // triangle-local units
    Scalar eps_scale = 0.6;
    std::shared_ptr<PerceptualBackend> perceptual;
};

// Mean absolute difference over all pixels and channels.
Scalar l1_loss(const ImageBuffer& a, const ImageBuffer& b);

// d l1_loss / da; ties (a == b) map to zero.
ImageBuffer l1_loss_grad(const ImageBuffer& a, const ImageBuffer& b);

// Mean local SSIM, 11x11 Gaussian window sigma=1.5, C1=0.01^2,
// C2=0.03^2, dynamic range 1, valid windows only, per channel then
// averaged. Images must be at least 11x11.
Scalar ssim(const ImageBuffer& a, const ImageBuffer& b);

struct SsimResult {
    Scalar value = 0.0;
    ImageBuffer grad_a; // d ssim / da
};
SsimResult ssim_with_grad(const ImageBuffer& a, const ImageBuffer& b);

// 10 log10(1/MSE), capped at 100 dB (the cap doubles as the MSE=0 sentinel).
Scalar psnr(const ImageBuffer& a, const ImageBuffer& b);
constexpr Scalar kPsnrCap = 100.0;

// lambda1 L1 + lambda2 (1 - SSIM) + lambda3 * perceptual.
Scalar image_loss(const ImageBuffer& a, const ImageBuffer& b, const LossWeights& w);

struct ImageLossResult {
    Scalar value = 0.0;
    ImageBuffer grad_a;
};
ImageLossResult image_loss_with_grad(const ImageBuffer& a, const ImageBuffer& b,
                                     const LossWeights& w);

// Mean over splats of || max(|mu|, eps) ||_2 (elementwise max of
// magnitudes). Constant, with zero gradient, while every component is
// inside the threshold.
Scalar pos_regularizer(const std::vector<RiggedSplat>& splats, Scalar eps_pos);
std::vector<Vec3> pos_regularizer_grad(const std::vector<RiggedSplat>& splats, Scalar eps_pos);

// Mean over splats of || max(s, eps) ||_2 with s the local scale.
// Gradients are with respect to the stored log-scales.
Scalar scale_regularizer(const std::vector<RiggedSplat>& splats, Scalar eps_scale);
std::vector<Vec3> scale_regularizer_grad(const std::vector<RiggedSplat>& splats, Scalar eps_scale);

// Full training objective: image loss on the reconstruction pair, the
// mean image loss over the sampled view pairs, plus the splat
// regularizers. Gradient buffers feed render_backward.
struct TotalLoss {
    Scalar value = 0.0;
    Scalar rec_term = 0.0;
    Scalar view_term = 0.0;
    Scalar pos_term = 0.0;
    Scalar scale_term = 0.0;
    ImageBuffer d_rec;
    std::vector<ImageBuffer> d_views;
};

TotalLoss total_loss(const ImageBuffer& rec, const ImageBuffer& rec_target,
                     const std::vector<ImageBuffer>& views,
                     const std::vector<ImageBuffer>& view_targets,
                     const std::vector<RiggedSplat>& splats, const LossWeights& w);

} // namespace rigsplat
