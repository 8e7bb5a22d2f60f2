#include "rigsplat/losses.hpp"

#include <array>
#include <cmath>

namespace rigsplat {

Scalar l1_loss(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "l1_loss");
    Scalar sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i) sum += std::abs(a.data[i] - b.data[i]);
    return sum / static_cast<Scalar>(a.size());
}

ImageBuffer l1_loss_grad(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "l1_loss_grad");
    ImageBuffer g(a.width, a.height, a.channels);
    const Scalar inv_n = 1.0 / static_cast<Scalar>(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const Scalar d = a.data[i] - b.data[i];
        g.data[i] = d > 0 ? inv_n : (d < 0 ? -inv_n : 0.0);
    }
    return g;
}

namespace {

constexpr int kWindow = 11;
constexpr Scalar kC1 = 0.01 * 0.01;
constexpr Scalar kC2 = 0.03 * 0.03;

std::array<Scalar, kWindow> gaussian_window() {
    std::array<Scalar, kWindow> w{};
    const Scalar sigma = 1.5;
    Scalar sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const Scalar d = i - (kWindow - 1) / 2.0;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Single-channel plane with simple (w, h) indexing.
struct Plane {
    int w = 0, h = 0;
    std::vector<Scalar> v;
    Plane() = default;
    Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<size_t>(w_) * h_, 0.0) {}
    Scalar& at(int x, int y) { return v[static_cast<size_t>(y) * w + x]; }
    Scalar at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
};

Plane extract_channel(const ImageBuffer& img, int c) {
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) p.at(x, y) = img.at(x, y, c);
    return p;
}

// Valid-mode separable correlation with the Gaussian window.
Plane conv_valid(const Plane& in, const std::array<Scalar, kWindow>& w) {
    Plane mid(in.w - kWindow + 1, in.h);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < mid.w; ++x) {
            Scalar s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += w[k] * in.at(x + k, y);
            mid.at(x, y) = s;
        }
    Plane out(mid.w, in.h - kWindow + 1);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            Scalar s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += w[k] * mid.at(x, y + k);
            out.at(x, y) = s;
        }
    return out;
}

// Adjoint of conv_valid: spreads each valid-grid value over its window.
Plane conv_valid_adjoint(const Plane& in, int full_w, int full_h,
                         const std::array<Scalar, kWindow>& w) {
    Plane mid(in.w, full_h);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            const Scalar v = in.at(x, y);
            if (v == 0.0) continue;
            for (int k = 0; k < kWindow; ++k) mid.at(x, y + k) += w[k] * v;
        }
    Plane out(full_w, full_h);
    for (int y = 0; y < full_h; ++y)
        for (int x = 0; x < in.w; ++x) {
            const Scalar v = mid.at(x, y);
            if (v == 0.0) continue;
            for (int k = 0; k < kWindow; ++k) out.at(x + k, y) += w[k] * v;
        }
    return out;
}

Plane hadamard(const Plane& a, const Plane& b) {
    Plane out(a.w, a.h);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

void check_ssim_inputs(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "ssim");
    if (a.width < kWindow || a.height < kWindow)
        throw BadDimensions("ssim: images must be at least 11x11");
}

} // namespace

Scalar ssim(const ImageBuffer& a, const ImageBuffer& b) {
    check_ssim_inputs(a, b);
    const auto w = gaussian_window();
    Scalar total = 0.0;
    size_t count = 0;
    for (int c = 0; c < a.channels; ++c) {
        const Plane x = extract_channel(a, c);
        const Plane y = extract_channel(b, c);
        const Plane ux = conv_valid(x, w);
        const Plane uy = conv_valid(y, w);
        const Plane uxx = conv_valid(hadamard(x, x), w);
        const Plane uyy = conv_valid(hadamard(y, y), w);
        const Plane uxy = conv_valid(hadamard(x, y), w);
        for (size_t i = 0; i < ux.v.size(); ++i) {
            const Scalar mx = ux.v[i], my = uy.v[i];
            const Scalar vx = uxx.v[i] - mx * mx;
            const Scalar vy = uyy.v[i] - my * my;
            const Scalar vxy = uxy.v[i] - mx * my;
            const Scalar a1 = 2 * mx * my + kC1;
            const Scalar a2 = 2 * vxy + kC2;
            const Scalar b1 = mx * mx + my * my + kC1;
            const Scalar b2 = vx + vy + kC2;
            total += (a1 * a2) / (b1 * b2);
        }
        count += ux.v.size();
    }
    return total / static_cast<Scalar>(count);
}

SsimResult ssim_with_grad(const ImageBuffer& a, const ImageBuffer& b) {
    check_ssim_inputs(a, b);
    const auto w = gaussian_window();
    SsimResult res;
    res.grad_a = ImageBuffer(a.width, a.height, a.channels);
    Scalar total = 0.0;
    size_t count = 0;
    for (int c = 0; c < a.channels; ++c) {
        const Plane x = extract_channel(a, c);
        const Plane y = extract_channel(b, c);
        const Plane ux = conv_valid(x, w);
        const Plane uy = conv_valid(y, w);
        const Plane uxx = conv_valid(hadamard(x, x), w);
        const Plane uyy = conv_valid(hadamard(y, y), w);
        const Plane uxy = conv_valid(hadamard(x, y), w);
        // Window-level partials: S depends on x through (mu_x, var_x, cov_xy).
        Plane p_const(ux.w, ux.h); // dS/dmu - 2 dS/dvar mu_x - dS/dcov mu_y
        Plane p_x(ux.w, ux.h);     // coefficient of x_q: 2 dS/dvar
        Plane p_y(ux.w, ux.h);     // coefficient of y_q: dS/dcov
        for (size_t i = 0; i < ux.v.size(); ++i) {
            const Scalar mx = ux.v[i], my = uy.v[i];
            const Scalar vx = uxx.v[i] - mx * mx;
            const Scalar vy = uyy.v[i] - my * my;
            const Scalar vxy = uxy.v[i] - mx * my;
            const Scalar a1 = 2 * mx * my + kC1;
            const Scalar a2 = 2 * vxy + kC2;
            const Scalar b1 = mx * mx + my * my + kC1;
            const Scalar b2 = vx + vy + kC2;
            const Scalar s = (a1 * a2) / (b1 * b2);
            total += s;
            const Scalar d_mu = (2 * my * b1 - a1 * 2 * mx) / (b1 * b1) * (a2 / b2);
            const Scalar d_var = -s / b2;
            const Scalar d_cov = (a1 / b1) * (2.0 / b2);
            p_const.v[i] = d_mu - 2 * d_var * mx - d_cov * my;
            p_x.v[i] = 2 * d_var;
            p_y.v[i] = d_cov;
        }
        count += ux.v.size();
        const Plane s_const = conv_valid_adjoint(p_const, a.width, a.height, w);
        const Plane s_x = conv_valid_adjoint(p_x, a.width, a.height, w);
        const Plane s_y = conv_valid_adjoint(p_y, a.width, a.height, w);
        for (int py = 0; py < a.height; ++py)
            for (int px = 0; px < a.width; ++px)
                res.grad_a.at(px, py, c) =
                    s_const.at(px, py) + x.at(px, py) * s_x.at(px, py) + y.at(px, py) * s_y.at(px, py);
    }
    const Scalar inv = 1.0 / static_cast<Scalar>(count);
    res.value = total * inv;
    for (auto& v : res.grad_a.data) v *= inv;
    return res;
}

Scalar psnr(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "psnr");
    Scalar mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const Scalar d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<Scalar>(a.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

Scalar image_loss(const ImageBuffer& a, const ImageBuffer& b, const LossWeights& w) {
    Scalar v = w.lambda1 * l1_loss(a, b) + w.lambda2 * (1.0 - ssim(a, b));
    if (w.perceptual && w.perceptual->value) v += w.lambda3 * w.perceptual->value(a, b);
    return v;
}

ImageLossResult image_loss_with_grad(const ImageBuffer& a, const ImageBuffer& b,
                                     const LossWeights& w) {
    ImageLossResult res;
    const SsimResult s = ssim_with_grad(a, b);
    const ImageBuffer l1g = l1_loss_grad(a, b);
    res.value = w.lambda1 * l1_loss(a, b) + w.lambda2 * (1.0 - s.value);
    res.grad_a = ImageBuffer(a.width, a.height, a.channels);
    for (size_t i = 0; i < res.grad_a.size(); ++i)
        res.grad_a.data[i] = w.lambda1 * l1g.data[i] - w.lambda2 * s.grad_a.data[i];
    if (w.perceptual && w.perceptual->value) {
        res.value += w.lambda3 * w.perceptual->value(a, b);
        if (w.perceptual->grad_a) {
            const ImageBuffer pg = w.perceptual->grad_a(a, b);
            for (size_t i = 0; i < res.grad_a.size(); ++i)
                res.grad_a.data[i] += w.lambda3 * pg.data[i];
        }
    }
    return res;
}

Scalar pos_regularizer(const std::vector<RiggedSplat>& splats, Scalar eps_pos) {
    if (splats.empty()) return 0.0;
    Scalar sum = 0.0;
    for (const auto& s : splats) {
        const Vec3 v = s.mu_local.cwiseAbs().cwiseMax(eps_pos);
        sum += v.norm();
    }
    return sum / static_cast<Scalar>(splats.size());
}

std::vector<Vec3> pos_regularizer_grad(const std::vector<RiggedSplat>& splats, Scalar eps_pos) {
    std::vector<Vec3> grads(splats.size(), Vec3::Zero());
    if (splats.empty()) return grads;
    const Scalar inv_n = 1.0 / static_cast<Scalar>(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) {
        const Vec3& mu = splats[i].mu_local;
        const Vec3 v = mu.cwiseAbs().cwiseMax(eps_pos);
        const Scalar norm = v.norm();
        for (int c = 0; c < 3; ++c)
            if (std::abs(mu[c]) > eps_pos) grads[i][c] = mu[c] / norm * inv_n;
    }
    return grads;
}

Scalar scale_regularizer(const std::vector<RiggedSplat>& splats, Scalar eps_scale) {
    if (splats.empty()) return 0.0;
    Scalar sum = 0.0;
    for (const auto& s : splats) sum += s.scale_local().cwiseMax(eps_scale).norm();
    return sum / static_cast<Scalar>(splats.size());
}

std::vector<Vec3> scale_regularizer_grad(const std::vector<RiggedSplat>& splats,
                                         Scalar eps_scale) {
    std::vector<Vec3> grads(splats.size(), Vec3::Zero());
    if (splats.empty()) return grads;
    const Scalar inv_n = 1.0 / static_cast<Scalar>(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) {
        const Vec3 s = splats[i].scale_local();
        const Vec3 v = s.cwiseMax(eps_scale);
        const Scalar norm = v.norm();
        for (int c = 0; c < 3; ++c)
            if (s[c] > eps_scale) grads[i][c] = s[c] / norm * s[c] * inv_n;
    }
    return grads;
}

TotalLoss total_loss(const ImageBuffer& rec, const ImageBuffer& rec_target,
                     const std::vector<ImageBuffer>& views,
                     const std::vector<ImageBuffer>& view_targets,
                     const std::vector<RiggedSplat>& splats, const LossWeights& w) {
    if (views.size() != view_targets.size())
        throw ShapeMismatch("total_loss: view/target count mismatch");

    TotalLoss out;
    ImageLossResult rec_res = image_loss_with_grad(rec, rec_target, w);
    out.rec_term = rec_res.value;
    out.d_rec = std::move(rec_res.grad_a);

    out.d_views.reserve(views.size());
    if (!views.empty()) {
        const Scalar inv_v = 1.0 / static_cast<Scalar>(views.size());
        for (size_t i = 0; i < views.size(); ++i) {
            ImageLossResult vres = image_loss_with_grad(views[i], view_targets[i], w);
            out.view_term += vres.value * inv_v;
            for (auto& g : vres.grad_a.data) g *= inv_v;
            out.d_views.push_back(std::move(vres.grad_a));
        }
    }

    out.pos_term = w.lambda_pos * pos_regularizer(splats, w.eps_pos);
    out.scale_term = w.lambda_scale * scale_regularizer(splats, w.eps_scale);
    out.value = out.rec_term + out.view_term + out.pos_term + out.scale_term;
    return out;
}

} // namespace rigsplat
