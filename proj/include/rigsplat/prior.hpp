#pragma once

#include "rigsplat/image.hpp"
#include "rigsplat/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rigsplat {

// Discrete noise schedule: cumulative alpha products of a
// scaled-linear beta schedule (sqrt(beta) linear from sqrt(0.00085) to
// sqrt(0.012)), the lineage the distillation stack is modeled on.
// Index 0 is the clean anchor: sampling ops treat alpha_bar at index 0
// as exactly 1 (see alpha_bar_at).
struct DdimSchedule {
    int steps = 0;
    std::vector<Scalar> alpha_bar;

    Scalar alpha_bar_at(int index) const {
        if (index < 0 || index >= steps)
            throw IndexOutOfRange("DdimSchedule: index " + std::to_string(index) +
                                  " outside [0, " + std::to_string(steps) + ")");
        return index == 0 ? 1.0 : alpha_bar[index];
    }

    // Maps continuous t in [0, 1] to a schedule index.
    int index_of(Scalar t) const {
        return static_cast<int>(std::llround(t * (steps - 1)));
    }

    void validate() const;
};

DdimSchedule make_ddim_schedule(int steps = 1000, Scalar beta_start = 0.00085,
                                Scalar beta_end = 0.012);

// Latent feature map, h x w x c row-major, unbounded range.
struct Latent {
    int h = 0, w = 0, c = 0;
    std::vector<Scalar> data;

    Latent() = default;
    Latent(int h_, int w_, int c_, Scalar fill = 0.0)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

    size_t size() const { return data.size(); }
    bool same_shape(const Latent& o) const { return h == o.h && w == o.w && c == o.c; }
};

Latent gaussian_latent_like(const Latent& ref, RngStream& rng);

// Deterministic (eta = 0) DDIM update from index t to index t_prev.
Latent ddim_step(const Latent& z_t, const Latent& eps_hat, int t, int t_prev,
                 const DdimSchedule& sched);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
Latent add_noise(const Latent& z0, const Latent& eps, int t, const DdimSchedule& sched);

// Stub codec standing in for a learned autoencoder: 8x8 average
// pooling down, bilinear x8 with [0,1] clamp back up.
constexpr int kCodecFactor = 8;
Latent codec_encode(const ImageBuffer& img);
ImageBuffer codec_decode(const Latent& z);

enum class UpsamplerMode { Bilinear, Registered };
using UpsamplerBackend = std::function<Latent(const Latent&)>;

// x2 spatial upsampling of a latent. The registered slot is an
// interface for a learned upsampler; none ships here.
Latent upsample_latent(const Latent& z, UpsamplerMode mode = UpsamplerMode::Bilinear,
                       const UpsamplerBackend* backend = nullptr);

// Exact noise predictor for a point mass at the attractor latent:
// eps_hat = (z_t - sqrt(abar_t) m) / sqrt(1 - abar_t). Undefined at the
// clean anchor (index 0).
Latent toy_denoiser(const Latent& z_t, int t, const DdimSchedule& sched, const Latent& attractor);

using DenoiserFn = std::function<Latent(const Latent& z_t, int t_index)>;

struct PriorConfig {
    bool three_d_aware = true; // false: noise time step forced to 0
    bool sds_mode = false;     // single-step score images instead of pseudo-GTs
    bool use_upsampler = true; // x2 latent upsampling before decode
    Scalar gamma = 0.8;        // attractor blend weight toward the target latent
    int ddim_stride = 20;      // k: chain runs ceil(index/k) evenly spaced steps
    Scalar t_min = 0.02;
    Scalar t_max = 0.98;
};

// Evenly spaced DDIM timestep sequence from `from_index` down to 0,
// ceil(from_index / stride) steps. Empty when from_index is 0.
std::vector<int> ddim_timesteps(int from_index, int stride);

// Iteratively denoised pseudo ground truths for a batch of view
// renders. One denoiser and one RNG stream per view. With the
// upsampler on, outputs are 2x the render resolution; callers that
// need render-sized images downsample. In sds_mode the returned
// buffers are score images (eps_hat - eps mapped through the codec's
// upsampling path), not displayable images.
std::vector<ImageBuffer> pseudo_gt(const std::vector<ImageBuffer>& renders,
                                   const ImageBuffer& cond_image,
                                   const std::vector<ImageBuffer>& normals,
                                   const std::vector<DenoiserFn>& denoisers,
                                   const DdimSchedule& sched, const PriorConfig& cfg,
                                   std::vector<RngStream>& rngs);

// Pseudo-ground-truth generator for sampled novel views. Outputs match
// the render count and dimensions and are deterministic given (seed,
// iteration).
class ViewPriorOracle {
public:
    virtual ~ViewPriorOracle() = default;
    virtual std::vector<ImageBuffer> pseudo_targets(const ImageBuffer& cond_image,
                                                    const std::vector<ImageBuffer>& normals,
                                                    const std::vector<ImageBuffer>& renders,
                                                    const std::vector<std::string>& view_names,
                                                    size_t timestep, uint64_t seed,
                                                    uint64_t iteration) = 0;
};

using GroundTruthLookup =
    std::function<const ImageBuffer&(const std::string& view_name, size_t timestep)>;

// Upper-bound oracle: returns the held-out ground-truth renders verbatim.
class GroundTruthOracle final : public ViewPriorOracle {
public:
    explicit GroundTruthOracle(GroundTruthLookup lookup) : lookup_(std::move(lookup)) {}
    std::vector<ImageBuffer> pseudo_targets(const ImageBuffer& cond_image,
                                            const std::vector<ImageBuffer>& normals,
                                            const std::vector<ImageBuffer>& renders,
                                            const std::vector<std::string>& view_names,
                                            size_t timestep, uint64_t seed,
                                            uint64_t iteration) override;

private:
    GroundTruthLookup lookup_;
};

// Full distillation chain: noise the render latents, DDIM-denoise them
// toward an attractor blended from the held-out target and the current
// render, optionally upsample, decode, and resize to the render size.
class DiffusionLikeOracle final : public ViewPriorOracle {
public:
    DiffusionLikeOracle(GroundTruthLookup lookup, DdimSchedule sched, PriorConfig cfg)
        : lookup_(std::move(lookup)), sched_(std::move(sched)), cfg_(cfg) {}
    std::vector<ImageBuffer> pseudo_targets(const ImageBuffer& cond_image,
                                            const std::vector<ImageBuffer>& normals,
                                            const std::vector<ImageBuffer>& renders,
                                            const std::vector<std::string>& view_names,
                                            size_t timestep, uint64_t seed,
                                            uint64_t iteration) override;

    const PriorConfig& config() const { return cfg_; }

private:
    GroundTruthLookup lookup_;
    DdimSchedule sched_;
    PriorConfig cfg_;
};

} // namespace rigsplat
