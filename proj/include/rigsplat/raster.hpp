#pragma once

#include "rigsplat/geometry.hpp"
#include "rigsplat/image.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace rigsplat {

// Rasterizer conventions, shared by the forward and backward passes.
namespace raster {
constexpr int kTileSize = 16;
constexpr Scalar kDilation = 0.3;           // low-pass px^2 added to cov2d diagonal
constexpr Scalar kAlphaClamp = 0.99;
constexpr Scalar kAlphaSkip = 1.0 / 255.0;
constexpr Scalar kTransmittanceStop = 1e-4;
constexpr Scalar kNearPlane = 0.01;
constexpr Scalar kCutoffSq = 9.0;           // 3-sigma ellipse support: d' conic d <= 9
} // namespace raster

// Screen-space footprint of one projected Gaussian.
struct Projected2D {
    Vec2 mean2d = Vec2::Zero();      // pixels
    Mat2 cov2d = Mat2::Identity();   // pixels^2, after dilation
    Mat2 conic = Mat2::Identity();   // cov2d^{-1}
    Scalar depth = 0.0;              // camera-space z of the 3D mean
    int32_t splat_index = -1;
    Scalar extent_x = 0.0;           // 3-sigma half extents of the ellipse bbox
    Scalar extent_y = 0.0;
    Scalar opacity = 0.0;
    Vec3 color = Vec3::Zero();
    uint64_t content_key = 0;        // depth-tie break, invariant under input order
};

// Projection plus tile binning, reused by rasterize and render_backward.
struct PreparedScene {
    int width = 0, height = 0;
    int tiles_x = 0, tiles_y = 0;
    std::vector<Projected2D> visible;
    std::vector<std::vector<int32_t>> tile_entries; // per tile, indices into visible, blend order
};

struct RasterOptions {
    int threads = 0;                 // 0: default_thread_count()
    bool compute_signature = false;  // fold per-pixel blend events into a hash
};

struct RenderOutput {
    ImageBuffer color; // 3 channels
    ImageBuffer alpha; // 1 channel, accumulated opacity
    uint64_t blend_signature = 0;
};

// EWA projection of one world Gaussian. Returns nullopt when culled
// (behind the near plane or 3-sigma bbox off screen).
std::optional<Projected2D> project_gaussian(const GaussianWorld& g, const Camera& cam,
                                            int32_t splat_index = -1);

PreparedScene prepare_scene(const std::vector<GaussianWorld>& splats, const Camera& cam,
                            int threads = 0);

// Tile-based front-to-back alpha blending over a black background.
// Bit-identical for any thread count and any permutation of the input.
RenderOutput rasterize(const std::vector<GaussianWorld>& splats, const Camera& cam,
                       const RasterOptions& opts = {});
RenderOutput rasterize_prepared(const PreparedScene& scene, const RasterOptions& opts = {});

// Z-buffered flat-shaded normal map: covered pixels store
// (nx, ny, -nz)/2 + 0.5 with n the camera-space unit face normal, so
// camera-facing surfaces are blue-dominant. Background is black.
// Degenerate faces are skipped; their count goes to skipped_faces.
ImageBuffer render_normal_map(const RigMesh& mesh, size_t timestep, const Camera& cam,
                              int* skipped_faces = nullptr);

// Z-buffered rasterization with perspective-correct barycentric
// interpolation of per-vertex colors.
ImageBuffer render_textured_mesh(const RigMesh& mesh, size_t timestep,
                                 const std::vector<Vec3>& vertex_colors, const Camera& cam,
                                 int* skipped_faces = nullptr);

} // namespace rigsplat
