#include "rigsplat/raster.hpp"

#include "rigsplat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace rigsplat {

namespace {

inline uint64_t fnv1a(uint64_t h, const void* bytes, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t content_hash(const GaussianWorld& g) {
    uint64_t h = 0xcbf29ce484222325ull;
    h = fnv1a(h, g.mean.data(), 3 * sizeof(Scalar));
    h = fnv1a(h, g.cov.data(), 9 * sizeof(Scalar));
    h = fnv1a(h, &g.opacity, sizeof(Scalar));
    h = fnv1a(h, g.color.data(), 3 * sizeof(Scalar));
    return h;
}

// Blend order: ascending depth; ties broken by content so that the
// order never depends on the caller's list order.
struct BlendOrder {
    const std::vector<Projected2D>& entries;
    bool operator()(int32_t a, int32_t b) const {
        const Projected2D& pa = entries[a];
        const Projected2D& pb = entries[b];
        if (pa.depth != pb.depth) return pa.depth < pb.depth;
        if (pa.content_key != pb.content_key) return pa.content_key < pb.content_key;
        const int c = std::memcmp(pa.mean2d.data(), pb.mean2d.data(), 2 * sizeof(Scalar));
        if (c != 0) return c < 0;
        if (pa.opacity != pb.opacity) return pa.opacity < pb.opacity;
        return std::lexicographical_compare(pa.color.data(), pa.color.data() + 3,
                                            pb.color.data(), pb.color.data() + 3);
    }
};

} // namespace

std::optional<Projected2D> project_gaussian(const GaussianWorld& g, const Camera& cam,
                                            int32_t splat_index) {
    const Vec3 p = cam.to_camera(g.mean);
    const Scalar z = p.z();
    if (z <= raster::kNearPlane) return std::nullopt;

    Projected2D out;
    out.splat_index = splat_index;
    out.depth = z;
    out.mean2d = Vec2(cam.fx * p.x() / z + cam.cx, cam.fy * p.y() / z + cam.cy);

    Eigen::Matrix<Scalar, 2, 3> jac;
    jac << cam.fx / z, 0, -cam.fx * p.x() / (z * z),
           0, cam.fy / z, -cam.fy * p.y() / (z * z);
    const Eigen::Matrix<Scalar, 2, 3> m = jac * cam.rotation;
    out.cov2d = m * g.cov * m.transpose();
    out.cov2d(0, 0) += raster::kDilation;
    out.cov2d(1, 1) += raster::kDilation;

    out.extent_x = 3.0 * std::sqrt(out.cov2d(0, 0));
    out.extent_y = 3.0 * std::sqrt(out.cov2d(1, 1));
    if (out.mean2d.x() + out.extent_x < 0 || out.mean2d.x() - out.extent_x > cam.width ||
        out.mean2d.y() + out.extent_y < 0 || out.mean2d.y() - out.extent_y > cam.height)
        return std::nullopt;

    const Scalar det = out.cov2d.determinant();
    if (det <= 0 || !std::isfinite(det)) return std::nullopt;
    out.conic << out.cov2d(1, 1), -out.cov2d(0, 1), -out.cov2d(0, 1), out.cov2d(0, 0);
    out.conic /= det;

    out.opacity = g.opacity;
    out.color = g.color;
    out.content_key = content_hash(g);
    return out;
}

PreparedScene prepare_scene(const std::vector<GaussianWorld>& splats, const Camera& cam,
                            int threads) {
    PreparedScene scene;
    scene.width = cam.width;
    scene.height = cam.height;
    scene.tiles_x = (cam.width + raster::kTileSize - 1) / raster::kTileSize;
    scene.tiles_y = (cam.height + raster::kTileSize - 1) / raster::kTileSize;

    const int64_t n = static_cast<int64_t>(splats.size());
    std::vector<std::optional<Projected2D>> projected(n);
    parallel_for(n, [&](int64_t i) {
        projected[i] = project_gaussian(splats[i], cam, static_cast<int32_t>(i));
    }, threads);

    scene.visible.reserve(n);
    for (int64_t i = 0; i < n; ++i)
        if (projected[i]) scene.visible.push_back(*projected[i]);

    scene.tile_entries.assign(static_cast<size_t>(scene.tiles_x) * scene.tiles_y, {});
    for (int32_t e = 0; e < static_cast<int32_t>(scene.visible.size()); ++e) {
        const Projected2D& p = scene.visible[e];
        int tx0 = std::max(0, static_cast<int>(std::floor((p.mean2d.x() - p.extent_x) / raster::kTileSize)));
        int tx1 = std::min(scene.tiles_x - 1, static_cast<int>(std::floor((p.mean2d.x() + p.extent_x) / raster::kTileSize)));
        int ty0 = std::max(0, static_cast<int>(std::floor((p.mean2d.y() - p.extent_y) / raster::kTileSize)));
        int ty1 = std::min(scene.tiles_y - 1, static_cast<int>(std::floor((p.mean2d.y() + p.extent_y) / raster::kTileSize)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                scene.tile_entries[static_cast<size_t>(ty) * scene.tiles_x + tx].push_back(e);
    }

    parallel_for(static_cast<int64_t>(scene.tile_entries.size()), [&](int64_t t) {
        auto& list = scene.tile_entries[t];
        std::sort(list.begin(), list.end(), BlendOrder{scene.visible});
    }, threads);

    return scene;
}

RenderOutput rasterize(const std::vector<GaussianWorld>& splats, const Camera& cam,
                       const RasterOptions& opts) {
    return rasterize_prepared(prepare_scene(splats, cam, opts.threads), opts);
}

RenderOutput rasterize_prepared(const PreparedScene& scene, const RasterOptions& opts) {
    RenderOutput out;
    out.color = ImageBuffer(scene.width, scene.height, 3);
    out.alpha = ImageBuffer(scene.width, scene.height, 1);

    const int64_t n_tiles = static_cast<int64_t>(scene.tile_entries.size());
    std::vector<uint64_t> tile_sig;
    if (opts.compute_signature) tile_sig.assign(n_tiles, 0xcbf29ce484222325ull);

    parallel_for(n_tiles, [&](int64_t t) {
        const auto& list = scene.tile_entries[t];
        const int tx = static_cast<int>(t % scene.tiles_x);
        const int ty = static_cast<int>(t / scene.tiles_x);
        const int x0 = tx * raster::kTileSize;
        const int y0 = ty * raster::kTileSize;
        const int x1 = std::min(scene.width, x0 + raster::kTileSize);
        const int y1 = std::min(scene.height, y0 + raster::kTileSize);
        uint64_t sig = opts.compute_signature ? tile_sig[t] : 0;

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const Vec2 pixel(x + 0.5, y + 0.5);
                Scalar transmittance = 1.0;
                Scalar rgb[3] = {0, 0, 0};
                for (int32_t e : list) {
                    const Projected2D& p = scene.visible[e];
                    const Vec2 d = pixel - p.mean2d;
                    const Scalar q = p.conic(0, 0) * d.x() * d.x() +
                                     2.0 * p.conic(0, 1) * d.x() * d.y() +
                                     p.conic(1, 1) * d.y() * d.y();
                    if (q > raster::kCutoffSq) continue;
                    Scalar alpha = p.opacity * std::exp(-0.5 * q);
                    const bool clamped = alpha > raster::kAlphaClamp;
                    if (clamped) alpha = raster::kAlphaClamp;
                    if (alpha < raster::kAlphaSkip) continue;
                    const Scalar w = alpha * transmittance;
                    rgb[0] += w * p.color[0];
                    rgb[1] += w * p.color[1];
                    rgb[2] += w * p.color[2];
                    transmittance *= 1.0 - alpha;
                    if (opts.compute_signature) {
                        const int32_t pixel_id = y * scene.width + x;
                        const int32_t key[3] = {pixel_id, p.splat_index, clamped ? 2 : 1};
                        sig = fnv1a(sig, key, sizeof(key));
                    }
                    if (transmittance < raster::kTransmittanceStop) break;
                }
                out.color.at(x, y, 0) = rgb[0];
                out.color.at(x, y, 1) = rgb[1];
                out.color.at(x, y, 2) = rgb[2];
                out.alpha.at(x, y, 0) = 1.0 - transmittance;
            }
        }
        if (opts.compute_signature) tile_sig[t] = sig;
    }, opts.threads);

    if (opts.compute_signature) {
        uint64_t h = 0xcbf29ce484222325ull;
        h = fnv1a(h, tile_sig.data(), tile_sig.size() * sizeof(uint64_t));
        out.blend_signature = h;
    }
    return out;
}

namespace {

struct ScreenVertex {
    Vec2 pos;       // pixel coordinates
    Scalar z;       // camera-space depth
    Scalar inv_z;
    bool valid;
};

ScreenVertex project_vertex(const Vec3& v, const Camera& cam) {
    const Vec3 p = cam.to_camera(v);
    ScreenVertex s;
    s.valid = p.z() > raster::kNearPlane;
    s.z = p.z();
    s.inv_z = s.valid ? 1.0 / p.z() : 0.0;
    if (s.valid)
        s.pos = Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
    return s;
}

// Shared scanline core for the two mesh render modes. shade(face, bary)
// returns the interpolated color; bary are perspective-correct weights.
template <typename Shade>
ImageBuffer raster_mesh(const RigMesh& mesh, size_t timestep, const Camera& cam,
                        int* skipped_faces, Shade&& shade) {
    if (timestep >= mesh.frame_count())
        throw IndexOutOfRange("raster_mesh: timestep out of range");
    mesh.validate();
    cam.validate();

    ImageBuffer img(cam.width, cam.height, 3);
    std::vector<Scalar> zbuf(static_cast<size_t>(cam.width) * cam.height,
                             std::numeric_limits<Scalar>::infinity());
    const auto& verts = mesh.frames[timestep];
    int skipped = 0;

    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        const Vec3& w0 = verts[face[0]];
        const Vec3& w1 = verts[face[1]];
        const Vec3& w2 = verts[face[2]];
        if (0.5 * (w1 - w0).cross(w2 - w0).norm() <= 1e-12) {
            ++skipped;
            continue;
        }
        const ScreenVertex s0 = project_vertex(w0, cam);
        const ScreenVertex s1 = project_vertex(w1, cam);
        const ScreenVertex s2 = project_vertex(w2, cam);
        if (!s0.valid || !s1.valid || !s2.valid) continue; // no near-plane clipping

        const Scalar area = (s1.pos.x() - s0.pos.x()) * (s2.pos.y() - s0.pos.y()) -
                            (s2.pos.x() - s0.pos.x()) * (s1.pos.y() - s0.pos.y());
        if (area == 0.0) continue;
        const Scalar inv_area = 1.0 / area;

        const int px0 = std::max(0, static_cast<int>(std::floor(std::min({s0.pos.x(), s1.pos.x(), s2.pos.x()}) - 0.5)));
        const int px1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({s0.pos.x(), s1.pos.x(), s2.pos.x()}) - 0.5)));
        const int py0 = std::max(0, static_cast<int>(std::floor(std::min({s0.pos.y(), s1.pos.y(), s2.pos.y()}) - 0.5)));
        const int py1 = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({s0.pos.y(), s1.pos.y(), s2.pos.y()}) - 0.5)));

        for (int y = py0; y <= py1; ++y) {
            for (int x = px0; x <= px1; ++x) {
                const Vec2 p(x + 0.5, y + 0.5);
                const Scalar b1 = ((p.x() - s0.pos.x()) * (s2.pos.y() - s0.pos.y()) -
                                   (s2.pos.x() - s0.pos.x()) * (p.y() - s0.pos.y())) * inv_area;
                const Scalar b2 = ((s1.pos.x() - s0.pos.x()) * (p.y() - s0.pos.y()) -
                                   (p.x() - s0.pos.x()) * (s1.pos.y() - s0.pos.y())) * inv_area;
                const Scalar b0 = 1.0 - b1 - b2;
                if (b0 < 0 || b1 < 0 || b2 < 0) continue;
                // Perspective-correct weights via 1/z interpolation.
                const Scalar inv_z = b0 * s0.inv_z + b1 * s1.inv_z + b2 * s2.inv_z;
                const Scalar z = 1.0 / inv_z;
                const size_t pix = static_cast<size_t>(y) * cam.width + x;
                if (z >= zbuf[pix]) continue;
                zbuf[pix] = z;
                const Vec3 bary(b0 * s0.inv_z * z, b1 * s1.inv_z * z, b2 * s2.inv_z * z);
                const Vec3 c = shade(f, bary);
                img.at(x, y, 0) = c[0];
                img.at(x, y, 1) = c[1];
                img.at(x, y, 2) = c[2];
            }
        }
    }
    if (skipped_faces) *skipped_faces = skipped;
    return img;
}

} // namespace

ImageBuffer render_normal_map(const RigMesh& mesh, size_t timestep, const Camera& cam,
                              int* skipped_faces) {
    const auto& verts = mesh.frames.at(timestep);
    std::vector<Vec3> encoded(mesh.faces.size());
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        const Vec3 n = (verts[face[1]] - verts[face[0]]).cross(verts[face[2]] - verts[face[0]]);
        const Scalar len = n.norm();
        if (len <= 0) {
            encoded[f] = Vec3::Zero();
            continue;
        }
        Vec3 n_cam = cam.rotation * (n / len);
        n_cam.z() = -n_cam.z(); // camera-facing normals encode blue-dominant
        encoded[f] = (n_cam + Vec3::Ones()) * 0.5;
    }
    return raster_mesh(mesh, timestep, cam, skipped_faces,
                       [&](size_t f, const Vec3&) { return encoded[f]; });
}

ImageBuffer render_textured_mesh(const RigMesh& mesh, size_t timestep,
                                 const std::vector<Vec3>& vertex_colors, const Camera& cam,
                                 int* skipped_faces) {
    if (vertex_colors.size() != mesh.vertex_count())
        throw ShapeMismatch("render_textured_mesh: texture size " +
                            std::to_string(vertex_colors.size()) + " != vertex count " +
                            std::to_string(mesh.vertex_count()));
    return raster_mesh(mesh, timestep, cam, skipped_faces, [&](size_t f, const Vec3& bary) {
        const auto& face = mesh.faces[f];
        return Vec3(bary[0] * vertex_colors[face[0]] + bary[1] * vertex_colors[face[1]] +
                    bary[2] * vertex_colors[face[2]]);
    });
}

} // namespace rigsplat
