#pragma once

#include "rigsplat/types.hpp"

#include <vector>

namespace rigsplat {

// H x W x C float image, row-major, interleaved channels.
// Values are nominally in [0, 1]; clamp01() enforces the range at
// serialization boundaries.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<Scalar> data;

    ImageBuffer() = default;
    ImageBuffer(int w, int h, int c, Scalar fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    Scalar& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    Scalar at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    size_t size() const { return data.size(); }
    bool same_shape(const ImageBuffer& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    void clamp01() {
        for (Scalar& v : data) v = std::min(1.0, std::max(0.0, v));
    }
};

inline void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeMismatch(std::string(where) + ": " + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                            std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                            std::to_string(b.channels));
}

// Block-mean downsample by an integer factor. Dimensions must divide evenly.
ImageBuffer downsample_mean(const ImageBuffer& img, int factor);

// Bilinear resize. Corners map to corners (exact on affine signals).
ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h);

} // namespace rigsplat
