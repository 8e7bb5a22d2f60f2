#include "rigsplat/image.hpp"

namespace rigsplat {

ImageBuffer downsample_mean(const ImageBuffer& img, int factor) {
    if (factor <= 0 || img.width % factor != 0 || img.height % factor != 0)
        throw BadDimensions("downsample_mean: " + std::to_string(img.width) + "x" +
                            std::to_string(img.height) + " not divisible by " +
                            std::to_string(factor));
    ImageBuffer out(img.width / factor, img.height / factor, img.channels);
    const Scalar inv = 1.0 / (static_cast<Scalar>(factor) * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                Scalar sum = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        sum += img.at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = sum * inv;
            }
        }
    }
    return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw BadDimensions("resize_bilinear: non-positive output size");
    ImageBuffer out(out_w, out_h, img.channels);
    const Scalar sx = out_w > 1 ? static_cast<Scalar>(img.width - 1) / (out_w - 1) : 0.0;
    const Scalar sy = out_h > 1 ? static_cast<Scalar>(img.height - 1) / (out_h - 1) : 0.0;
    for (int y = 0; y < out_h; ++y) {
        const Scalar fy = y * sy;
        const int y0 = std::min(static_cast<int>(fy), img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const Scalar wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const Scalar fx = x * sx;
            const int x0 = std::min(static_cast<int>(fx), img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const Scalar wx = fx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const Scalar top = (1.0 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
                const Scalar bot = (1.0 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
                out.at(x, y, c) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

} // namespace rigsplat
