#pragma once

#include <cmath>
#include <vector>

#include "matforge/util.hpp"

namespace matforge {

/// Square float image, row-major, channel-interleaved. channels is 1 or 3.
/// Values are kept in [0,1] at op boundaries.
struct ImagePlane {
    int res = 0;
    int channels = 1;
    std::vector<float> data;

    ImagePlane() = default;
    ImagePlane(int r, int c, float fill = 0.0f) : res(r), channels(c), data(size_t(r) * r * c, fill) {}

    float& at(int x, int y, int c) { return data[(size_t(y) * res + x) * channels + c]; }
    float at(int x, int y, int c) const { return data[(size_t(y) * res + x) * channels + c]; }

    /// Wrap-addressed texel fetch.
    float wrap_at(int x, int y, int c) const {
        x = ((x % res) + res) % res;
        y = ((y % res) + res) % res;
        return at(x, y, c);
    }

    /// Bilinear sample with wrap addressing; (u,v) in tile units, texel centers at (i+0.5)/res.
    float sample_wrap(double u, double v, int c) const {
        const double fx = u * res - 0.5;
        const double fy = v * res - 0.5;
        const int x0 = int(std::floor(fx));
        const int y0 = int(std::floor(fy));
        const double tx = fx - x0;
        const double ty = fy - y0;
        const double a = wrap_at(x0, y0, c) * (1 - tx) + wrap_at(x0 + 1, y0, c) * tx;
        const double b = wrap_at(x0, y0 + 1, c) * (1 - tx) + wrap_at(x0 + 1, y0 + 1, c) * tx;
        return float(a * (1 - ty) + b * ty);
    }

    void clamp01() {
        for (auto& v : data) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }

    bool same_shape(const ImagePlane& o) const { return res == o.res && channels == o.channels; }
};

inline float luminance(float r, float g, float b) {
    return 0.2126f * r + 0.7152f * g + 0.0722f * b;
}

/// Channel conversion rule: grayscale broadcasts to rgb, rgb collapses by luminance.
inline ImagePlane to_channels(const ImagePlane& img, int channels) {
    if (img.channels == channels) return img;
    if (img.channels != 1 && img.channels != 3)
        throw Error("channel-mismatch", "image has unsupported channel count " + std::to_string(img.channels));
    ImagePlane out(img.res, channels);
    const size_t n = size_t(img.res) * img.res;
    if (img.channels == 1 && channels == 3) {
        for (size_t i = 0; i < n; ++i) {
            const float v = img.data[i];
            out.data[3 * i] = v;
            out.data[3 * i + 1] = v;
            out.data[3 * i + 2] = v;
        }
    } else if (img.channels == 3 && channels == 1) {
        for (size_t i = 0; i < n; ++i)
            out.data[i] = luminance(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
    } else {
        throw Error("channel-mismatch", "cannot convert channels " + std::to_string(img.channels) +
                                            " -> " + std::to_string(channels));
    }
    return out;
}

/// Bilinear resize (non-wrapping, edge clamp).
ImagePlane resize_bilinear(const ImagePlane& img, int new_res);

/// Mean of (a-b)^2 over all texels and channels. Shapes must match.
double mse(const ImagePlane& a, const ImagePlane& b);

} // namespace matforge
