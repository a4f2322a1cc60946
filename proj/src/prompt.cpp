#include "matforge/prompt.hpp"

#include <cmath>

namespace matforge {

std::vector<float> encode_prompt(const ImagePlane& image) {
    ImagePlane rgb = to_channels(image, 3);
    if (rgb.res != 128) rgb = resize_bilinear(rgb, 128);

    std::vector<float> e;
    e.reserve(size_t(kCondDim));

    const ImagePlane thumb = resize_bilinear(rgb, 8);
    e.insert(e.end(), thumb.data.begin(), thumb.data.end()); // 192

    std::vector<float> hist(32, 0.0f);
    const size_t n = size_t(rgb.res) * rgb.res;
    for (size_t i = 0; i < n; ++i) {
        const float lum = luminance(rgb.data[3 * i], rgb.data[3 * i + 1], rgb.data[3 * i + 2]);
        int bin = int(lum * 32.0f);
        bin = bin < 0 ? 0 : (bin > 31 ? 31 : bin);
        hist[size_t(bin)] += 1.0f;
    }
    for (float& h : hist) h /= float(n);
    e.insert(e.end(), hist.begin(), hist.end()); // 32

    for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sum2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double v = rgb.data[3 * i + size_t(c)];
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / double(n);
        const double var = std::max(sum2 / double(n) - mean * mean, 0.0);
        e.push_back(float(mean));
        e.push_back(float(std::sqrt(var)));
    }

    e.resize(size_t(kCondDim), 0.0f);

    double norm2 = 0.0;
    for (float v : e) norm2 += double(v) * v;
    const float inv = norm2 > 0.0 ? float(1.0 / std::sqrt(norm2)) : 0.0f;
    for (float& v : e) v *= inv;
    return e;
}

} // namespace matforge
