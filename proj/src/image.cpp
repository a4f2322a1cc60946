#include "matforge/image.hpp"

namespace matforge {

ImagePlane resize_bilinear(const ImagePlane& img, int new_res) {
    if (img.res == new_res) return img;
    ImagePlane out(new_res, img.channels);
    const double scale = double(img.res) / new_res;
    for (int y = 0; y < new_res; ++y) {
        for (int x = 0; x < new_res; ++x) {
            const double sx = (x + 0.5) * scale - 0.5;
            const double sy = (y + 0.5) * scale - 0.5;
            int x0 = int(std::floor(sx));
            int y0 = int(std::floor(sy));
            const double tx = sx - x0;
            const double ty = sy - y0;
            auto clampi = [&](int v) { return v < 0 ? 0 : (v >= img.res ? img.res - 1 : v); };
            const int x1 = clampi(x0 + 1), y1 = clampi(y0 + 1);
            x0 = clampi(x0);
            y0 = clampi(y0);
            for (int c = 0; c < img.channels; ++c) {
                const double a = img.at(x0, y0, c) * (1 - tx) + img.at(x1, y0, c) * tx;
                const double b = img.at(x0, y1, c) * (1 - tx) + img.at(x1, y1, c) * tx;
                out.at(x, y, c) = float(a * (1 - ty) + b * ty);
            }
        }
    }
    return out;
}

double mse(const ImagePlane& a, const ImagePlane& b) {
    if (!a.same_shape(b)) throw Error("shape-mismatch", "mse requires equal shapes");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        acc += d * d;
    }
    return acc / double(a.data.size());
}

} // namespace matforge
