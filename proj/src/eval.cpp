#include "matforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "matforge/png_io.hpp"

namespace matforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

double frac(double x) { return x - std::floor(x); }

float clampf(double v) { return float(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v)); }

/// Unit gradient at an integer lattice point, wrapped to `period` in both axes.
void lattice_grad(int ix, int iy, int period, uint64_t seed, double& gx, double& gy) {
    ix = ((ix % period) + period) % period;
    iy = ((iy % period) + period) % period;
    uint64_t h = splitmix64(seed ^ (uint64_t(uint32_t(ix)) << 32) ^ uint64_t(uint32_t(iy)));
    double angle = double(h >> 11) * (1.0 / 9007199254740992.0) * 2.0 * kPi;
    gx = std::cos(angle);
    gy = std::sin(angle);
}

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

/// Tileable 2-D Perlin over a period x period lattice; (u,v) in [0,1); range ~[-1,1].
double perlin(double u, double v, int period, uint64_t seed) {
    const double px = u * period;
    const double py = v * period;
    const int x0 = int(std::floor(px));
    const int y0 = int(std::floor(py));
    const double fx = px - x0;
    const double fy = py - y0;
    double g00x, g00y, g10x, g10y, g01x, g01y, g11x, g11y;
    lattice_grad(x0, y0, period, seed, g00x, g00y);
    lattice_grad(x0 + 1, y0, period, seed, g10x, g10y);
    lattice_grad(x0, y0 + 1, period, seed, g01x, g01y);
    lattice_grad(x0 + 1, y0 + 1, period, seed, g11x, g11y);
    const double d00 = g00x * fx + g00y * fy;
    const double d10 = g10x * (fx - 1) + g10y * fy;
    const double d01 = g01x * fx + g01y * (fy - 1);
    const double d11 = g11x * (fx - 1) + g11y * (fy - 1);
    const double sx = fade(fx);
    const double sy = fade(fy);
    const double a = d00 + sx * (d10 - d00);
    const double b = d01 + sx * (d11 - d01);
    const double val = a + sy * (b - a);
    return val * 1.4142135623730951; // normalize 2-D perlin range toward [-1,1]
}

uint64_t mix_seed(uint64_t graph_seed, long long node_seed_param) {
    uint64_t h = graph_seed;
    h = hash_combine(h, uint64_t(node_seed_param));
    return splitmix64(h);
}

long long seed_param_of(const OpSchema& schema, const std::vector<ParamValue>& params) {
    for (size_t i = 0; i < schema.params.size(); ++i)
        if (schema.params[i].name == "seed") return params[i].as_int();
    return 0;
}

double get_scalar(const OpSchema& s, const std::vector<ParamValue>& params, const char* name) {
    for (size_t i = 0; i < s.params.size(); ++i)
        if (s.params[i].name == name) return params[i].as_scalar();
    throw Error("schema-mismatch", s.name + ": missing parameter " + name);
}

int get_int(const OpSchema& s, const std::vector<ParamValue>& params, const char* name) {
    for (size_t i = 0; i < s.params.size(); ++i)
        if (s.params[i].name == name) return params[i].as_int();
    throw Error("schema-mismatch", s.name + ": missing parameter " + name);
}

const std::vector<double>& get_vec(const OpSchema& s, const std::vector<ParamValue>& params,
                                   const char* name) {
    for (size_t i = 0; i < s.params.size(); ++i)
        if (s.params[i].name == name) return params[i].scalars;
    throw Error("schema-mismatch", s.name + ": missing parameter " + name);
}

/// Run fn(u, v, x, y) over every texel center, with the generator phase shift applied.
template <typename F>
void for_each_uv(int res, double phase_u, double phase_v, F&& fn) {
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            const double u = frac((x + 0.5) / res + phase_u);
            const double v = frac((y + 0.5) / res + phase_v);
            fn(u, v, x, y);
        }
}

// ---- generators ------------------------------------------------------------

ImagePlane gen_uniform_color(int res, const std::vector<double>& rgb) {
    ImagePlane img(res, 3);
    for (int i = 0; i < res * res; ++i)
        for (int c = 0; c < 3; ++c) img.data[size_t(3) * i + c] = clampf(rgb[size_t(c)]);
    return img;
}

ImagePlane gen_perlin(int res, int scale, uint64_t seed, double pu, double pv) {
    ImagePlane img(res, 1);
    for_each_uv(res, pu, pv, [&](double u, double v, int x, int y) {
        img.at(x, y, 0) = clampf(0.5 + 0.5 * perlin(u, v, scale, seed));
    });
    return img;
}

ImagePlane gen_fbm(int res, int scale, int octaves, double gain, uint64_t seed, double pu, double pv) {
    ImagePlane img(res, 1);
    for_each_uv(res, pu, pv, [&](double u, double v, int x, int y) {
        double sum = 0.0, amp = 1.0, norm = 0.0;
        int period = scale;
        for (int o = 0; o < octaves; ++o) {
            sum += amp * perlin(u, v, period, seed + uint64_t(o) * 0x9E3779B97F4A7C15ULL);
            norm += amp;
            amp *= gain;
            period *= 2;
        }
        img.at(x, y, 0) = clampf(0.5 + 0.5 * sum / norm);
    });
    return img;
}

ImagePlane gen_cells(int res, int scale, double jitter, uint64_t seed, double pu, double pv) {
    ImagePlane img(res, 1);
    auto feature = [&](int cx, int cy, double& fx, double& fy) {
        const int wx = ((cx % scale) + scale) % scale;
        const int wy = ((cy % scale) + scale) % scale;
        uint64_t h = splitmix64(seed ^ (uint64_t(uint32_t(wx)) << 32) ^ uint64_t(uint32_t(wy)));
        const double rx = double(h >> 40) * (1.0 / 16777216.0);
        const double ry = double((h >> 16) & 0xFFFFFF) * (1.0 / 16777216.0);
        fx = cx + 0.5 + jitter * (rx - 0.5);
        fy = cy + 0.5 + jitter * (ry - 0.5);
    };
    for_each_uv(res, pu, pv, [&](double u, double v, int x, int y) {
        const double px = u * scale;
        const double py = v * scale;
        const int cx = int(std::floor(px));
        const int cy = int(std::floor(py));
        double best = 1e30;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                double fx, fy;
                feature(cx + dx, cy + dy, fx, fy);
                const double d2 = (px - fx) * (px - fx) + (py - fy) * (py - fy);
                best = std::min(best, d2);
            }
        img.at(x, y, 0) = clampf(std::sqrt(best) * 1.4142135623730951);
    });
    return img;
}

ImagePlane gen_checker(int res, int tiles, double pu, double pv) {
    ImagePlane img(res, 1);
    for_each_uv(res, pu, pv, [&](double u, double v, int x, int y) {
        const int ix = int(std::floor(u * tiles));
        const int iy = int(std::floor(v * tiles));
        img.at(x, y, 0) = ((ix + iy) & 1) ? 1.0f : 0.0f;
    });
    return img;
}

/// Sawtooth ramp along one of 8 lattice directions; integer direction
/// coefficients keep the ramp exactly tileable.
ImagePlane gen_gradient_linear(int res, double angle, double pu, double pv) {
    static const int dirs[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
    const int k = int(std::llround(angle / (kPi / 4))) & 7;
    const int a = dirs[k][0], b = dirs[k][1];
    ImagePlane img(res, 1);
    for_each_uv(res, pu, pv, [&](double u, double v, int x, int y) {
        img.at(x, y, 0) = clampf(frac(a * u + b * v));
    });
    return img;
}

/// Measure of the brick interior (cell fraction within [m, 1-m]) on [0, x],
/// in cell units. Lets gen_brick integrate exact per-texel coverage, so thin
/// mortar bands neither alias nor vanish at low resolutions.
double brick_interior_measure(double x, double m) {
    const double f = std::floor(x);
    const double r = x - f;
    return f * (1.0 - 2.0 * m) + std::clamp(r - m, 0.0, 1.0 - 2.0 * m);
}

ImagePlane gen_brick(int res, int rows, int cols, double mortar, double pu, double pv) {
    ImagePlane img(res, 1);
    const double h = 0.5 / res;
    const double m = std::clamp(mortar, 0.0, 0.5);
    for_each_uv(res, pu, pv, [&](double u, double v, int x, int y) {
        // box-filter coverage over the texel, split at row boundaries because
        // odd rows shift the bond pattern by half a brick
        const double b0 = (v - h) * rows, b1 = (v + h) * rows;
        double acc = 0.0;
        for (long r = long(std::floor(b0)); r <= long(std::floor(b1 - 1e-12)); ++r) {
            const double lo = std::max(b0, double(r));
            const double hi = std::min(b1, double(r + 1));
            if (hi <= lo) continue;
            const double vint = brick_interior_measure(hi, m) - brick_interior_measure(lo, m);
            if (vint <= 0.0) continue;
            const double off = (((r % 2) + 2) % 2) ? 0.5 : 0.0;
            const double a0 = (u - h) * cols + off, a1 = (u + h) * cols + off;
            acc += vint * (brick_interior_measure(a1, m) - brick_interior_measure(a0, m)) /
                   (a1 - a0);
        }
        img.at(x, y, 0) = clampf(acc / (b1 - b0));
    });
    return img;
}

// ---- filters ---------------------------------------------------------------

ImagePlane op_blend(const ImagePlane& fg_in, const ImagePlane& bg_in, int mode, double opacity) {
    const int ch = std::max(fg_in.channels, bg_in.channels);
    ImagePlane fg = to_channels(fg_in, ch);
    ImagePlane bg = to_channels(bg_in, ch);
    ImagePlane out(fg.res, ch);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double f = fg.data[i], b = bg.data[i];
        double m;
        switch (mode) {
        case 0: m = f; break;                // copy
        case 1: m = f * b; break;            // multiply
        case 2: m = b + f; break;            // add
        case 3: m = b - f; break;            // subtract
        case 4: m = std::max(f, b); break;   // max
        default: m = std::min(f, b); break;  // min
        }
        out.data[i] = clampf(b + opacity * (m - b));
    }
    return out;
}

ImagePlane op_levels(const ImagePlane& in, double in_lo, double in_hi, double gamma, double out_lo,
                     double out_hi) {
    ImagePlane out(in.res, in.channels);
    const double span = std::max(in_hi - in_lo, 1e-6);
    for (size_t i = 0; i < in.data.size(); ++i) {
        double t = (in.data[i] - in_lo) / span;
        t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
        t = std::pow(t, 1.0 / gamma);
        out.data[i] = clampf(out_lo + t * (out_hi - out_lo));
    }
    return out;
}

void rgb_to_hsl(double r, double g, double b, double& h, double& s, double& l) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    l = 0.5 * (mx + mn);
    const double d = mx - mn;
    if (d < 1e-12) {
        h = 0.0;
        s = 0.0;
        return;
    }
    s = l > 0.5 ? d / std::max(2.0 - mx - mn, 1e-12) : d / std::max(mx + mn, 1e-12);
    if (mx == r)
        h = (g - b) / d + (g < b ? 6.0 : 0.0);
    else if (mx == g)
        h = (b - r) / d + 2.0;
    else
        h = (r - g) / d + 4.0;
    h /= 6.0;
}

double hue_channel(double p, double q, double t) {
    t = frac(t);
    if (t < 1.0 / 6) return p + (q - p) * 6.0 * t;
    if (t < 0.5) return q;
    if (t < 2.0 / 3) return p + (q - p) * (2.0 / 3 - t) * 6.0;
    return p;
}

void hsl_to_rgb(double h, double s, double l, double& r, double& g, double& b) {
    if (s < 1e-12) {
        r = g = b = l;
        return;
    }
    const double q = l < 0.5 ? l * (1 + s) : l + s - l * s;
    const double p = 2 * l - q;
    r = hue_channel(p, q, h + 1.0 / 3);
    g = hue_channel(p, q, h);
    b = hue_channel(p, q, h - 1.0 / 3);
}

ImagePlane op_hsl_adjust(const ImagePlane& in, double dh, double ds, double dl) {
    ImagePlane rgb = to_channels(in, 3);
    ImagePlane out(rgb.res, 3);
    const size_t n = size_t(rgb.res) * rgb.res;
    for (size_t i = 0; i < n; ++i) {
        double h, s, l;
        rgb_to_hsl(rgb.data[3 * i], rgb.data[3 * i + 1], rgb.data[3 * i + 2], h, s, l);
        h = frac(h + dh);
        s = std::clamp(s + ds, 0.0, 1.0);
        l = std::clamp(l + dl, 0.0, 1.0);
        double r, g, b;
        hsl_to_rgb(h, s, l, r, g, b);
        out.data[3 * i] = clampf(r);
        out.data[3 * i + 1] = clampf(g);
        out.data[3 * i + 2] = clampf(b);
    }
    return out;
}

ImagePlane op_blur_gaussian(const ImagePlane& in, double radius) {
    const double sigma = radius * 0.5;
    if (sigma < 1e-4) return in;
    const int k = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> w(size_t(k) + 1);
    double norm = 0.0;
    for (int j = -k; j <= k; ++j) norm += std::exp(-0.5 * (double(j) * j) / (sigma * sigma));
    for (int j = 0; j <= k; ++j) w[size_t(j)] = std::exp(-0.5 * (double(j) * j) / (sigma * sigma)) / norm;

    const int res = in.res, ch = in.channels;
    ImagePlane tmp(res, ch), out(res, ch);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = w[0] * in.at(x, y, c);
                for (int j = 1; j <= k; ++j)
                    acc += w[size_t(j)] * (in.wrap_at(x - j, y, c) + in.wrap_at(x + j, y, c));
                tmp.at(x, y, c) = float(acc);
            }
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = w[0] * tmp.at(x, y, c);
                for (int j = 1; j <= k; ++j)
                    acc += w[size_t(j)] * (tmp.wrap_at(x, y - j, c) + tmp.wrap_at(x, y + j, c));
                out.at(x, y, c) = clampf(acc);
            }
    return out;
}

ImagePlane op_transform2d(const ImagePlane& in, double sx, double sy, double rot, double ox, double oy) {
    ImagePlane out(in.res, in.channels);
    const double cr = std::cos(-rot), sr = std::sin(-rot);
    for (int y = 0; y < in.res; ++y)
        for (int x = 0; x < in.res; ++x) {
            const double u = (x + 0.5) / in.res - 0.5 - ox;
            const double v = (y + 0.5) / in.res - 0.5 - oy;
            const double ru = cr * u - sr * v;
            const double rv = sr * u + cr * v;
            const double su = ru / sx + 0.5;
            const double sv = rv / sy + 0.5;
            for (int c = 0; c < in.channels; ++c) out.at(x, y, c) = in.sample_wrap(su, sv, c);
        }
    return out;
}

ImagePlane op_directional_warp(const ImagePlane& img, const ImagePlane& warp_in, double intensity,
                               double angle) {
    ImagePlane warp = to_channels(warp_in, 1);
    ImagePlane out(img.res, img.channels);
    const double dx = std::cos(angle), dy = std::sin(angle);
    for (int y = 0; y < img.res; ++y)
        for (int x = 0; x < img.res; ++x) {
            const double w = 2.0 * (warp.at(x, y, 0) - 0.5);
            const double su = (x + 0.5) / img.res + intensity * w * dx;
            const double sv = (y + 0.5) / img.res + intensity * w * dy;
            for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.sample_wrap(su, sv, c);
        }
    return out;
}

ImagePlane op_invert(const ImagePlane& in) {
    ImagePlane out(in.res, in.channels);
    for (size_t i = 0; i < in.data.size(); ++i) out.data[i] = 1.0f - in.data[i];
    return out;
}

ImagePlane op_threshold(const ImagePlane& in, double level) {
    ImagePlane out(in.res, in.channels);
    for (size_t i = 0; i < in.data.size(); ++i) out.data[i] = in.data[i] >= level ? 1.0f : 0.0f;
    return out;
}

ImagePlane op_colorize(const ImagePlane& in, const std::vector<double>& a, const std::vector<double>& b) {
    ImagePlane gray = to_channels(in, 1);
    ImagePlane out(in.res, 3);
    const size_t n = size_t(in.res) * in.res;
    for (size_t i = 0; i < n; ++i) {
        const double t = gray.data[i];
        for (int c = 0; c < 3; ++c)
            out.data[3 * i + size_t(c)] = clampf(a[size_t(c)] + t * (b[size_t(c)] - a[size_t(c)]));
    }
    return out;
}

/// Central differences in texel units with wrap; n = normalize(-s*gx, -s*gy, 1),
/// encoded 0.5*n + 0.5.
ImagePlane op_normal_from_height(const ImagePlane& in, double strength) {
    ImagePlane h = to_channels(in, 1);
    ImagePlane out(in.res, 3);
    for (int y = 0; y < in.res; ++y)
        for (int x = 0; x < in.res; ++x) {
            const double gx = 0.5 * (h.wrap_at(x + 1, y, 0) - h.wrap_at(x - 1, y, 0));
            const double gy = 0.5 * (h.wrap_at(x, y + 1, 0) - h.wrap_at(x, y - 1, 0));
            double nx = -strength * gx, ny = -strength * gy, nz = 1.0;
            const double inv = 1.0 / std::sqrt(nx * nx + ny * ny + nz * nz);
            nx *= inv;
            ny *= inv;
            nz *= inv;
            out.at(x, y, 0) = clampf(0.5 * nx + 0.5);
            out.at(x, y, 1) = clampf(0.5 * ny + 0.5);
            out.at(x, y, 2) = clampf(0.5 * nz + 0.5);
        }
    return out;
}

} // namespace

std::vector<ImagePlane> eval_node(const OpSchema& schema, const std::vector<ParamValue>& params,
                                  const std::vector<ImagePlane>& inputs, int resolution,
                                  uint64_t seed, double phase_u, double phase_v) {
    if (int(inputs.size()) != schema.n_inputs)
        throw Error("schema-mismatch", schema.name + ": expected " + std::to_string(schema.n_inputs) +
                                           " inputs, got " + std::to_string(inputs.size()));
    if (int(params.size()) != int(schema.params.size()))
        throw Error("schema-mismatch", schema.name + ": wrong parameter count");
    for (const auto& in : inputs)
        if (in.res != resolution)
            throw Error("schema-mismatch", schema.name + ": input resolution mismatch");

    const uint64_t node_seed = mix_seed(seed, seed_param_of(schema, params));
    const std::string& op = schema.name;

    if (op == "uniform_color") return {gen_uniform_color(resolution, get_vec(schema, params, "color"))};
    if (op == "perlin_noise")
        return {gen_perlin(resolution, get_int(schema, params, "scale"), node_seed, phase_u, phase_v)};
    if (op == "fbm_noise")
        return {gen_fbm(resolution, get_int(schema, params, "scale"), get_int(schema, params, "octaves"),
                        get_scalar(schema, params, "gain"), node_seed, phase_u, phase_v)};
    if (op == "cells")
        return {gen_cells(resolution, get_int(schema, params, "scale"),
                          get_scalar(schema, params, "jitter"), node_seed, phase_u, phase_v)};
    if (op == "checker")
        return {gen_checker(resolution, get_int(schema, params, "tiles"), phase_u, phase_v)};
    if (op == "gradient_linear")
        return {gen_gradient_linear(resolution, get_scalar(schema, params, "angle"), phase_u, phase_v)};
    if (op == "brick")
        return {gen_brick(resolution, get_int(schema, params, "rows"), get_int(schema, params, "cols"),
                          get_scalar(schema, params, "mortar_width"), phase_u, phase_v)};

    if (op == "blend")
        return {op_blend(inputs[0], inputs[1], get_int(schema, params, "mode"),
                         get_scalar(schema, params, "opacity"))};
    if (op == "levels")
        return {op_levels(inputs[0], get_scalar(schema, params, "in_lo"),
                          get_scalar(schema, params, "in_hi"), get_scalar(schema, params, "gamma"),
                          get_scalar(schema, params, "out_lo"), get_scalar(schema, params, "out_hi"))};
    if (op == "hsl_adjust")
        return {op_hsl_adjust(inputs[0], get_scalar(schema, params, "dh"),
                              get_scalar(schema, params, "ds"), get_scalar(schema, params, "dl"))};
    if (op == "blur_gaussian") return {op_blur_gaussian(inputs[0], get_scalar(schema, params, "radius"))};
    if (op == "transform2d")
        return {op_transform2d(inputs[0], get_scalar(schema, params, "scale_x"),
                               get_scalar(schema, params, "scale_y"),
                               get_scalar(schema, params, "rotation"),
                               get_scalar(schema, params, "offset_x"),
                               get_scalar(schema, params, "offset_y"))};
    if (op == "directional_warp")
        return {op_directional_warp(inputs[0], inputs[1], get_scalar(schema, params, "intensity"),
                                    get_scalar(schema, params, "angle"))};
    if (op == "invert") return {op_invert(inputs[0])};
    if (op == "threshold") return {op_threshold(inputs[0], get_scalar(schema, params, "level"))};
    if (op == "colorize")
        return {op_colorize(inputs[0], get_vec(schema, params, "color_a"),
                            get_vec(schema, params, "color_b"))};
    if (op == "grayscale") return {to_channels(inputs[0], 1)};
    if (op == "normal_from_height")
        return {op_normal_from_height(inputs[0], get_scalar(schema, params, "strength"))};
    if (schema.is_switch) {
        const int sel = get_int(schema, params, "selector");
        if (sel < 0 || sel >= schema.n_inputs)
            throw Error("param-range", op + ": selector out of range");
        return {inputs[size_t(sel)]};
    }
    if (schema.is_output) return {};

    throw Error("unknown-type", "no evaluator for op: " + op);
}

namespace {

ImagePlane default_map(MapRole role, int res) {
    switch (role) {
    case MapRole::Albedo: return ImagePlane(res, 3, 0.5f);
    case MapRole::Normal: {
        ImagePlane n(res, 3, 0.5f);
        for (int i = 0; i < res * res; ++i) n.data[size_t(3) * i + 2] = 1.0f;
        return n;
    }
    case MapRole::Roughness: return ImagePlane(res, 1, 0.5f);
    default: return ImagePlane(res, 1, 0.0f);
    }
}

/// Decode, renormalize to unit length, and re-encode a normal map.
ImagePlane sanitize_normal(const ImagePlane& in) {
    ImagePlane rgb = to_channels(in, 3);
    ImagePlane out(rgb.res, 3);
    const size_t n = size_t(rgb.res) * rgb.res;
    for (size_t i = 0; i < n; ++i) {
        double nx = 2.0 * rgb.data[3 * i] - 1.0;
        double ny = 2.0 * rgb.data[3 * i + 1] - 1.0;
        double nz = 2.0 * rgb.data[3 * i + 2] - 1.0;
        const double len = std::sqrt(nx * nx + ny * ny + nz * nz);
        if (len < 1e-6 || nz <= 0.0) {
            nx = 0.0;
            ny = 0.0;
            nz = 1.0;
        } else {
            nx /= len;
            ny /= len;
            nz /= len;
        }
        out.data[3 * i] = float(0.5 * nx + 0.5);
        out.data[3 * i + 1] = float(0.5 * ny + 0.5);
        out.data[3 * i + 2] = float(0.5 * nz + 0.5);
    }
    return out;
}

} // namespace

MaterialMaps evaluate(const NodeGraph& g, const OpLibrary& lib, int resolution, uint64_t seed) {
    ValidationReport report = validate_graph(g, lib);
    if (!report.ok)
        throw Error(report.violations[0].rule, "evaluate: " + report.violations[0].message);

    const std::vector<int> reachable = reachable_to_outputs(g);
    const std::vector<bool> keep = [&] {
        std::vector<bool> k(g.nodes.size(), false);
        for (int id : reachable) k[size_t(id)] = true;
        return k;
    }();

    // edge lookup: (node, input slot) -> source slot
    std::map<std::pair<int, int>, SlotRef> incoming;
    for (const Edge& e : g.edges) incoming[{e.to.node_id, e.to.index}] = e.from;

    std::vector<std::vector<ImagePlane>> produced(g.nodes.size());
    for (int id : topological_order(g)) {
        if (!keep[size_t(id)]) continue;
        const Node& node = *g.find_node(id);
        const OpSchema& schema = lib.schema(node.type_id);
        std::vector<ImagePlane> inputs;
        for (int s = 0; s < schema.n_inputs; ++s) {
            auto it = incoming.find({id, s});
            if (it == incoming.end())
                throw Error("unconnected-input", "node " + std::to_string(id) + " (" + schema.name +
                                                     ") input slot " + std::to_string(s) +
                                                     " is unconnected");
            inputs.push_back(produced[size_t(it->second.node_id)][size_t(it->second.index)]);
        }
        produced[size_t(id)] = eval_node(schema, node.params, inputs, resolution, seed);
    }

    MaterialMaps maps;
    for (int r = 0; r < kNumRoles; ++r) {
        const MapRole role = MapRole(r);
        ImagePlane img;
        if (g.outputs[r] >= 0) {
            auto it = incoming.find({g.outputs[r], 0});
            if (it == incoming.end())
                throw Error("unconnected-input", "output node " + std::to_string(g.outputs[r]) +
                                                     " input slot 0 is unconnected");
            img = produced[size_t(it->second.node_id)][size_t(it->second.index)];
        } else {
            img = default_map(role, resolution);
        }
        switch (role) {
        case MapRole::Albedo: maps.albedo = to_channels(img, 3); break;
        case MapRole::Normal: maps.normal = sanitize_normal(img); break;
        case MapRole::Roughness: maps.roughness = to_channels(img, 1); break;
        default: maps.metallic = to_channels(img, 1); break;
        }
    }
    return maps;
}

ImagePlane render(const MaterialMaps& maps, const RenderConfig& cfg) {
    if (cfg.light_intensity <= 0.0 || cfg.camera_distance <= 0.0)
        throw Error("param-range", "render: light_intensity and camera_distance must be positive");
    const int res = maps.res();
    ImagePlane out(res, 3);
    const double d = cfg.camera_distance;
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            // surface point on the unit plane; light/camera above the center
            const double pu = (x + 0.5) / res - 0.5;
            const double pv = (y + 0.5) / res - 0.5;
            double lx, ly, lz, dist2;
            if (cfg.orthographic) {
                lx = 0.0;
                ly = 0.0;
                lz = 1.0;
                dist2 = d * d;
            } else {
                lx = -pu;
                ly = -pv;
                lz = d;
                dist2 = lx * lx + ly * ly + lz * lz;
                const double inv = 1.0 / std::sqrt(dist2);
                lx *= inv;
                ly *= inv;
                lz *= inv;
            }
            const double nx = 2.0 * maps.normal.at(x, y, 0) - 1.0;
            const double ny = 2.0 * maps.normal.at(x, y, 1) - 1.0;
            const double nz = 2.0 * maps.normal.at(x, y, 2) - 1.0;
            const double cos_t = nx * lx + ny * ly + nz * lz;
            if (cos_t <= 0.0) {
                out.at(x, y, 0) = out.at(x, y, 1) = out.at(x, y, 2) = 0.0f;
                continue;
            }
            const double rough = maps.roughness.at(x, y, 0);
            const double metal = maps.metallic.at(x, y, 0);
            const double alpha = std::max(rough * rough, 1e-3);
            const double a2 = alpha * alpha;
            // collocated light: h == l == v, so NoH = NoL = NoV = cos_t and VoH = 1
            const double denom = cos_t * cos_t * (a2 - 1.0) + 1.0;
            const double D = a2 / (kPi * denom * denom);
            const double V = 0.25 / std::max(cos_t * std::sqrt(cos_t * cos_t * (1.0 - a2) + a2), 1e-9);
            const double atten = cfg.light_intensity * cos_t / dist2;
            for (int c = 0; c < 3; ++c) {
                const double alb = maps.albedo.at(x, y, c);
                const double f0 = 0.04 + metal * (alb - 0.04);
                const double lum = (alb / kPi * (1.0 - metal) + D * V * f0) * atten;
                out.at(x, y, c) = clampf(std::pow(std::max(lum, 0.0), 1.0 / cfg.gamma));
            }
        }
    return out;
}

void save_material_maps(const std::string& stem, const MaterialMaps& maps) {
    write_png(stem + "_albedo.png", maps.albedo, true);
    write_png(stem + "_normal.png", maps.normal, false);
    write_png(stem + "_roughness.png", maps.roughness, false);
    write_png(stem + "_metallic.png", maps.metallic, false);
}

} // namespace matforge
