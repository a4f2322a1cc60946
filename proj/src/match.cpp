#include "matforge/match.hpp"

#include <algorithm>
#include <cmath>

#include "matforge/util.hpp"

namespace matforge {

namespace {

constexpr int kThumbRes = 16;
constexpr int kKernelTaps = 27; // 3x3 spatial, 3 channels

/// Kernels are drawn i.i.d. normal, mean-subtracted so a constant image maps
/// to (numerically) zero features, then unit-normalized.
std::vector<double> make_kernel_bank(const StyleMetricConfig& cfg) {
    if (cfg.kernel_count <= 0) throw Error("config-invalid", "kernel_count must be positive");
    Rng rng(cfg.kernel_seed);
    std::vector<double> bank(size_t(cfg.kernel_count) * kKernelTaps);
    for (int k = 0; k < cfg.kernel_count; ++k) {
        double* w = bank.data() + size_t(k) * kKernelTaps;
        double mean = 0.0;
        for (int t = 0; t < kKernelTaps; ++t) {
            w[t] = rng.normal();
            mean += w[t];
        }
        mean /= kKernelTaps;
        double norm = 0.0;
        for (int t = 0; t < kKernelTaps; ++t) {
            w[t] -= mean;
            norm += w[t] * w[t];
        }
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (int t = 0; t < kKernelTaps; ++t) w[t] /= norm;
    }
    return bank;
}

/// Gram matrix of bank responses plus a 16x16x3 thumbnail; enough to evaluate
/// the style distance against any other image's features.
struct StyleFeatures {
    std::vector<double> gram;  // kernel_count x kernel_count, mean over pixels
    std::vector<double> thumb; // 16*16*3 box-averaged
};

StyleFeatures style_features(const ImagePlane& img, const std::vector<double>& bank, int n_kernels) {
    if (img.res <= 0) throw Error("config-invalid", "empty image");
    const int res = img.res;
    const int last_c = img.channels - 1;
    StyleFeatures out;

    // Wrap-padded convolution responses, one row of the feature matrix per kernel.
    std::vector<double> feats(size_t(n_kernels) * res * res);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            double window[kKernelTaps];
            int t = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    for (int c = 0; c < 3; ++c)
                        window[t++] = img.wrap_at(x + dx, y + dy, std::min(c, last_c));
            const size_t pix = size_t(y) * res + x;
            for (int k = 0; k < n_kernels; ++k) {
                const double* w = bank.data() + size_t(k) * kKernelTaps;
                double acc = 0.0;
                for (int i = 0; i < kKernelTaps; ++i) acc += w[i] * window[i];
                feats[size_t(k) * res * res + pix] = acc;
            }
        }
    }
    const size_t n_pix = size_t(res) * res;
    out.gram.assign(size_t(n_kernels) * n_kernels, 0.0);
    for (int i = 0; i < n_kernels; ++i) {
        for (int j = i; j < n_kernels; ++j) {
            const double* fi = feats.data() + size_t(i) * n_pix;
            const double* fj = feats.data() + size_t(j) * n_pix;
            double acc = 0.0;
            for (size_t p = 0; p < n_pix; ++p) acc += fi[p] * fj[p];
            acc /= double(n_pix);
            out.gram[size_t(i) * n_kernels + j] = acc;
            out.gram[size_t(j) * n_kernels + i] = acc;
        }
    }

    // Area-weighted box average onto a 16x16x3 thumbnail (exact for any res).
    out.thumb.assign(size_t(kThumbRes) * kThumbRes * 3, 0.0);
    const double s = double(res) / kThumbRes;
    for (int ty = 0; ty < kThumbRes; ++ty) {
        const double y0 = ty * s, y1 = (ty + 1) * s;
        for (int tx = 0; tx < kThumbRes; ++tx) {
            const double x0 = tx * s, x1 = (tx + 1) * s;
            double acc[3] = {0.0, 0.0, 0.0};
            for (int y = int(std::floor(y0)); y < int(std::ceil(y1)); ++y) {
                const double wy = std::min(double(y + 1), y1) - std::max(double(y), y0);
                for (int x = int(std::floor(x0)); x < int(std::ceil(x1)); ++x) {
                    const double wx = std::min(double(x + 1), x1) - std::max(double(x), x0);
                    const double w = wx * wy;
                    for (int c = 0; c < 3; ++c) acc[c] += w * img.at(x, y, std::min(c, last_c));
                }
            }
            for (int c = 0; c < 3; ++c)
                out.thumb[(size_t(ty) * kThumbRes + tx) * 3 + c] = acc[c] / (s * s);
        }
    }
    return out;
}

double style_from_features(const StyleFeatures& a, const StyleFeatures& b,
                           const StyleMetricConfig& cfg) {
    double gram_l1 = 0.0;
    for (size_t i = 0; i < a.gram.size(); ++i) gram_l1 += std::abs(a.gram[i] - b.gram[i]);
    gram_l1 /= double(a.gram.size());
    double thumb_l1 = 0.0;
    for (size_t i = 0; i < a.thumb.size(); ++i) thumb_l1 += std::abs(a.thumb[i] - b.thumb[i]);
    thumb_l1 /= double(a.thumb.size());
    return cfg.gram_weight * gram_l1 + cfg.thumb_weight * thumb_l1;
}

void require_same_shape(const ImagePlane& a, const ImagePlane& b, const char* op) {
    if (!a.same_shape(b))
        throw Error("size-mismatch", std::string(op) + " requires images of identical shape, got " +
                                         std::to_string(a.res) + "x" + std::to_string(a.channels) +
                                         " vs " + std::to_string(b.res) + "x" +
                                         std::to_string(b.channels));
}

} // namespace

double style_distance(const ImagePlane& a, const ImagePlane& b, const StyleMetricConfig& cfg) {
    require_same_shape(a, b, "style_distance");
    const std::vector<double> bank = make_kernel_bank(cfg);
    return style_from_features(style_features(a, bank, cfg.kernel_count),
                               style_features(b, bank, cfg.kernel_count), cfg);
}

double swd(const ImagePlane& a, const ImagePlane& b, int n_directions, uint64_t seed) {
    require_same_shape(a, b, "swd");
    if (n_directions <= 0) throw Error("config-invalid", "swd needs at least one direction");
    const int ch = a.channels;
    const size_t n_pix = size_t(a.res) * a.res;
    Rng rng(seed);
    std::vector<double> dir(static_cast<size_t>(ch));
    std::vector<double> pa(n_pix), pb(n_pix);
    double total = 0.0;
    for (int d = 0; d < n_directions; ++d) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (int c = 0; c < ch; ++c) {
                dir[size_t(c)] = rng.normal();
                norm += dir[size_t(c)] * dir[size_t(c)];
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (int c = 0; c < ch; ++c) dir[size_t(c)] /= norm;
        for (size_t p = 0; p < n_pix; ++p) {
            double va = 0.0, vb = 0.0;
            for (int c = 0; c < ch; ++c) {
                va += dir[size_t(c)] * a.data[p * ch + c];
                vb += dir[size_t(c)] * b.data[p * ch + c];
            }
            pa[p] = va;
            pb[p] = vb;
        }
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        double w1 = 0.0;
        for (size_t p = 0; p < n_pix; ++p) w1 += std::abs(pa[p] - pb[p]);
        total += w1 / double(n_pix);
    }
    return total / n_directions;
}

RankReport rank(const std::vector<NodeGraph>& candidates, const ImagePlane& prompt,
                const OpLibrary& lib, const RankConfig& cfg) {
    const int res = cfg.resolution > 0 ? cfg.resolution : prompt.res;
    const ImagePlane ref = prompt.res == res ? prompt : resize_bilinear(prompt, res);
    const std::vector<double> bank = make_kernel_bank(cfg.metric);
    const StyleFeatures ref_feat = style_features(ref, bank, cfg.metric.kernel_count);

    struct Scored {
        bool ok = false;
        RankEntry entry;
        std::string reason;
    };
    std::vector<Scored> scored(candidates.size());
    parallel_for(candidates.size(), cfg.jobs, [&](size_t i) {
        try {
            const MaterialMaps maps = evaluate(candidates[i], lib, res, cfg.eval_seed);
            const ImagePlane img = render(maps, cfg.render);
            RankEntry e;
            e.index = int(i);
            e.style = style_from_features(style_features(img, bank, cfg.metric.kernel_count),
                                          ref_feat, cfg.metric);
            e.swd = swd(img, ref, cfg.metric.swd_directions, cfg.metric.swd_seed);
            scored[i] = {true, e, {}};
        } catch (const Error& err) {
            scored[i] = {false, {}, err.code() + ": " + err.what()};
        }
    });
    RankReport report;
    for (size_t i = 0; i < scored.size(); ++i) {
        if (scored[i].ok)
            report.ranked.push_back(scored[i].entry);
        else
            report.excluded.emplace_back(int(i), scored[i].reason);
    }
    std::stable_sort(report.ranked.begin(), report.ranked.end(),
                     [](const RankEntry& x, const RankEntry& y) { return x.style < y.style; });
    return report;
}

OptimizeResult optimize_params(const NodeGraph& g, const ImagePlane& target,
                               const OpLibrary& lib, const OptimizeConfig& cfg) {
    const ValidationReport vr = validate_graph(g, lib);
    if (!vr.ok)
        throw Error(vr.violations.front().rule, vr.violations.front().message);

    struct Coord {
        int node, param, elem;
        double lo, hi;
    };
    std::vector<Coord> coords;
    for (size_t ni = 0; ni < g.nodes.size(); ++ni) {
        const OpSchema& schema = lib.schema(g.nodes[ni].type_id);
        for (size_t pi = 0; pi < schema.params.size(); ++pi) {
            const ParamSchema& ps = schema.params[pi];
            if (!ps.optimizable || ps.is_discrete()) continue;
            for (int e = 0; e < ps.scalar_count(); ++e)
                coords.push_back({int(ni), int(pi), e, ps.lo, ps.hi});
        }
    }
    if (coords.empty())
        throw Error("no-optimizable-parameters",
                    "graph has no continuous parameters marked optimizable");

    const int res = cfg.resolution > 0 ? cfg.resolution : target.res;
    const ImagePlane ref = target.res == res ? target : resize_bilinear(target, res);
    const std::vector<double> bank = make_kernel_bank(cfg.metric);
    const StyleFeatures ref_feat = style_features(ref, bank, cfg.metric.kernel_count);

    NodeGraph work = g;
    auto write = [&](const Coord& c, double v) {
        work.nodes[size_t(c.node)].params[size_t(c.param)].scalars[size_t(c.elem)] =
            std::clamp(v, c.lo, c.hi);
    };
    auto loss = [&]() {
        const MaterialMaps maps = evaluate(work, lib, res, cfg.eval_seed);
        const ImagePlane img = render(maps, cfg.render);
        return style_from_features(style_features(img, bank, cfg.metric.kernel_count), ref_feat,
                                   cfg.metric);
    };

    const size_t n = coords.size();
    std::vector<double> theta(n);
    for (size_t i = 0; i < n; ++i)
        theta[i] = g.nodes[size_t(coords[i].node)].params[size_t(coords[i].param)].scalars[size_t(
            coords[i].elem)];

    OptimizeResult out;
    out.initial_score = loss();
    out.best_score = out.initial_score;
    out.graph = work;

    Rng rng(cfg.seed);
    double lr = cfg.lr_rel;
    std::vector<double> m(n, 0.0), v(n, 0.0), delta(n), up(n), down(n);
    for (int k = 1; k <= cfg.iters; ++k) {
        for (size_t i = 0; i < n; ++i) delta[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (size_t i = 0; i < n; ++i) {
            const double c = cfg.c_rel * (coords[i].hi - coords[i].lo);
            up[i] = std::clamp(theta[i] + c * delta[i], coords[i].lo, coords[i].hi);
            down[i] = std::clamp(theta[i] - c * delta[i], coords[i].lo, coords[i].hi);
        }
        for (size_t i = 0; i < n; ++i) write(coords[i], up[i]);
        const double loss_up = loss();
        for (size_t i = 0; i < n; ++i) write(coords[i], down[i]);
        const double loss_down = loss();
        for (size_t i = 0; i < n; ++i) {
            // Per-coordinate denominator from the clamped probe points, so the
            // estimate stays unbiased when a perturbation hits a range bound.
            const double denom = up[i] - down[i];
            const double grad = denom != 0.0 ? (loss_up - loss_down) / denom : 0.0;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad * grad;
            const double m_hat = m[i] / (1.0 - std::pow(cfg.beta1, k));
            const double v_hat = v[i] / (1.0 - std::pow(cfg.beta2, k));
            const double range = coords[i].hi - coords[i].lo;
            theta[i] = std::clamp(theta[i] - lr * range * m_hat / (std::sqrt(v_hat) + 1e-12),
                                  coords[i].lo, coords[i].hi);
        }
        for (size_t i = 0; i < n; ++i) write(coords[i], theta[i]);
        const double score = loss();
        if (score < out.best_score) {
            out.best_score = score;
            out.graph = work;
        }
        out.best_trace.push_back(out.best_score);
        lr *= cfg.lr_decay;
    }
    return out;
}

} // namespace matforge
