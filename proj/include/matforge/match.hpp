#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "matforge/eval.hpp"
#include "matforge/graph.hpp"
#include "matforge/image.hpp"

namespace matforge {

/// Fixed feature bank and weights for the style metric. The bank holds
/// `kernel_count` random 3x3x3 convolution kernels drawn from `kernel_seed`;
/// each kernel is mean-subtracted (so constant images produce zero features)
/// and unit-normalized. A given seed always yields the same kernels.
struct StyleMetricConfig {
    int kernel_count = 16;
    uint64_t kernel_seed = 2026;
    double gram_weight = 1.0;  // weight of the Gram-matrix L1 term
    double thumb_weight = 0.1; // weight of the 16x16 thumbnail L1 term
    int swd_directions = 64;   // directions for the reported swd score
    uint64_t swd_seed = 2026;
};

/// Style distance between two images of the same resolution: mean absolute
/// difference of the feature-bank Gram matrices plus `thumb_weight` times the
/// mean absolute difference of 16x16 box-averaged thumbnails. Symmetric; zero
/// when bank features and thumbnails agree.
double style_distance(const ImagePlane& a, const ImagePlane& b, const StyleMetricConfig& cfg = {});

/// Sliced Wasserstein-1 distance between the pixel distributions of two
/// images with identical shape: average, over seeded random unit directions
/// in channel space, of the mean absolute difference between the sorted
/// projections of both pixel sets. Deterministic given the seed.
double swd(const ImagePlane& a, const ImagePlane& b, int n_directions, uint64_t seed);

struct RankEntry {
    int index = -1;   // position in the input candidate list
    double style = 0; // primary sort key, ascending
    double swd = 0;   // reported alongside
};

struct RankReport {
    std::vector<RankEntry> ranked;                     // ascending style; ties keep input order
    std::vector<std::pair<int, std::string>> excluded; // candidate index -> failure reason
};

struct RankConfig {
    StyleMetricConfig metric;
    RenderConfig render;
    int resolution = 0;     // evaluation resolution; 0 = use the prompt's
    uint64_t eval_seed = 0; // graph-level seed passed to evaluate()
    int jobs = 1;           // candidates are scored independently; output is jobs-invariant
};

/// Render every candidate with the one fixed RenderConfig and order them by
/// style distance to the prompt image (ascending, stable tie-break by input
/// index). Candidates whose evaluation throws are excluded, with the error
/// recorded in the report.
RankReport rank(const std::vector<NodeGraph>& candidates, const ImagePlane& prompt,
                const OpLibrary& lib, const RankConfig& cfg = {});

struct OptimizeConfig {
    int iters = 200;
    double c_rel = 0.01;    // perturbation radius, relative to each parameter range
    double lr_rel = 0.05;   // initial step size, relative to each parameter range
    double lr_decay = 0.98; // multiplicative per-iteration step decay
    double beta1 = 0.9;     // adaptive-moment coefficients
    double beta2 = 0.999;
    uint64_t seed = 0;
    int resolution = 0;     // evaluation resolution; 0 = use the target's
    uint64_t eval_seed = 0;
    StyleMetricConfig metric;
    RenderConfig render;
};

struct OptimizeResult {
    NodeGraph graph; // best iterate seen
    double initial_score = 0;
    double best_score = 0;
    std::vector<double> best_trace; // best-so-far score after each iteration
};

/// Minimize style_distance(render(evaluate(g)), target) over the continuous
/// parameters whose schema marks them optimizable, using simultaneous-
/// perturbation gradient estimates with adaptive-moment updates. Values are
/// clamped to their schema range after every step; discrete parameters and
/// graph structure are never touched. Returns the best iterate, so the final
/// score never exceeds the initial one.
/// Errors: no-optimizable-parameters.
OptimizeResult optimize_params(const NodeGraph& g, const ImagePlane& target,
                               const OpLibrary& lib, const OptimizeConfig& cfg = {});

} // namespace matforge
