#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "matforge/match.hpp"
#include "matforge/util.hpp"

using namespace matforge;

namespace {

const OpLibrary& lib() { return OpLibrary::builtin(); }

Node make_node(int id, const char* op) {
    Node n;
    n.id = id;
    n.type_id = lib().by_name(op).type_id;
    for (const ParamSchema& p : lib().by_name(op).params) {
        ParamValue v;
        v.scalars = p.defaults;
        n.params.push_back(std::move(v));
    }
    return n;
}

ImagePlane random_image(int res, int channels, uint64_t seed) {
    ImagePlane img(res, channels);
    Rng rng(seed);
    for (auto& v : img.data) v = float(rng.uniform());
    return img;
}

/// Brute-force 1-D Wasserstein-1: sort both samples, mean absolute difference.
double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / double(a.size());
}

NodeGraph color_graph(double r, double g, double b) {
    NodeGraph gr;
    Node c = make_node(0, "uniform_color");
    c.params[0].scalars = {r, g, b};
    gr.nodes = {c, make_node(1, "output_albedo")};
    gr.edges = {{{0, SlotKind::Output, 0}, {1, SlotKind::Input, 0}}};
    gr.outputs[int(MapRole::Albedo)] = 1;
    return gr;
}

ImagePlane render_of(const NodeGraph& g, int res) {
    return render(evaluate(g, lib(), res, 0), RenderConfig{});
}

} // namespace

TEST_CASE("swd matches the sorted 1-D oracle on random grayscale pairs") {
    // [DERIVED] oracle: independent brute-force sorted-projection Wasserstein.
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const ImagePlane a = random_image(8, 1, 1000 + uint64_t(trial));
        const ImagePlane b = random_image(8, 1, 5000 + uint64_t(trial));
        std::vector<double> va(a.data.begin(), a.data.end());
        std::vector<double> vb(b.data.begin(), b.data.end());
        const double expect = wasserstein_1d(va, vb);
        const double got = swd(a, b, 3 + trial % 5, uint64_t(trial));
        worst = std::max(worst, std::abs(got - expect));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("swd is zero on identical and on pixel-permuted images") {
    const ImagePlane a = random_image(12, 3, 42);
    CHECK(swd(a, a, 8, 7) == 0.0);

    // Same pixel multiset in a different spatial arrangement.
    ImagePlane b(a.res, a.channels);
    std::vector<int> perm(size_t(a.res) * a.res);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(99);
    for (size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[size_t(rng.uniform_int(0, int(i) - 1))]);
    for (size_t p = 0; p < perm.size(); ++p)
        for (int c = 0; c < 3; ++c)
            b.data[size_t(perm[p]) * 3 + size_t(c)] = a.data[p * 3 + size_t(c)];
    CHECK(swd(a, b, 8, 7) == 0.0);
}

TEST_CASE("swd is a symmetric non-negative deterministic score") {
    for (int trial = 0; trial < 10; ++trial) {
        const ImagePlane a = random_image(8, 3, 10 + uint64_t(trial));
        const ImagePlane b = random_image(8, 3, 20 + uint64_t(trial));
        const double ab = swd(a, b, 16, 5);
        CHECK(ab >= 0.0);
        CHECK(ab == swd(b, a, 16, 5));
        CHECK(ab == swd(a, b, 16, 5));
    }
    const ImagePlane a = random_image(8, 3, 1);
    const ImagePlane b = random_image(8, 3, 2);
    CHECK(swd(a, b, 16, 5) > 0.0);
    CHECK_THROWS_AS(swd(a, random_image(16, 3, 3), 4, 0), Error);
    CHECK_THROWS_AS(swd(a, b, 0, 0), Error);
}

TEST_CASE("style distance is zero on identity and bit-exact symmetric") {
    const ImagePlane a = random_image(24, 3, 77);
    const ImagePlane b = random_image(24, 3, 78);
    CHECK(style_distance(a, a) == 0.0);
    CHECK(style_distance(a, b) == style_distance(b, a));
    CHECK(style_distance(a, b) > 0.0);
    CHECK_THROWS_AS(style_distance(a, random_image(12, 3, 1)), Error);
}

TEST_CASE("style distance of constant black vs white is the thumbnail term") {
    // [DERIVED] hand-computed: zero-mean kernels null the Gram term on constant
    // images, and the mean-normalized 16x16 thumbnail L1 is exactly 1, so the
    // distance reduces to the 0.1 thumbnail weight.
    for (int channels : {1, 3}) {
        const ImagePlane black(32, channels, 0.0f);
        const ImagePlane white(32, channels, 1.0f);
        CHECK(style_distance(black, white) == doctest::Approx(0.1).epsilon(1e-12));
    }
    // Non-divisible resolution exercises the fractional box average.
    const ImagePlane black(24, 3, 0.0f);
    const ImagePlane white(24, 3, 1.0f);
    CHECK(style_distance(black, white) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("rank orders by style distance ascending with stable ties") {
    const NodeGraph target = color_graph(0.55, 0.3, 0.2);
    const ImagePlane prompt = render_of(target, 32);

    std::vector<NodeGraph> candidates = {
        color_graph(0.1, 0.9, 0.8),   // far
        target,                       // exact
        color_graph(0.5, 0.35, 0.25), // near
        target,                       // exact duplicate -> tie with index 1
        color_graph(0.9, 0.1, 0.3),  color_graph(0.2, 0.6, 0.7),
        color_graph(0.55, 0.32, 0.2),
    };
    const RankReport report = rank(candidates, prompt, lib());
    REQUIRE(report.ranked.size() == candidates.size());
    CHECK(report.excluded.empty());

    CHECK(report.ranked[0].index == 1);
    CHECK(report.ranked[0].style == 0.0);
    CHECK(report.ranked[0].swd == 0.0);
    CHECK(report.ranked[1].index == 3); // stable tie-break by input position
    CHECK(report.ranked[1].style == 0.0);
    for (size_t i = 1; i < report.ranked.size(); ++i)
        CHECK(report.ranked[i - 1].style <= report.ranked[i].style);

    // Reversing the candidate order must not change the score multiset.
    std::vector<NodeGraph> reversed(candidates.rbegin(), candidates.rend());
    const RankReport rev = rank(reversed, prompt, lib());
    REQUIRE(rev.ranked.size() == report.ranked.size());
    std::vector<int> mirrored, rev_idx;
    for (size_t i = 0; i < rev.ranked.size(); ++i) {
        CHECK(rev.ranked[i].style == report.ranked[i].style);
        mirrored.push_back(int(candidates.size()) - 1 - report.ranked[i].index);
        rev_idx.push_back(rev.ranked[i].index);
        if (i > 0 && rev.ranked[i].style == rev.ranked[i - 1].style)
            CHECK(rev.ranked[i - 1].index < rev.ranked[i].index); // stable in the new order too
    }
    std::sort(mirrored.begin(), mirrored.end());
    std::sort(rev_idx.begin(), rev_idx.end());
    CHECK(mirrored == rev_idx);

    // Worker count must not change the report.
    RankConfig threaded;
    threaded.jobs = 3;
    const RankReport par = rank(candidates, prompt, lib(), threaded);
    REQUIRE(par.ranked.size() == report.ranked.size());
    for (size_t i = 0; i < par.ranked.size(); ++i) {
        CHECK(par.ranked[i].index == report.ranked[i].index);
        CHECK(par.ranked[i].style == report.ranked[i].style);
    }

    // Top-5 mean never exceeds the full-set mean.
    double top5 = 0.0, full = 0.0;
    for (size_t i = 0; i < report.ranked.size(); ++i) {
        if (i < 5) top5 += report.ranked[i].style;
        full += report.ranked[i].style;
    }
    CHECK(top5 / 5.0 <= full / double(report.ranked.size()));
}

TEST_CASE("rank excludes candidates whose evaluation fails, with a reason") {
    const NodeGraph target = color_graph(0.4, 0.4, 0.4);
    const ImagePlane prompt = render_of(target, 32);

    NodeGraph broken; // reachable invert node with a dangling input
    broken.nodes = {make_node(0, "invert"), make_node(1, "output_albedo")};
    broken.edges = {{{0, SlotKind::Output, 0}, {1, SlotKind::Input, 0}}};
    broken.outputs[int(MapRole::Albedo)] = 1;

    const RankReport report = rank({target, broken, color_graph(0.8, 0.2, 0.1)}, prompt, lib());
    REQUIRE(report.ranked.size() == 2);
    REQUIRE(report.excluded.size() == 1);
    CHECK(report.excluded[0].first == 1);
    CHECK(report.excluded[0].second.find("unconnected-input") != std::string::npos);
    CHECK(report.ranked[0].index == 0);
    CHECK(report.ranked[1].index == 2);
}

TEST_CASE("optimizing toward the graph's own render returns it untouched") {
    const NodeGraph g = color_graph(0.3, 0.6, 0.2);
    const ImagePlane target = render_of(g, 32);
    OptimizeConfig cfg;
    cfg.iters = 25;
    cfg.seed = 4;
    const OptimizeResult res = optimize_params(g, target, lib(), cfg);
    CHECK(res.initial_score == 0.0);
    CHECK(res.best_score == 0.0);
    REQUIRE(res.graph.nodes.size() == g.nodes.size());
    CHECK(res.graph.nodes[0].params[0].scalars == g.nodes[0].params[0].scalars);
    for (double v : res.best_trace) CHECK(v == 0.0);
}

TEST_CASE("optimizer recovers a shifted color within half a quantization bin") {
    // [DERIVED] single-parameter recovery harness: one optimizable color,
    // start offset +0.2 per channel, 128-bin half-width is (hi-lo)/254.
    const std::vector<double> true_color = {0.3, 0.45, 0.6};
    const NodeGraph target_graph = color_graph(true_color[0], true_color[1], true_color[2]);
    const ImagePlane target = render_of(target_graph, 32);
    const NodeGraph start =
        color_graph(true_color[0] + 0.2, true_color[1] + 0.2, true_color[2] + 0.2);

    OptimizeConfig cfg;
    cfg.iters = 200;
    cfg.seed = 11;
    const OptimizeResult res = optimize_params(start, target, lib(), cfg);

    CHECK(res.initial_score > 0.0);
    CHECK(res.best_score < res.initial_score);
    REQUIRE(res.best_trace.size() == 200);
    for (size_t i = 1; i < res.best_trace.size(); ++i)
        CHECK(res.best_trace[i] <= res.best_trace[i - 1]);
    CHECK(res.best_trace.back() == res.best_score);

    const double half_bin = 1.0 / 254.0;
    const std::vector<double>& got = res.graph.nodes[0].params[0].scalars;
    REQUIRE(got.size() == 3);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(got[size_t(c)] - true_color[size_t(c)]) <= half_bin);

    // Deterministic given the seed.
    const OptimizeResult again = optimize_params(start, target, lib(), cfg);
    CHECK(again.best_score == res.best_score);
    CHECK(again.graph.nodes[0].params[0].scalars == got);
}

TEST_CASE("optimize_params rejects graphs without continuous parameters") {
    NodeGraph g; // a lone output node: structurally valid, zero parameters
    g.nodes = {make_node(0, "output_albedo")};
    g.outputs[int(MapRole::Albedo)] = 0;
    const ImagePlane target = random_image(16, 3, 5);
    try {
        optimize_params(g, target, lib(), OptimizeConfig{});
        FAIL("expected no-optimizable-parameters");
    } catch (const Error& e) {
        CHECK(e.code() == "no-optimizable-parameters");
    }
}
