#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "matforge/corpus.hpp"
#include "matforge/tokenizer.hpp"

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

Edge edge(int from, int to, int in_slot, int out_slot = 0) {
    return {{from, SlotKind::Output, out_slot}, {to, SlotKind::Input, in_slot}};
}

/// perlin(0) -> invert(1) -> output_roughness(2)
NodeGraph chain_graph() {
    NodeGraph g;
    g.nodes = {make_node(0, "perlin_noise"), make_node(1, "invert"),
               make_node(2, "output_roughness")};
    g.edges = {edge(0, 1, 0), edge(1, 2, 0)};
    g.outputs[int(MapRole::Roughness)] = 2;
    return g;
}

/// perlin(0) -> {invert(1), blur(2)} -> blend(3) -> output_albedo(4)
NodeGraph diamond_graph(bool flip_blend_inputs) {
    NodeGraph g;
    g.nodes = {make_node(0, "perlin_noise"), make_node(1, "invert"),
               make_node(2, "blur_gaussian"), make_node(3, "blend"),
               make_node(4, "output_albedo")};
    const int b_slot = flip_blend_inputs ? 1 : 0;
    const int c_slot = flip_blend_inputs ? 0 : 1;
    g.edges = {edge(0, 1, 0), edge(0, 2, 0), edge(1, 3, b_slot), edge(2, 3, c_slot),
               edge(3, 4, 0)};
    g.outputs[int(MapRole::Albedo)] = 4;
    return g;
}

const ParamSchema& param_schema(const char* op, const char* pname) {
    for (const ParamSchema& p : lib().by_name(op).params)
        if (p.name == pname) return p;
    throw std::runtime_error("missing param in test");
}

} // namespace

TEST_CASE("quantize: unit-range float endpoints and midpoint") {
    const ParamSchema& opacity = param_schema("blend", "opacity");
    CHECK(quantize(0.0, opacity) == 0);
    CHECK(quantize(1.0, opacity) == 127);
    CHECK(quantize(0.5, opacity) == 64);
    CHECK(dequantize(0, opacity) == doctest::Approx(0.0));
    CHECK(dequantize(127, opacity) == doctest::Approx(1.0));
}

TEST_CASE("quantize: discrete kinds are index-linear and exact") {
    const ParamSchema& scale = param_schema("perlin_noise", "scale"); // int in [1,16]
    for (int v = 1; v <= 16; ++v) {
        CHECK(quantize(double(v), scale) == v - 1);
        CHECK(dequantize(v - 1, scale) == double(v));
    }
    const ParamSchema& mode = param_schema("blend", "mode");
    CHECK(quantize(3.0, mode) == 3);
    CHECK(dequantize(3, mode) == 3.0);
}

TEST_CASE("quantize round trip stays within half a bin over a random sweep") {
    const ParamSchema& gain = param_schema("fbm_noise", "gain"); // float [0.3, 0.8]
    const double half_bin = (gain.hi - gain.lo) / 254.0;
    Rng r(31);
    for (int i = 0; i < 10000; ++i) {
        const double v = r.uniform(gain.lo, gain.hi);
        const double back = dequantize(quantize(v, gain), gain);
        CHECK(std::abs(back - v) <= half_bin + 1e-12);
    }
    // fewer bins -> coarser but still within its own half bin
    for (int i = 0; i < 1000; ++i) {
        const double v = r.uniform(gain.lo, gain.hi);
        const double back = dequantize(quantize(v, gain, 32), gain, 32);
        CHECK(std::abs(back - v) <= (gain.hi - gain.lo) / 62.0 + 1e-12);
    }
}

TEST_CASE("quantize rejects out-of-range values and bins") {
    const ParamSchema& opacity = param_schema("blend", "opacity");
    CHECK_THROWS_AS(quantize(-0.1, opacity), Error);
    CHECK_THROWS_AS(quantize(1.2, opacity), Error);
    CHECK_THROWS_AS(dequantize(128, opacity), Error);
    const ParamSchema& scale = param_schema("perlin_noise", "scale");
    CHECK_THROWS_AS(dequantize(40, scale), Error); // beyond the 16 discrete values
    try {
        quantize(-0.1, opacity);
    } catch (const Error& e) {
        CHECK(e.code() == "out-of-range");
    }
}

TEST_CASE("node order walks back to front from the outputs") {
    CHECK(node_order_pi_r(chain_graph()) == std::vector<int>{2, 1, 0});
    // frontier ties break by discovering input slot, then id
    CHECK(node_order_pi_r(diamond_graph(false)) == std::vector<int>{4, 3, 1, 2, 0});
    CHECK(node_order_pi_r(diamond_graph(true)) == std::vector<int>{4, 3, 2, 1, 0});
}

TEST_CASE("node order appends unreachable nodes by ascending id") {
    NodeGraph g = chain_graph();
    Node d1 = make_node(7, "checker");
    Node d2 = make_node(4, "cells");
    g.nodes.push_back(d1);
    g.nodes.push_back(d2);
    CHECK(node_order_pi_r(g) == std::vector<int>{2, 1, 0, 4, 7});
}

TEST_CASE("encode emits the documented streams for the chain graph") {
    const NodeGraph g = chain_graph();
    const TokenizedGraph t = encode(g, lib());

    const int t_out = lib().by_name("output_roughness").type_id;
    const int t_inv = lib().by_name("invert").type_id;
    const int t_per = lib().by_name("perlin_noise").type_id;
    CHECK(t.node_seq == std::vector<int>{tok::kStart, tok::kTypeOffset + t_out,
                                         tok::kTypeOffset + t_inv, tok::kTypeOffset + t_per,
                                         tok::kEnd});

    // slot list in node order: output_roughness {in0}, invert {out0,in0}, perlin {out0}
    REQUIRE(t.slot_list.size() == 4);
    CHECK(t.slot_list[0] == SlotRef{2, SlotKind::Input, 0});
    CHECK(t.slot_list[1] == SlotRef{1, SlotKind::Output, 0});
    CHECK(t.slot_list[2] == SlotRef{1, SlotKind::Input, 0});
    CHECK(t.slot_list[3] == SlotRef{0, SlotKind::Output, 0});

    // pairs sorted by destination slot position: (1 -> 0), (3 -> 2)
    CHECK(t.edge_seq == std::vector<int>{tok::kStart, tok::kPtrOffset + 1, tok::kPtrOffset + 0,
                                         tok::kPtrOffset + 3, tok::kPtrOffset + 2, tok::kEnd});

    // params: none, none, then perlin scale=4 (bin 3) and seed=0 (bin 0)
    CHECK(t.param_seq == std::vector<int>{tok::kStart, tok::kNodeMark, tok::kNodeMark,
                                          tok::kNodeMark, tok::kBinOffset + 3, tok::kBinOffset + 0,
                                          tok::kEnd});

    CHECK(t.aux.node_pos.size() == t.node_seq.size());
    CHECK(t.aux.node_ordinal.size() == t.node_seq.size());
    CHECK(t.aux.edge_pos.size() == t.edge_seq.size());
    CHECK(t.aux.param_pos.size() == t.param_seq.size());
}

TEST_CASE("encode of a single unconnected generator produces empty interiors") {
    NodeGraph g;
    g.nodes = {make_node(0, "uniform_color")};
    const TokenizedGraph t = encode(g, lib());
    CHECK(t.node_seq.size() == 3);
    CHECK(t.edge_seq == std::vector<int>{tok::kStart, tok::kEnd});
    // NODE_MARK + three color bins at 0.5 -> 64
    CHECK(t.param_seq == std::vector<int>{tok::kStart, tok::kNodeMark, tok::kBinOffset + 64,
                                          tok::kBinOffset + 64, tok::kBinOffset + 64, tok::kEnd});
    const NodeGraph back = decode(t, lib());
    CHECK(back.nodes.size() == 1);
    CHECK(back.edges.empty());
}

TEST_CASE("encode enforces the size caps") {
    NodeGraph g;
    for (int i = 0; i < 81; ++i) g.nodes.push_back(make_node(i, "uniform_color"));
    CHECK_THROWS_AS(encode(g, lib()), Error);
    try {
        encode(g, lib());
    } catch (const Error& e) {
        CHECK(e.code() == "size-cap-exceeded");
    }

    NodeGraph s;
    for (int i = 0; i < 71; ++i) s.nodes.push_back(make_node(i, "blend")); // 3 slots each
    CHECK_THROWS_AS(encode(s, lib()), Error); // 213 slots > 210 with only 71 nodes
}

TEST_CASE("decode rejects malformed streams with positioned errors") {
    const TokenizedGraph good = encode(chain_graph(), lib());

    TokenizedGraph t = good;
    t.node_seq.pop_back(); // drop END
    CHECK_THROWS_AS(decode(t, lib()), Error);

    t = good;
    t.node_seq[1] = tok::kTypeOffset + lib().size(); // unknown type
    CHECK_THROWS_AS(decode(t, lib()), Error);

    t = good;
    t.edge_seq.insert(t.edge_seq.end() - 1, tok::kPtrOffset + 1); // dangling half pair
    CHECK_THROWS_AS(decode(t, lib()), Error);

    t = good;
    t.edge_seq[1] = tok::kPtrOffset + 50; // beyond slot list
    try {
        decode(t, lib());
        FAIL("expected pointer-out-of-range");
    } catch (const Error& e) {
        CHECK(e.code() == "pointer-out-of-range");
    }

    t = good;
    std::swap(t.edge_seq[1], t.edge_seq[2]); // out/in kinds reversed
    CHECK_THROWS_AS(decode(t, lib()), Error);

    t = good;
    // connect perlin's output into invert's input a second time: slot 2 is
    // already occupied by the (3 -> 2) pair
    t.edge_seq.insert(t.edge_seq.end() - 1, tok::kPtrOffset + 3);
    t.edge_seq.insert(t.edge_seq.end() - 1, tok::kPtrOffset + 2);
    try {
        decode(t, lib());
        FAIL("expected malformed-sequence");
    } catch (const Error& e) {
        CHECK(e.code() == "malformed-sequence");
        CHECK(std::string(e.what()).find("already connected") != std::string::npos);
    }

    t = good;
    t.param_seq[4] = tok::kBinOffset + 90; // perlin scale has only 16 values
    CHECK_THROWS_AS(decode(t, lib()), Error);

    t = good;
    t.param_seq.pop_back();
    t.param_seq.pop_back(); // truncated block
    CHECK_THROWS_AS(decode(t, lib()), Error);
}

TEST_CASE("decode reports a cycle introduced by the edge stream") {
    // two inverts wired into a loop
    TokenizedGraph t;
    const int t_inv = lib().by_name("invert").type_id;
    t.node_seq = {tok::kStart, tok::kTypeOffset + t_inv, tok::kTypeOffset + t_inv, tok::kEnd};
    // slots: n0 {out@0, in@1}, n1 {out@2, in@3}
    t.edge_seq = {tok::kStart, tok::kPtrOffset + 2, tok::kPtrOffset + 1,
                  tok::kPtrOffset + 0, tok::kPtrOffset + 3, tok::kEnd};
    t.param_seq = {tok::kStart, tok::kNodeMark, tok::kNodeMark, tok::kEnd};
    try {
        decode(t, lib());
        FAIL("expected cycle-introduced");
    } catch (const Error& e) {
        CHECK(e.code() == "cycle-introduced");
    }
}

TEST_CASE("encode-decode-encode is token exact over 200 grammar graphs") {
    const auto graphs = generate_base_graphs(TemplateConfig{}, 200, 77, lib());
    REQUIRE(graphs.size() == 200);
    for (size_t gi = 0; gi < graphs.size(); ++gi) {
        CAPTURE(gi);
        const NodeGraph& g = graphs[gi];
        const TokenizedGraph t1 = encode(g, lib());
        const NodeGraph g2 = decode(t1, lib());
        const TokenizedGraph t2 = encode(g2, lib());
        REQUIRE(t1.node_seq == t2.node_seq);
        REQUIRE(t1.edge_seq == t2.edge_seq);
        REQUIRE(t1.param_seq == t2.param_seq);

        // structure: edges map 1:1 through the order permutation
        const std::vector<int> order = node_order_pi_r(g);
        std::map<int, int> pos;
        for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = int(i);

        // slot lists agree once original ids map to their order position
        REQUIRE(t1.slot_list.size() == t2.slot_list.size());
        for (size_t i = 0; i < t1.slot_list.size(); ++i) {
            REQUIRE(pos[t1.slot_list[i].node_id] == t2.slot_list[i].node_id);
            REQUIRE(t1.slot_list[i].kind == t2.slot_list[i].kind);
            REQUIRE(t1.slot_list[i].index == t2.slot_list[i].index);
        }
        REQUIRE(g2.nodes.size() == g.nodes.size());
        REQUIRE(g2.edges.size() == g.edges.size());
        std::set<std::tuple<int, int, int, int>> orig, round;
        for (const Edge& e : g.edges)
            orig.insert({pos[e.from.node_id], e.from.index, pos[e.to.node_id], e.to.index});
        for (const Edge& e : g2.edges)
            round.insert({e.from.node_id, e.from.index, e.to.node_id, e.to.index});
        REQUIRE(orig == round);

        // parameters: discrete exact, floats within half a bin
        for (size_t i = 0; i < order.size(); ++i) {
            const Node& a = *g.find_node(order[i]);
            const Node& b = g2.nodes[i];
            REQUIRE(a.type_id == b.type_id);
            const OpSchema& s = lib().schema(a.type_id);
            for (size_t pi = 0; pi < s.params.size(); ++pi) {
                const ParamSchema& ps = s.params[pi];
                const double tol =
                    ps.is_discrete() ? 0.0 : (ps.hi - ps.lo) / 254.0 + 1e-12;
                for (int e = 0; e < ps.scalar_count(); ++e)
                    REQUIRE(std::abs(a.params[pi].scalars[size_t(e)] -
                                     b.params[pi].scalars[size_t(e)]) <= tol);
            }
        }
    }
}

TEST_CASE("reversed node order is usable as an autocompletion prefix order") {
    const NodeGraph g = diamond_graph(false);
    std::vector<int> order = node_order_pi_r(g);
    std::reverse(order.begin(), order.end());
    CHECK(order.front() == 0); // generators first
    CHECK(order.back() == 4);  // outputs last
    const auto slots = build_slot_list(order, g, lib());
    CHECK(slots.size() == size_t(g.total_slots(lib())));
    CHECK(slots[0].node_id == 0);
}
