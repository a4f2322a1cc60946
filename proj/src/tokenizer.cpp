#include "matforge/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace matforge {

int quantize(double v, const ParamSchema& schema, int bins) {
    if (v < schema.lo || v > schema.hi)
        throw Error("out-of-range", schema.name + ": value " + std::to_string(v) + " outside [" +
                                        std::to_string(schema.lo) + ", " + std::to_string(schema.hi) + "]");
    if (schema.is_discrete()) {
        const int idx = int(std::llround(v)) - int(std::llround(schema.lo));
        if (idx < 0 || idx >= schema.cardinality())
            throw Error("out-of-range", schema.name + ": discrete value outside range");
        return idx;
    }
    const double x = (v - schema.lo) / (schema.hi - schema.lo) * (bins - 1);
    const int bin = int(std::floor(x + 0.5)); // round half away from zero (x >= 0)
    return std::min(bin, bins - 1);
}

double dequantize(int bin, const ParamSchema& schema, int bins) {
    if (bin < 0 || bin >= bins) throw Error("out-of-range", schema.name + ": bin outside [0, bins)");
    if (schema.is_discrete()) {
        if (bin >= schema.cardinality())
            throw Error("out-of-range", schema.name + ": bin exceeds discrete cardinality");
        return schema.lo + bin;
    }
    return schema.lo + double(bin) / (bins - 1) * (schema.hi - schema.lo);
}

NodeGraph snap_to_bins(const NodeGraph& g, const OpLibrary& lib, int bins) {
    NodeGraph out = g;
    for (Node& n : out.nodes) {
        const OpSchema& s = lib.schema(n.type_id);
        for (size_t pi = 0; pi < s.params.size() && pi < n.params.size(); ++pi) {
            const ParamSchema& ps = s.params[pi];
            for (double& v : n.params[pi].scalars) v = dequantize(quantize(v, ps, bins), ps, bins);
        }
    }
    return out;
}

std::vector<int> node_order_pi_r(const NodeGraph& g) {
    // incoming[node] maps input slot -> source node
    std::map<int, std::map<int, int>> incoming;
    for (const Edge& e : g.edges) incoming[e.to.node_id][e.to.index] = e.from.node_id;

    std::vector<int> order;
    std::set<int> visited;
    std::vector<int> level;
    for (int r = 0; r < kNumRoles; ++r)
        if (g.outputs[r] >= 0 && visited.insert(g.outputs[r]).second) level.push_back(g.outputs[r]);

    while (!level.empty()) {
        for (int id : level) order.push_back(id);
        // key: (discovering-input-slot index at first discovery, node_id)
        std::vector<std::pair<std::pair<int, int>, int>> found;
        std::set<int> found_ids;
        for (int id : level) {
            auto it = incoming.find(id);
            if (it == incoming.end()) continue;
            for (const auto& [slot, src] : it->second) {
                if (visited.count(src) || found_ids.count(src)) continue;
                found_ids.insert(src);
                found.push_back({{slot, src}, src});
            }
        }
        std::sort(found.begin(), found.end());
        level.clear();
        for (const auto& f : found) {
            visited.insert(f.second);
            level.push_back(f.second);
        }
    }

    std::vector<int> unreachable;
    for (const Node& n : g.nodes)
        if (!visited.count(n.id)) unreachable.push_back(n.id);
    std::sort(unreachable.begin(), unreachable.end());
    order.insert(order.end(), unreachable.begin(), unreachable.end());
    return order;
}

std::vector<SlotRef> build_slot_list(const std::vector<int>& order, const NodeGraph& g,
                                     const OpLibrary& lib) {
    std::vector<SlotRef> slots;
    for (int id : order) {
        const Node* n = g.find_node(id);
        if (!n) throw Error("bad-edge-endpoint", "slot list: unknown node " + std::to_string(id));
        const OpSchema& s = lib.schema(n->type_id);
        for (int i = 0; i < s.n_outputs; ++i) slots.push_back({id, SlotKind::Output, i});
        for (int i = 0; i < s.n_inputs; ++i) slots.push_back({id, SlotKind::Input, i});
    }
    return slots;
}

std::vector<SlotRef> slot_list_from_types(const std::vector<int>& type_ids, const OpLibrary& lib) {
    std::vector<SlotRef> slots;
    for (size_t i = 0; i < type_ids.size(); ++i) {
        const OpSchema& s = lib.schema(type_ids[i]);
        for (int k = 0; k < s.n_outputs; ++k) slots.push_back({int(i), SlotKind::Output, k});
        for (int k = 0; k < s.n_inputs; ++k) slots.push_back({int(i), SlotKind::Input, k});
    }
    return slots;
}

TokenizedGraph encode(const NodeGraph& g, const OpLibrary& lib, int bins) {
    return encode_with_order(g, lib, node_order_pi_r(g), bins);
}

TokenizedGraph encode_with_order(const NodeGraph& g, const OpLibrary& lib,
                                 const std::vector<int>& order, int bins) {
    if (int(g.nodes.size()) > kMaxNodes)
        throw Error("size-cap-exceeded", "graph has " + std::to_string(g.nodes.size()) + " nodes (cap " +
                                             std::to_string(kMaxNodes) + ")");
    if (int(g.edges.size()) > kMaxEdges)
        throw Error("size-cap-exceeded", "graph has " + std::to_string(g.edges.size()) + " edges (cap " +
                                             std::to_string(kMaxEdges) + ")");
    if (g.total_slots(lib) > kMaxSlots)
        throw Error("size-cap-exceeded", "graph has " + std::to_string(g.total_slots(lib)) +
                                             " slots (cap " + std::to_string(kMaxSlots) + ")");

    if (order.size() != g.nodes.size())
        throw Error("order-mismatch", "node order must list every node exactly once");

    TokenizedGraph t;
    t.slot_list = build_slot_list(order, g, lib);

    std::map<int, int> ordinal_of; // node_id -> position in order
    for (size_t i = 0; i < order.size(); ++i) ordinal_of[order[i]] = int(i);

    // S_n
    t.node_seq.push_back(tok::kStart);
    for (int id : order) t.node_seq.push_back(tok::kTypeOffset + g.find_node(id)->type_id);
    t.node_seq.push_back(tok::kEnd);

    // S_e: pairs sorted by destination slot position
    std::map<SlotRef, int> slot_pos;
    for (size_t i = 0; i < t.slot_list.size(); ++i) slot_pos[t.slot_list[i]] = int(i);
    std::vector<std::pair<int, int>> pairs;
    for (const Edge& e : g.edges) pairs.push_back({slot_pos.at(e.to), slot_pos.at(e.from)});
    std::sort(pairs.begin(), pairs.end());
    t.edge_seq.push_back(tok::kStart);
    for (const auto& [in_pos, out_pos] : pairs) {
        t.edge_seq.push_back(tok::kPtrOffset + out_pos);
        t.edge_seq.push_back(tok::kPtrOffset + in_pos);
    }
    t.edge_seq.push_back(tok::kEnd);

    // S_p: NODE_MARK then quantized scalars per node
    t.param_seq.push_back(tok::kStart);
    for (int id : order) {
        const Node* n = g.find_node(id);
        const OpSchema& s = lib.schema(n->type_id);
        t.param_seq.push_back(tok::kNodeMark);
        for (size_t pi = 0; pi < s.params.size(); ++pi)
            for (double v : n->params[pi].scalars)
                t.param_seq.push_back(tok::kBinOffset + quantize(v, s.params[pi], bins));
    }
    t.param_seq.push_back(tok::kEnd);

    // aux streams
    auto& a = t.aux;
    for (size_t i = 0; i < t.node_seq.size(); ++i) {
        a.node_pos.push_back(int(i));
        const bool interior = i > 0 && i + 1 < t.node_seq.size();
        a.node_ordinal.push_back(interior ? int(i) : 0); // ordinal+1 == i for interior tokens
    }
    for (size_t i = 0; i < t.edge_seq.size(); ++i) {
        a.edge_pos.push_back(int(i));
        const int token = t.edge_seq[i];
        if (token < tok::kPtrOffset) {
            a.edge_slot_kind.push_back(0);
            a.edge_owner_type.push_back(0);
            a.edge_owner_ordinal.push_back(0);
        } else {
            const SlotRef& ref = t.slot_list[size_t(token - tok::kPtrOffset)];
            a.edge_slot_kind.push_back(ref.kind == SlotKind::Output ? 1 : 2);
            a.edge_owner_type.push_back(1 + g.find_node(ref.node_id)->type_id);
            a.edge_owner_ordinal.push_back(1 + ordinal_of.at(ref.node_id));
        }
    }
    {
        size_t i = 0;
        auto push = [&](int ordinal, int pindex, int element, int kind) {
            a.param_pos.push_back(int(i++));
            a.param_ordinal.push_back(ordinal);
            a.param_index.push_back(pindex);
            a.param_element.push_back(element);
            a.param_kind.push_back(kind);
        };
        push(0, 0, 0, 0); // START
        for (size_t oi = 0; oi < order.size(); ++oi) {
            const OpSchema& s = lib.schema(g.find_node(order[oi])->type_id);
            push(int(oi) + 1, 0, 0, 0); // NODE_MARK
            for (size_t pi = 0; pi < s.params.size(); ++pi)
                for (int e = 0; e < s.params[pi].scalar_count(); ++e)
                    push(int(oi) + 1, int(pi) + 1, e + 1, 1 + int(s.params[pi].kind));
        }
        push(0, 0, 0, 0); // END
    }
    return t;
}

namespace {

[[noreturn]] void malformed(const char* stream, size_t offset, const std::string& what) {
    throw Error("malformed-sequence",
                std::string(stream) + "[" + std::to_string(offset) + "]: " + what);
}

} // namespace

NodeGraph decode(const TokenizedGraph& t, const OpLibrary& lib, int bins) {
    const auto& sn = t.node_seq;
    if (sn.size() < 2 || sn.front() != tok::kStart) malformed("node_seq", 0, "missing START");
    if (sn.back() != tok::kEnd) malformed("node_seq", sn.size() - 1, "missing END");

    NodeGraph g;
    for (size_t i = 1; i + 1 < sn.size(); ++i) {
        const int type_id = sn[i] - tok::kTypeOffset;
        if (type_id < 0 || type_id >= lib.size()) malformed("node_seq", i, "not a type token");
        Node n;
        n.id = int(i) - 1;
        n.type_id = type_id;
        const OpSchema& s = lib.schema(type_id);
        for (const ParamSchema& ps : s.params) {
            ParamValue v;
            v.scalars = ps.defaults;
            n.params.push_back(std::move(v));
        }
        if (s.is_output) {
            const int role = int(s.output_role);
            if (g.outputs[role] >= 0) malformed("node_seq", i, "duplicate output role");
            g.outputs[role] = n.id;
        }
        g.nodes.push_back(std::move(n));
    }

    std::vector<int> types;
    for (const Node& n : g.nodes) types.push_back(n.type_id);
    const std::vector<SlotRef> slots = slot_list_from_types(types, lib);

    const auto& se = t.edge_seq;
    if (se.size() < 2 || se.front() != tok::kStart) malformed("edge_seq", 0, "missing START");
    if (se.back() != tok::kEnd) malformed("edge_seq", se.size() - 1, "missing END");
    if ((se.size() - 2) % 2 != 0) malformed("edge_seq", se.size() - 1, "odd interior length");
    std::set<int> occupied_inputs;
    for (size_t i = 1; i + 1 < se.size(); i += 2) {
        const int out_ptr = se[i] - tok::kPtrOffset;
        const int in_ptr = se[i + 1] - tok::kPtrOffset;
        if (out_ptr < 0 || out_ptr >= int(slots.size()))
            throw Error("pointer-out-of-range", "edge_seq[" + std::to_string(i) + "]");
        if (in_ptr < 0 || in_ptr >= int(slots.size()))
            throw Error("pointer-out-of-range", "edge_seq[" + std::to_string(i + 1) + "]");
        const SlotRef& from = slots[size_t(out_ptr)];
        const SlotRef& to = slots[size_t(in_ptr)];
        if (from.kind != SlotKind::Output) malformed("edge_seq", i, "pointer is not an output slot");
        if (to.kind != SlotKind::Input) malformed("edge_seq", i + 1, "pointer is not an input slot");
        if (!occupied_inputs.insert(in_ptr).second)
            malformed("edge_seq", i + 1, "input slot already connected");
        g.edges.push_back({from, to});
    }

    const auto& sp = t.param_seq;
    if (sp.size() < 2 || sp.front() != tok::kStart) malformed("param_seq", 0, "missing START");
    if (sp.back() != tok::kEnd) malformed("param_seq", sp.size() - 1, "missing END");
    size_t i = 1;
    for (Node& n : g.nodes) {
        const OpSchema& s = lib.schema(n.type_id);
        if (i >= sp.size() - 1 || sp[i] != tok::kNodeMark) malformed("param_seq", i, "expected NODE_MARK");
        ++i;
        for (size_t pi = 0; pi < s.params.size(); ++pi) {
            const ParamSchema& ps = s.params[pi];
            for (int e = 0; e < ps.scalar_count(); ++e) {
                if (i >= sp.size() - 1) malformed("param_seq", i, "truncated parameter block");
                const int bin = sp[i] - tok::kBinOffset;
                if (bin < 0 || bin >= bins) malformed("param_seq", i, "not a bin token");
                try {
                    n.params[pi].scalars[size_t(e)] = dequantize(bin, ps, bins);
                } catch (const Error&) {
                    malformed("param_seq", i, "bin exceeds discrete cardinality");
                }
                ++i;
            }
        }
    }
    if (i != sp.size() - 1) malformed("param_seq", i, "trailing tokens");

    ValidationReport report = validate_graph(g, lib);
    if (!report.ok) {
        for (const Violation& v : report.violations)
            if (v.rule == "cycle") throw Error("cycle-introduced", v.message);
        throw Error("malformed-sequence", report.violations[0].rule + ": " + report.violations[0].message);
    }
    return g;
}

} // namespace matforge
