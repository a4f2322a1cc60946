#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matforge/schema.hpp"

namespace matforge {

/// One parameter value; discrete kinds store the integral value in scalars[0].
struct ParamValue {
    std::vector<double> scalars;

    static ParamValue scalar(double v) { return ParamValue{{v}}; }
    static ParamValue vec(std::vector<double> v) { return ParamValue{std::move(v)}; }
    double as_scalar() const { return scalars.at(0); }
    int as_int() const { return int(std::lround(scalars.at(0))); }
};

struct Node {
    int id = -1;
    int type_id = -1;
    std::vector<ParamValue> params;
};

enum class SlotKind { Input, Output };

struct SlotRef {
    int node_id = -1;
    SlotKind kind = SlotKind::Input;
    int index = 0;

    bool operator==(const SlotRef&) const = default;
    auto operator<=>(const SlotRef&) const = default;
};

struct Edge {
    SlotRef from; // output slot
    SlotRef to;   // input slot

    bool operator==(const Edge&) const = default;
};

/// Directed acyclic multigraph of typed nodes. Immutable by convention: all
/// structural transforms return new values. node ids are dense 0..|N|-1 and
/// reassigned after structural edits.
struct NodeGraph {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    int outputs[kNumRoles] = {-1, -1, -1, -1}; // role -> node id, -1 if absent

    const Node* find_node(int id) const {
        for (const auto& n : nodes)
            if (n.id == id) return &n;
        return nullptr;
    }
    bool has_output(MapRole r) const { return outputs[int(r)] >= 0; }
    size_t total_slots(const OpLibrary& lib) const {
        size_t n = 0;
        for (const auto& node : nodes) n += size_t(lib.schema(node.type_id).total_slots());
        return n;
    }
};

struct Violation {
    std::string rule;    // stable rule id, e.g. "cycle", "multi-input-slot"
    std::string message; // human-readable
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;

    void add(std::string rule, std::string message) {
        ok = false;
        violations.push_back({std::move(rule), std::move(message)});
    }
};

/// Checks acyclicity, slot occupancy, endpoint/slot validity, one output node
/// per role, and schema conformity of every node. Pure; never throws.
ValidationReport validate_graph(const NodeGraph& g, const OpLibrary& lib);

/// Every edge's source node precedes its destination; ties broken by
/// ascending node_id. Throws "cycle-detected" on cyclic input.
std::vector<int> topological_order(const NodeGraph& g);

/// Nodes with a directed path to any registered output node, including the
/// output nodes themselves.
std::vector<int> reachable_to_outputs(const NodeGraph& g);

/// Copy of g restricted to reachable_to_outputs(g); ids reassigned densely in
/// ascending former-id order. Output nodes are never removed.
NodeGraph remove_unconnected_nodes(const NodeGraph& g);

/// Rebuilds dense ids 0..|N|-1 preserving node order; edge endpoints and the
/// outputs map are remapped. Used after structural edits.
NodeGraph renumber_dense(const NodeGraph& g);

} // namespace matforge
