#include "matforge/graph.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>

namespace matforge {

namespace {

std::map<int, size_t> index_by_id(const NodeGraph& g) {
    std::map<int, size_t> idx;
    for (size_t i = 0; i < g.nodes.size(); ++i) idx[g.nodes[i].id] = i;
    return idx;
}

} // namespace

ValidationReport validate_graph(const NodeGraph& g, const OpLibrary& lib) {
    ValidationReport report;
    auto idx = index_by_id(g);

    if (idx.size() != g.nodes.size()) report.add("duplicate-node-id", "node ids are not unique");

    // schema conformity
    for (const auto& n : g.nodes) {
        if (n.type_id < 0 || n.type_id >= lib.size()) {
            report.add("unknown-type", "node " + std::to_string(n.id) + " has unknown type " +
                                           std::to_string(n.type_id));
            continue;
        }
        const OpSchema& s = lib.schema(n.type_id);
        if (n.params.size() != s.params.size()) {
            report.add("schema-mismatch", "node " + std::to_string(n.id) + " (" + s.name + ") has " +
                                              std::to_string(n.params.size()) + " params, expected " +
                                              std::to_string(s.params.size()));
            continue;
        }
        for (size_t pi = 0; pi < s.params.size(); ++pi) {
            const ParamSchema& ps = s.params[pi];
            const ParamValue& pv = n.params[pi];
            if (int(pv.scalars.size()) != ps.scalar_count()) {
                report.add("schema-mismatch", "node " + std::to_string(n.id) + " param " + ps.name +
                                                  " has wrong arity");
                continue;
            }
            for (double v : pv.scalars) {
                if (!(v >= ps.lo && v <= ps.hi)) {
                    report.add("param-range", "node " + std::to_string(n.id) + " param " + ps.name +
                                                  " value " + std::to_string(v) + " outside [" +
                                                  std::to_string(ps.lo) + "," + std::to_string(ps.hi) + "]");
                    break;
                }
            }
        }
    }

    // edge endpoints, slot ranges, occupancy, self loops
    std::set<std::pair<int, int>> occupied; // (node, input slot)
    for (const auto& e : g.edges) {
        bool endpoints_ok = true;
        for (const SlotRef* s : {&e.from, &e.to}) {
            auto it = idx.find(s->node_id);
            if (it == idx.end()) {
                report.add("bad-edge-endpoint", "edge references missing node " + std::to_string(s->node_id));
                endpoints_ok = false;
                continue;
            }
            const Node& n = g.nodes[it->second];
            if (n.type_id < 0 || n.type_id >= lib.size()) {
                endpoints_ok = false;
                continue;
            }
            const OpSchema& sc = lib.schema(n.type_id);
            const int limit = s->kind == SlotKind::Input ? sc.n_inputs : sc.n_outputs;
            if (s->index < 0 || s->index >= limit) {
                report.add("bad-slot-index", "edge references slot " + std::to_string(s->index) +
                                                 " of node " + std::to_string(s->node_id));
                endpoints_ok = false;
            }
        }
        if (e.from.kind != SlotKind::Output || e.to.kind != SlotKind::Input)
            report.add("bad-slot-kind", "edge must connect an output slot to an input slot");
        if (e.from.node_id == e.to.node_id)
            report.add("self-loop", "edge connects node " + std::to_string(e.from.node_id) + " to itself");
        if (endpoints_ok && e.to.kind == SlotKind::Input) {
            auto key = std::make_pair(e.to.node_id, e.to.index);
            if (!occupied.insert(key).second)
                report.add("multi-input-slot", "input slot " + std::to_string(e.to.index) + " of node " +
                                                   std::to_string(e.to.node_id) + " has multiple sources");
        }
    }

    // cycle check via Kahn over valid edges
    {
        std::map<int, int> indeg;
        std::map<int, std::vector<int>> adj;
        for (const auto& n : g.nodes) indeg[n.id] = 0;
        for (const auto& e : g.edges) {
            if (!idx.count(e.from.node_id) || !idx.count(e.to.node_id)) continue;
            if (e.from.node_id == e.to.node_id) continue;
            adj[e.from.node_id].push_back(e.to.node_id);
            indeg[e.to.node_id]++;
        }
        std::queue<int> ready;
        for (auto& [id, d] : indeg)
            if (d == 0) ready.push(id);
        size_t seen = 0;
        while (!ready.empty()) {
            int id = ready.front();
            ready.pop();
            ++seen;
            for (int to : adj[id])
                if (--indeg[to] == 0) ready.push(to);
        }
        if (seen != g.nodes.size()) report.add("cycle", "graph contains a directed cycle");
    }

    // output role registration: at most one output node per role, map consistent
    int role_counts[kNumRoles] = {0, 0, 0, 0};
    for (const auto& n : g.nodes) {
        if (n.type_id < 0 || n.type_id >= lib.size()) continue;
        const OpSchema& s = lib.schema(n.type_id);
        if (!s.is_output) continue;
        const int r = int(s.output_role);
        if (++role_counts[r] > 1)
            report.add("output-role-dup", std::string("more than one output node for role ") + role_name(s.output_role));
        if (g.outputs[r] != n.id)
            report.add("output-role-mismatch", std::string("outputs map does not register node ") +
                                                   std::to_string(n.id) + " for role " + role_name(s.output_role));
    }
    for (int r = 0; r < kNumRoles; ++r) {
        if (g.outputs[r] < 0) continue;
        auto it = idx.find(g.outputs[r]);
        const bool valid = it != idx.end() && g.nodes[it->second].type_id >= 0 &&
                           g.nodes[it->second].type_id < lib.size() &&
                           lib.schema(g.nodes[it->second].type_id).is_output &&
                           int(lib.schema(g.nodes[it->second].type_id).output_role) == r;
        if (!valid)
            report.add("output-role-mismatch", std::string("outputs map entry for ") + role_name(MapRole(r)) +
                                                   " does not reference an output node of that role");
    }

    return report;
}

std::vector<int> topological_order(const NodeGraph& g) {
    std::map<int, int> indeg;
    std::map<int, std::vector<int>> adj;
    for (const auto& n : g.nodes) indeg[n.id] = 0;
    for (const auto& e : g.edges) {
        adj[e.from.node_id].push_back(e.to.node_id);
        indeg[e.to.node_id]++;
    }
    // min-heap on node id gives the deterministic tie rule
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (auto& [id, d] : indeg)
        if (d == 0) ready.push(id);
    std::vector<int> order;
    order.reserve(g.nodes.size());
    while (!ready.empty()) {
        const int id = ready.top();
        ready.pop();
        order.push_back(id);
        for (int to : adj[id])
            if (--indeg[to] == 0) ready.push(to);
    }
    if (order.size() != g.nodes.size()) throw Error("cycle-detected", "graph contains a directed cycle");
    return order;
}

std::vector<int> reachable_to_outputs(const NodeGraph& g) {
    // walk edges backwards from the registered output nodes
    std::map<int, std::vector<int>> rev; // dst node -> src nodes
    for (const auto& e : g.edges) rev[e.to.node_id].push_back(e.from.node_id);
    std::set<int> seen;
    std::vector<int> stack;
    for (int r = 0; r < kNumRoles; ++r)
        if (g.outputs[r] >= 0 && seen.insert(g.outputs[r]).second) stack.push_back(g.outputs[r]);
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        auto it = rev.find(id);
        if (it == rev.end()) continue;
        for (int src : it->second)
            if (seen.insert(src).second) stack.push_back(src);
    }
    return {seen.begin(), seen.end()}; // std::set iterates ascending
}

NodeGraph renumber_dense(const NodeGraph& g) {
    std::map<int, int> remap;
    NodeGraph out;
    out.nodes.reserve(g.nodes.size());
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        Node n = g.nodes[i];
        remap[n.id] = int(i);
        n.id = int(i);
        out.nodes.push_back(std::move(n));
    }
    out.edges.reserve(g.edges.size());
    for (Edge e : g.edges) {
        e.from.node_id = remap.at(e.from.node_id);
        e.to.node_id = remap.at(e.to.node_id);
        out.edges.push_back(e);
    }
    for (int r = 0; r < kNumRoles; ++r)
        out.outputs[r] = g.outputs[r] >= 0 ? remap.at(g.outputs[r]) : -1;
    return out;
}

NodeGraph remove_unconnected_nodes(const NodeGraph& g) {
    const auto keep_list = reachable_to_outputs(g);
    const std::set<int> keep(keep_list.begin(), keep_list.end());
    NodeGraph out;
    for (const auto& n : g.nodes)
        if (keep.count(n.id)) out.nodes.push_back(n);
    for (const auto& e : g.edges)
        if (keep.count(e.from.node_id) && keep.count(e.to.node_id)) out.edges.push_back(e);
    for (int r = 0; r < kNumRoles; ++r) out.outputs[r] = g.outputs[r];
    return renumber_dense(out);
}

} // namespace matforge
