#include "matforge/graph_json.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

namespace matforge {

using nlohmann::json;

std::string graph_to_json(const NodeGraph& g, const OpLibrary& lib, int indent) {
    json root;
    root["format"] = "matforge-graph/1";

    json nodes = json::array();
    for (const Node& n : g.nodes) {
        const OpSchema& s = lib.schema(n.type_id);
        json jn;
        jn["id"] = n.id;
        jn["type"] = s.name;
        json params = json::array();
        for (size_t pi = 0; pi < s.params.size(); ++pi) {
            const ParamSchema& ps = s.params[pi];
            json jp;
            jp["name"] = ps.name;
            if (ps.kind == ParamKind::FloatVector)
                jp["value"] = n.params[pi].scalars;
            else if (ps.is_discrete())
                jp["value"] = n.params[pi].as_int();
            else
                jp["value"] = n.params[pi].as_scalar();
            params.push_back(jp);
        }
        jn["params"] = params;
        nodes.push_back(jn);
    }
    root["nodes"] = nodes;

    json edges = json::array();
    for (const Edge& e : g.edges) {
        json je;
        je["from"] = {e.from.node_id, e.from.index};
        je["to"] = {e.to.node_id, e.to.index};
        edges.push_back(je);
    }
    root["edges"] = edges;

    json outputs = json::object();
    for (int r = 0; r < kNumRoles; ++r)
        if (g.outputs[r] >= 0) outputs[role_name(MapRole(r))] = g.outputs[r];
    root["outputs"] = outputs;

    return root.dump(indent) + "\n";
}

namespace {

ParamValue parse_param_value(const json& jv, const ParamSchema& ps, const std::string& ctx) {
    ParamValue v;
    if (ps.kind == ParamKind::FloatVector) {
        if (!jv.is_array() || int(jv.size()) != ps.length)
            throw Error("schema-mismatch", ctx + ": expected array of length " + std::to_string(ps.length));
        for (const auto& x : jv) {
            if (!x.is_number()) throw Error("schema-mismatch", ctx + ": non-numeric vector element");
            v.scalars.push_back(x.get<double>());
        }
    } else {
        if (!jv.is_number()) throw Error("schema-mismatch", ctx + ": expected a number");
        v.scalars.push_back(jv.get<double>());
    }
    return v;
}

} // namespace

NodeGraph graph_from_json(const std::string& text, const OpLibrary& lib) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw Error("parse-error", std::string("graph JSON: ") + e.what());
    }
    if (!root.is_object() || root.value("format", std::string()) != "matforge-graph/1")
        throw Error("format-version", "expected format matforge-graph/1");

    NodeGraph g;
    std::map<long long, int> remap; // foreign id -> dense id, ascending order

    if (!root.contains("nodes") || !root["nodes"].is_array())
        throw Error("parse-error", "missing nodes array");
    for (const auto& jn : root["nodes"]) {
        if (!jn.contains("id") || !jn["id"].is_number_integer())
            throw Error("parse-error", "node missing integer id");
        long long fid = jn["id"].get<long long>();
        if (remap.count(fid)) throw Error("parse-error", "duplicate node id " + std::to_string(fid));
        remap[fid] = -1;
    }
    {
        int next = 0;
        for (auto& [fid, did] : remap) did = next++;
    }

    for (const auto& jn : root["nodes"]) {
        Node n;
        n.id = remap.at(jn["id"].get<long long>());
        std::string type = jn.value("type", std::string());
        const OpSchema& s = lib.by_name(type); // throws unknown-type
        n.type_id = s.type_id;

        std::map<std::string, json> by_name;
        if (jn.contains("params")) {
            if (!jn["params"].is_array()) throw Error("parse-error", type + ": params must be an array");
            for (const auto& jp : jn["params"]) {
                if (!jp.is_object() || !jp.contains("name") || !jp.contains("value"))
                    throw Error("parse-error", type + ": param entries need name and value");
                by_name[jp["name"].get<std::string>()] = jp["value"];
            }
        }
        for (const ParamSchema& ps : s.params) {
            auto it = by_name.find(ps.name);
            if (it == by_name.end()) {
                ParamValue v;
                v.scalars = ps.defaults;
                n.params.push_back(std::move(v));
            } else {
                n.params.push_back(parse_param_value(it->second, ps, type + "." + ps.name));
                by_name.erase(it);
            }
        }
        if (!by_name.empty())
            throw Error("schema-mismatch", type + ": unknown parameter " + by_name.begin()->first);
        g.nodes.push_back(std::move(n));
    }
    std::sort(g.nodes.begin(), g.nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });

    auto remap_id = [&](long long fid, const char* what) {
        auto it = remap.find(fid);
        if (it == remap.end())
            throw Error("parse-error", std::string(what) + " references unknown node " + std::to_string(fid));
        return it->second;
    };

    if (root.contains("edges")) {
        if (!root["edges"].is_array()) throw Error("parse-error", "edges must be an array");
        for (const auto& je : root["edges"]) {
            auto endpoint = [&](const char* key, SlotKind kind) {
                if (!je.contains(key) || !je[key].is_array() || je[key].size() != 2 ||
                    !je[key][0].is_number_integer() || !je[key][1].is_number_integer())
                    throw Error("parse-error", std::string("edge ") + key + " must be [node,slot]");
                SlotRef ref;
                ref.node_id = remap_id(je[key][0].get<long long>(), "edge");
                ref.kind = kind;
                ref.index = je[key][1].get<int>();
                return ref;
            };
            Edge e;
            e.from = endpoint("from", SlotKind::Output);
            e.to = endpoint("to", SlotKind::Input);
            g.edges.push_back(e);
        }
    }

    if (root.contains("outputs")) {
        if (!root["outputs"].is_object()) throw Error("parse-error", "outputs must be an object");
        for (auto it = root["outputs"].begin(); it != root["outputs"].end(); ++it) {
            int role = -1;
            for (int r = 0; r < kNumRoles; ++r)
                if (it.key() == role_name(MapRole(r))) role = r;
            if (role < 0) throw Error("parse-error", "unknown output role: " + it.key());
            if (!it.value().is_number_integer())
                throw Error("parse-error", "output id must be an integer");
            g.outputs[role] = remap_id(it.value().get<long long>(), "outputs");
        }
    }

    return g;
}

void save_graph(const std::string& path, const NodeGraph& g, const OpLibrary& lib) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io-failure", "cannot open for write: " + path);
    out << graph_to_json(g, lib);
    if (!out) throw Error("io-failure", "write failed: " + path);
}

NodeGraph load_graph(const std::string& path, const OpLibrary& lib) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io-failure", "cannot open for read: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return graph_from_json(text, lib);
}

} // namespace matforge
