#include "matforge/shard.hpp"

#include <fstream>

#include <json.hpp>

namespace matforge {

using nlohmann::json;

std::string shard_record_to_json(const ShardRecord& r) {
    json j;
    j["graph_id"] = r.graph_id;
    j["variant_id"] = r.variant_id;
    j["node_seq"] = r.node_seq;
    j["edge_seq"] = r.edge_seq;
    j["param_seq"] = r.param_seq;
    json aux;
    aux["node_pos"] = r.aux.node_pos;
    aux["node_ordinal"] = r.aux.node_ordinal;
    aux["edge_pos"] = r.aux.edge_pos;
    aux["edge_slot_kind"] = r.aux.edge_slot_kind;
    aux["edge_owner_type"] = r.aux.edge_owner_type;
    aux["edge_owner_ordinal"] = r.aux.edge_owner_ordinal;
    aux["param_pos"] = r.aux.param_pos;
    aux["param_ordinal"] = r.aux.param_ordinal;
    aux["param_index"] = r.aux.param_index;
    aux["param_element"] = r.aux.param_element;
    aux["param_kind"] = r.aux.param_kind;
    j["aux"] = aux;
    j["cond"] = r.cond;
    j["render"] = r.render;
    return j.dump();
}

ShardRecord shard_record_from_json(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error("parse-error", std::string("shard record: ") + e.what());
    }
    ShardRecord r;
    try {
        r.graph_id = j.at("graph_id").get<std::string>();
        r.variant_id = j.at("variant_id").get<int>();
        r.node_seq = j.at("node_seq").get<std::vector<int>>();
        r.edge_seq = j.at("edge_seq").get<std::vector<int>>();
        r.param_seq = j.at("param_seq").get<std::vector<int>>();
        const json& aux = j.at("aux");
        r.aux.node_pos = aux.at("node_pos").get<std::vector<int>>();
        r.aux.node_ordinal = aux.at("node_ordinal").get<std::vector<int>>();
        r.aux.edge_pos = aux.at("edge_pos").get<std::vector<int>>();
        r.aux.edge_slot_kind = aux.at("edge_slot_kind").get<std::vector<int>>();
        r.aux.edge_owner_type = aux.at("edge_owner_type").get<std::vector<int>>();
        r.aux.edge_owner_ordinal = aux.at("edge_owner_ordinal").get<std::vector<int>>();
        r.aux.param_pos = aux.at("param_pos").get<std::vector<int>>();
        r.aux.param_ordinal = aux.at("param_ordinal").get<std::vector<int>>();
        r.aux.param_index = aux.at("param_index").get<std::vector<int>>();
        r.aux.param_element = aux.at("param_element").get<std::vector<int>>();
        r.aux.param_kind = aux.at("param_kind").get<std::vector<int>>();
        r.cond = j.at("cond").get<std::vector<float>>();
        r.render = j.at("render").get<std::string>();
    } catch (const json::exception& e) {
        throw Error("parse-error", std::string("shard record fields: ") + e.what());
    }
    return r;
}

void write_shard(const std::string& path, const std::vector<ShardRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io-failure", "cannot open for write: " + path);
    for (const ShardRecord& r : records) out << shard_record_to_json(r) << "\n";
    if (!out) throw Error("io-failure", "write failed: " + path);
}

std::vector<ShardRecord> read_shard(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io-failure", "cannot open for read: " + path);
    std::vector<ShardRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(shard_record_from_json(line));
    }
    return records;
}

} // namespace matforge
