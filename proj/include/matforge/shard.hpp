#pragma once

#include <string>
#include <vector>

#include "matforge/tokenizer.hpp"

namespace matforge {

/// One training sample: tokenized graph variant plus its conditioning vector
/// and render path. Stored as newline-delimited JSON, one object per line.
struct ShardRecord {
    std::string graph_id;
    int variant_id = 0;
    std::vector<int> node_seq, edge_seq, param_seq;
    AuxSequences aux;
    std::vector<float> cond;
    std::string render;
};

std::string shard_record_to_json(const ShardRecord& r);
ShardRecord shard_record_from_json(const std::string& line);

void write_shard(const std::string& path, const std::vector<ShardRecord>& records);
std::vector<ShardRecord> read_shard(const std::string& path);

} // namespace matforge
