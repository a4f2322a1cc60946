#pragma once

#include <string>

#include "matforge/graph.hpp"

namespace matforge {

/// Serialize to the versioned "matforge-graph/1" JSON format. Deterministic bytes:
/// object keys sorted, parameters at full precision in schema order.
std::string graph_to_json(const NodeGraph& g, const OpLibrary& lib, int indent = 2);

/// Parse "matforge-graph/1" JSON. Foreign node ids are remapped to dense
/// 0..|N|-1 preserving ascending-id order. Throws Error("parse-error" |
/// "format-version" | "unknown-type" | "schema-mismatch") on bad input.
NodeGraph graph_from_json(const std::string& text, const OpLibrary& lib);

void save_graph(const std::string& path, const NodeGraph& g, const OpLibrary& lib);
NodeGraph load_graph(const std::string& path, const OpLibrary& lib);

} // namespace matforge
