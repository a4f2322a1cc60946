#pragma once

#include <vector>

#include "matforge/graph.hpp"

namespace matforge {

/// Serialization caps (graphs above these are filtered out of the corpus).
constexpr int kMaxNodes = 80;
constexpr int kMaxEdges = 200;
constexpr int kMaxSlots = 210;

/// Token id layout, shared by every stream.
namespace tok {
constexpr int kStart = 0;
constexpr int kEnd = 1;
constexpr int kTypeOffset = 2; // node_seq: type id t  -> 2 + t
constexpr int kPtrOffset = 2;  // edge_seq: slot index -> 2 + index
constexpr int kNodeMark = 2;   // param_seq marker opening each node's block
constexpr int kBinOffset = 3;  // param_seq: bin b     -> 3 + b
constexpr int kBins = 128;
} // namespace tok

/// Auxiliary integer sequences, one entry per token of the owning stream.
/// Ordinals/indices are stored +1 with 0 meaning "not applicable".
struct AuxSequences {
    std::vector<int> node_pos, node_ordinal;
    std::vector<int> edge_pos, edge_slot_kind, edge_owner_type, edge_owner_ordinal;
    std::vector<int> param_pos, param_ordinal, param_index, param_element, param_kind;
};

/// The three linearized streams plus the slot list S_e pointers address.
struct TokenizedGraph {
    std::vector<int> node_seq;  // [START, type..., END]
    std::vector<int> edge_seq;  // [START, (out-ptr, in-ptr)..., END]
    std::vector<int> param_seq; // [START, (NODE_MARK, bin...)..., END]
    std::vector<SlotRef> slot_list;
    AuxSequences aux;
};

/// Map a scalar onto [0, bins-1]. Floats bin linearly with round-half-away-
/// from-zero; Integer/Enumeration kinds map index-linearly (exact).
int quantize(double v, const ParamSchema& schema, int bins = tok::kBins);

/// Inverse of quantize up to half a bin for floats, exact for discrete kinds.
double dequantize(int bin, const ParamSchema& schema, int bins = tok::kBins);

/// Back-to-front BFS from the output nodes (role order), following edges
/// destination->source. Within a frontier, nodes sort by (discovering-input-
/// slot index, node_id); nodes unreachable from outputs append by ascending id.
std::vector<int> node_order_pi_r(const NodeGraph& g);

/// Output slots then input slots, per node in the given order.
std::vector<SlotRef> build_slot_list(const std::vector<int>& order, const NodeGraph& g,
                                     const OpLibrary& lib);

/// Slot list for a decoded type sequence where node ids are 0..n-1 in order.
std::vector<SlotRef> slot_list_from_types(const std::vector<int>& type_ids, const OpLibrary& lib);

/// Round every scalar parameter to its bin center, so the graph renders
/// exactly what its token encoding describes.
NodeGraph snap_to_bins(const NodeGraph& g, const OpLibrary& lib, int bins = tok::kBins);

TokenizedGraph encode(const NodeGraph& g, const OpLibrary& lib, int bins = tok::kBins);

/// Encode with an explicit node order (every node id exactly once). The
/// autocompletion path passes reversed pi_r so a partial graph becomes a
/// stream prefix that continuation tokens can extend.
TokenizedGraph encode_with_order(const NodeGraph& g, const OpLibrary& lib,
                                 const std::vector<int>& order, int bins = tok::kBins);

/// Rebuild a graph (node ids = position in S_n) and validate it.
NodeGraph decode(const TokenizedGraph& t, const OpLibrary& lib, int bins = tok::kBins);

} // namespace matforge
