#pragma once

#include "matforge/model.hpp"

namespace matforge {

struct SamplerConfig {
    double top_p = 0.9;
    double temperature = 1.0;
    int max_candidates = 30; // candidates drawn per prompt by the callers
    uint64_t seed = 0;
};

/// Keep the smallest probability-descending prefix whose cumulative mass
/// reaches top_p (ties broken by token id), zero the rest, renormalize.
/// top_p = 1 returns the distribution unchanged.
std::vector<double> nucleus_filter(const std::vector<double>& dist, double top_p);

/// Structural state of an in-progress decode; everything the validity masks
/// need. Node ordinals equal positions in `types` (= final decoded node ids).
struct DecodeState {
    std::vector<int> node_seq{tok::kStart};  // S_n so far, no END
    std::vector<int> edge_seq{tok::kStart};  // S_e so far, no END
    std::vector<int> param_seq{tok::kStart}; // S_p so far, no END

    std::vector<int> types; // decoded S_n interior
    int slot_count = 0;     // total slots implied by `types`

    // edge phase, populated by begin_edges()
    std::vector<SlotRef> slots;             // node_id field holds the ordinal
    std::vector<char> input_taken;          // one flag per slot-list position
    std::vector<std::pair<int, int>> edges; // source ordinal -> dest ordinal
    int pending_out = -1;                   // source pointer awaiting its input

    void push_type(int type_id, const OpLibrary& lib);
    void begin_edges(const OpLibrary& lib);
    /// Append one pointer token. Even tokens stage the source slot; odd
    /// tokens commit the (source, dest) edge and occupy the input.
    void push_pointer(int slot_index);
};

/// Admissible next tokens of the node stream (START, END, one per type).
/// Reserves node/slot budget so an output role and a zero-input generator can
/// always still be placed, which keeps the edge phase completable.
std::vector<char> valid_node_mask(const DecodeState& state, const OpLibrary& lib);

/// Admissible slot-list positions plus a trailing END entry for the edge
/// stream. Parity comes from state.pending_out: unset picks a source slot or
/// END, set picks a destination input. Inputs must be unoccupied, acyclic,
/// non-self, and leave enough edge budget to finish every reachable input.
std::vector<char> valid_slot_mask(const DecodeState& state, const OpLibrary& lib);

/// Sample one graph: S_n, then S_e, then S_p, masking logits to validity
/// before nucleus filtering at every step, then decode and drop unconnected
/// nodes. With `partial`, its reversed-pi_r encoding is the fixed prefix and
/// only continuation tokens are sampled; a self-contained partial (at least
/// one output role, every reachable input connected) returns unchanged.
NodeGraph sample_graph(ModelStack& stack, const std::vector<float>& cond,
                       const SamplerConfig& cfg, const OpLibrary& lib,
                       const NodeGraph* partial = nullptr);

} // namespace matforge
