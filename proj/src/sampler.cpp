#include "matforge/sampler.hpp"

#include <algorithm>
#include <bitset>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace matforge {

std::vector<double> nucleus_filter(const std::vector<double>& dist, double top_p) {
    if (top_p <= 0.0 || top_p > 1.0) throw Error("config-invalid", "top_p must be in (0, 1]");
    if (top_p >= 1.0) return dist;

    std::vector<int> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (dist[size_t(a)] != dist[size_t(b)]) return dist[size_t(a)] > dist[size_t(b)];
        return a < b;
    });

    std::vector<double> kept(dist.size(), 0.0);
    double cum = 0.0;
    for (int id : order) {
        kept[size_t(id)] = dist[size_t(id)];
        cum += dist[size_t(id)];
        if (cum >= top_p) break;
    }
    for (double& p : kept) p /= cum;
    return kept;
}

// ---- decode state -----------------------------------------------------------------

void DecodeState::push_type(int type_id, const OpLibrary& lib) {
    const OpSchema& s = lib.schema(type_id);
    types.push_back(type_id);
    slot_count += s.n_inputs + s.n_outputs;
    node_seq.push_back(tok::kTypeOffset + type_id);
}

void DecodeState::begin_edges(const OpLibrary& lib) {
    slots = slot_list_from_types(types, lib);
    input_taken.assign(slots.size(), 0);
    edges.clear();
    pending_out = -1;
}

void DecodeState::push_pointer(int slot_index) {
    edge_seq.push_back(tok::kPtrOffset + slot_index);
    if (pending_out < 0) {
        pending_out = slot_index;
        return;
    }
    edges.push_back({slots[size_t(pending_out)].node_id, slots[size_t(slot_index)].node_id});
    input_taken[size_t(slot_index)] = 1;
    pending_out = -1;
}

// ---- node mask --------------------------------------------------------------------

namespace {

struct TypeCensus {
    bool have_output = false;    // some output-role node present
    bool have_generator = false; // some zero-input producer present
    std::bitset<kNumRoles> roles;
    int min_output_slots = 0;    // cheapest output type, in slots
    int min_generator_slots = 0; // cheapest generator type, in slots
};

TypeCensus census(const std::vector<int>& types, const OpLibrary& lib) {
    TypeCensus c;
    c.min_output_slots = std::numeric_limits<int>::max();
    c.min_generator_slots = std::numeric_limits<int>::max();
    for (int t = 0; t < lib.size(); ++t) {
        const OpSchema& s = lib.schema(t);
        const int ns = s.n_inputs + s.n_outputs;
        if (s.is_output) c.min_output_slots = std::min(c.min_output_slots, ns);
        if (s.n_inputs == 0 && s.n_outputs > 0)
            c.min_generator_slots = std::min(c.min_generator_slots, ns);
    }
    for (int t : types) {
        const OpSchema& s = lib.schema(t);
        if (s.is_output) {
            c.have_output = true;
            c.roles.set(size_t(s.output_role));
        }
        if (s.n_inputs == 0 && s.n_outputs > 0) c.have_generator = true;
    }
    return c;
}

} // namespace

std::vector<char> valid_node_mask(const DecodeState& state, const OpLibrary& lib) {
    std::vector<char> mask(size_t(tok::kTypeOffset + lib.size()), 0);
    const TypeCensus c = census(state.types, lib);
    const int n = int(state.types.size());

    for (int t = 0; t < lib.size(); ++t) {
        const OpSchema& s = lib.schema(t);
        const bool t_output = s.is_output;
        const bool t_generator = s.n_inputs == 0 && s.n_outputs > 0;
        if (t_output && c.roles.test(size_t(s.output_role))) continue; // one per role

        // reserve room for whichever of {output, generator} is still missing
        const int reserve_nodes =
            int(!(c.have_output || t_output)) + int(!(c.have_generator || t_generator));
        const int reserve_slots = (c.have_output || t_output ? 0 : c.min_output_slots) +
                                  (c.have_generator || t_generator ? 0 : c.min_generator_slots);
        const int ns = s.n_inputs + s.n_outputs;
        if (n + 1 + reserve_nodes > kMaxNodes) continue;
        if (state.slot_count + ns + reserve_slots > kMaxSlots) continue;
        mask[size_t(tok::kTypeOffset + t)] = 1;
    }
    // the edge phase can only finish if a generator exists to feed every input
    mask[tok::kEnd] = c.have_output && c.have_generator;
    return mask;
}

// ---- edge mask --------------------------------------------------------------------

namespace {

using NodeSet = std::bitset<kMaxNodes>;

/// Everything valid_slot_mask needs, computed once per call.
struct EdgeView {
    std::vector<NodeSet> reach;   // reach[v] = nodes reachable from v (incl. v)
    NodeSet output_reaching;      // nodes with a path to an output node
    std::vector<int> unfilled;    // open input slots per node
    std::vector<long long> cone_cost; // unfilled inputs newly exposed by reaching v
    long long deficit = 0;        // open inputs on output-reaching nodes
};

EdgeView edge_view(const DecodeState& st, const OpLibrary& lib) {
    const int n = int(st.types.size());
    EdgeView v;
    v.reach.assign(size_t(n), {});
    std::vector<std::vector<int>> out(static_cast<size_t>(n));
    for (const auto& [a, b] : st.edges) out[size_t(a)].push_back(b);

    // reverse topological accumulation is overkill at this scale; iterate to fixpoint
    for (int i = 0; i < n; ++i) v.reach[size_t(i)].set(size_t(i));
    bool changed = true;
    while (changed) {
        changed = false;
        for (int a = 0; a < n; ++a)
            for (int b : out[size_t(a)]) {
                const NodeSet merged = v.reach[size_t(a)] | v.reach[size_t(b)];
                if (merged != v.reach[size_t(a)]) {
                    v.reach[size_t(a)] = merged;
                    changed = true;
                }
            }
    }

    NodeSet outputs;
    for (int i = 0; i < n; ++i)
        if (lib.schema(st.types[size_t(i)]).is_output) outputs.set(size_t(i));
    for (int i = 0; i < n; ++i)
        if ((v.reach[size_t(i)] & outputs).any()) v.output_reaching.set(size_t(i));

    v.unfilled.assign(size_t(n), 0);
    for (size_t s = 0; s < st.slots.size(); ++s)
        if (st.slots[s].kind == SlotKind::Input && !st.input_taken[s])
            ++v.unfilled[size_t(st.slots[s].node_id)];
    for (int i = 0; i < n; ++i)
        if (v.output_reaching.test(size_t(i))) v.deficit += v.unfilled[size_t(i)];

    // cost of making node a reachable: open inputs of a's fan-in cone minus
    // nodes that already reach an output
    v.cone_cost.assign(size_t(n), 0);
    for (int a = 0; a < n; ++a) {
        for (int y = 0; y < n; ++y)
            if (v.reach[size_t(y)].test(size_t(a)) && !v.output_reaching.test(size_t(y)))
                v.cone_cost[size_t(a)] += v.unfilled[size_t(y)];
    }
    return v;
}

/// Drawing source-slot u -> input-slot i: occupancy, self-loop, cycle, and
/// enough remaining edge budget to still fill every reachable open input.
bool pair_ok(const DecodeState& st, const EdgeView& v, int u, int i) {
    if (st.input_taken[size_t(i)]) return false;
    const int a = st.slots[size_t(u)].node_id;
    const int b = st.slots[size_t(i)].node_id;
    if (a == b) return false;
    if (v.reach[size_t(b)].test(size_t(a))) return false; // b already reaches a

    long long deficit_after = v.deficit;
    if (v.output_reaching.test(size_t(b)))
        deficit_after += v.cone_cost[size_t(a)] - 1; // a's cone joins; one input closes
    return (long long)(st.edges.size()) + 1 + deficit_after <= kMaxEdges;
}

} // namespace

std::vector<char> valid_slot_mask(const DecodeState& state, const OpLibrary& lib) {
    const size_t S = state.slots.size();
    std::vector<char> mask(S + 1, 0); // trailing entry = END
    const EdgeView v = edge_view(state, lib);

    if (state.pending_out >= 0) {
        for (size_t i = 0; i < S; ++i)
            if (state.slots[i].kind == SlotKind::Input &&
                pair_ok(state, v, state.pending_out, int(i)))
                mask[i] = 1;
        return mask; // END never admissible mid-pair
    }

    for (size_t u = 0; u < S; ++u) {
        if (state.slots[u].kind != SlotKind::Output) continue;
        for (size_t i = 0; i < S; ++i)
            if (state.slots[i].kind == SlotKind::Input && pair_ok(state, v, int(u), int(i))) {
                mask[u] = 1;
                break;
            }
    }
    mask[S] = v.deficit == 0;
    return mask;
}

// ---- sampling ---------------------------------------------------------------------

namespace {

[[noreturn]] void decode_stall(const char* phase, const DecodeState& st) {
    throw Error("decode-stall",
                std::string("no admissible token in ") + phase + " phase (nodes " +
                    std::to_string(st.types.size()) + ", edges " + std::to_string(st.edges.size()) +
                    ", S_n " + std::to_string(st.node_seq.size()) + ", S_e " +
                    std::to_string(st.edge_seq.size()) + ", S_p " +
                    std::to_string(st.param_seq.size()) + ", pending_out " +
                    std::to_string(st.pending_out) + "); masks should make this impossible");
}

/// Temperature-scaled softmax restricted to the mask, nucleus filter, sample.
int sample_token(const Mat& logits, const std::vector<char>& mask, double temperature,
                 double top_p, Rng& rng, const char* phase, const DecodeState& st) {
    const int row = int(logits.rows()) - 1;
    const int V = int(logits.cols());
    if (int(mask.size()) != V)
        throw Error("alignment-mismatch", std::string(phase) + ": mask width " +
                                              std::to_string(mask.size()) + " vs vocab " +
                                              std::to_string(V));
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < V; ++j)
        if (mask[size_t(j)]) best = std::max(best, logits(row, j) / temperature);
    if (best == -std::numeric_limits<double>::infinity()) decode_stall(phase, st);

    std::vector<double> probs(size_t(V), 0.0);
    double z = 0.0;
    for (int j = 0; j < V; ++j)
        if (mask[size_t(j)]) {
            probs[size_t(j)] = std::exp(logits(row, j) / temperature - best);
            z += probs[size_t(j)];
        }
    for (double& p : probs) p /= z;
    probs = nucleus_filter(probs, top_p);

    const double r = rng.uniform();
    double cum = 0.0;
    int last = -1;
    for (int j = 0; j < V; ++j)
        if (probs[size_t(j)] > 0.0) {
            last = j;
            cum += probs[size_t(j)];
            if (r < cum) return j;
        }
    return last; // floating-point tail: fall back to the final kept token
}

/// True when nothing mandatory is left: some output role present and every
/// input of every node on a path to an output is connected.
bool is_complete(const NodeGraph& g, const OpLibrary& lib) {
    bool any_role = false;
    for (int r = 0; r < kNumRoles; ++r) any_role |= g.outputs[r] >= 0;
    if (!any_role) return false;

    std::map<std::pair<int, int>, bool> connected;
    for (const Edge& e : g.edges) connected[{e.to.node_id, e.to.index}] = true;
    for (int id : reachable_to_outputs(g)) {
        const OpSchema& s = lib.schema(g.find_node(id)->type_id);
        for (int k = 0; k < s.n_inputs; ++k)
            if (!connected.count({id, k})) return false;
    }
    return true;
}

} // namespace

NodeGraph sample_graph(ModelStack& stack, const std::vector<float>& cond,
                       const SamplerConfig& cfg, const OpLibrary& lib,
                       const NodeGraph* partial) {
    if (cfg.top_p <= 0.0 || cfg.top_p > 1.0)
        throw Error("config-invalid", "top_p must be in (0, 1]");
    if (cfg.temperature <= 0.0) throw Error("config-invalid", "temperature must be positive");

    Rng rng(cfg.seed);
    DecodeState st;
    ParamModel::ParamAux aux;
    aux.ordinal = {0};
    aux.index = {0};
    aux.element = {0};
    aux.kind = {0};
    size_t param_from_ordinal = 0;

    if (partial) {
        const ValidationReport rep = validate_graph(*partial, lib);
        if (!rep.ok)
            throw Error(rep.violations[0].rule, "partial graph: " + rep.violations[0].message);
        if (is_complete(*partial, lib)) return *partial;

        std::vector<int> order = node_order_pi_r(*partial);
        std::reverse(order.begin(), order.end());
        const TokenizedGraph enc = encode_with_order(*partial, lib, order, stack.cfg.bins);

        st.node_seq.clear();
        st.node_seq.push_back(tok::kStart);
        for (size_t i = 1; i + 1 < enc.node_seq.size(); ++i)
            st.push_type(enc.node_seq[i] - tok::kTypeOffset, lib);

        st.param_seq.assign(enc.param_seq.begin(), enc.param_seq.end() - 1);
        const size_t L = st.param_seq.size();
        aux.ordinal.assign(enc.aux.param_ordinal.begin(), enc.aux.param_ordinal.begin() + L);
        aux.index.assign(enc.aux.param_index.begin(), enc.aux.param_index.begin() + L);
        aux.element.assign(enc.aux.param_element.begin(), enc.aux.param_element.begin() + L);
        aux.kind.assign(enc.aux.param_kind.begin(), enc.aux.param_kind.begin() + L);
        param_from_ordinal = partial->nodes.size();

        // the edge prefix replays through push_pointer once slots exist
        st.begin_edges(lib);
        for (size_t i = 1; i + 1 < enc.edge_seq.size(); ++i)
            st.push_pointer(enc.edge_seq[i] - tok::kPtrOffset);
    }

    // ---- node phase
    while (true) {
        const std::vector<char> mask = valid_node_mask(st, lib);
        Tape t(false);
        const int logits = stack.node.forward(t, st.node_seq, cond);
        const int token = sample_token(t.value(logits), mask, cfg.temperature, cfg.top_p, rng,
                                       "node", st);
        if (token == tok::kEnd) break;
        st.push_type(token - tok::kTypeOffset, lib);
    }

    // ---- edge phase (keep the replayed prefix state, just rebuild the slot list)
    {
        const auto kept_edges = st.edges;
        const auto kept_taken = st.input_taken;
        st.begin_edges(lib);
        st.edges = kept_edges;
        for (size_t i = 0; i < kept_taken.size() && i < st.input_taken.size(); ++i)
            st.input_taken[i] = kept_taken[i];
    }
    // a partial might already strain the budget; surface that before sampling
    {
        const std::vector<char> probe = valid_slot_mask(st, lib);
        if (std::find(probe.begin(), probe.end(), char(1)) == probe.end())
            throw Error("size-cap-exceeded",
                        "partial graph cannot be completed within the edge cap");
    }
    while (true) {
        const std::vector<char> mask = valid_slot_mask(st, lib);
        Tape t(false);
        const int logits = stack.edge.forward(t, st.types, st.edge_seq, cond);
        const int col = sample_token(t.value(logits), mask, cfg.temperature, cfg.top_p, rng,
                                     "edge", st);
        if (col == int(st.slots.size())) break; // END column
        st.push_pointer(col);
    }

    // ---- parameter phase: structure is forced, only bins are sampled
    const std::vector<int> full_node_seq = [&] {
        std::vector<int> s = st.node_seq;
        s.push_back(tok::kEnd);
        return s;
    }();
    std::vector<int> edge_seq_full = st.edge_seq;
    edge_seq_full.push_back(tok::kEnd);
    const auto gcn_edges = edge_pairs_from_tokens(st.types, edge_seq_full, lib);

    // floats may land in any bin; discrete kinds only in their first
    // `cardinality` bins (decode rejects the rest)
    auto bin_mask_for = [&](const ParamSchema& ps) {
        std::vector<char> mask(size_t(stack.param.vocab()), 0);
        const int usable = ps.is_discrete() ? ps.cardinality() : stack.cfg.bins;
        for (int b = 0; b < std::min(usable, stack.cfg.bins); ++b)
            mask[size_t(tok::kBinOffset + b)] = 1;
        return mask;
    };

    auto push_aux = [&](int token, int ordinal, int pindex, int element, int kind) {
        st.param_seq.push_back(token);
        aux.ordinal.push_back(ordinal);
        aux.index.push_back(pindex);
        aux.element.push_back(element);
        aux.kind.push_back(kind);
    };
    for (size_t oi = param_from_ordinal; oi < st.types.size(); ++oi) {
        const OpSchema& s = lib.schema(st.types[oi]);
        push_aux(tok::kNodeMark, int(oi) + 1, 0, 0, 0);
        for (size_t pi = 0; pi < s.params.size(); ++pi) {
            const std::vector<char> bin_mask = bin_mask_for(s.params[pi]);
            for (int e = 0; e < s.params[pi].scalar_count(); ++e) {
                Tape t(false);
                const int logits =
                    stack.param.forward(t, full_node_seq, gcn_edges, st.param_seq, aux, cond);
                const int token = sample_token(t.value(logits), bin_mask, cfg.temperature,
                                               cfg.top_p, rng, "param", st);
                push_aux(token, int(oi) + 1, int(pi) + 1, e + 1, 1 + int(s.params[pi].kind));
            }
        }
    }

    TokenizedGraph tg;
    tg.node_seq = full_node_seq;
    tg.edge_seq = edge_seq_full;
    tg.param_seq = st.param_seq;
    tg.param_seq.push_back(tok::kEnd);
    tg.slot_list = st.slots;

    return remove_unconnected_nodes(decode(tg, lib, stack.cfg.bins));
}

} // namespace matforge
