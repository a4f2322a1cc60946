#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "matforge/autograd.hpp"
#include "matforge/schema.hpp"
#include "matforge/shard.hpp"
#include "matforge/tokenizer.hpp"

namespace matforge {

struct TransformerConfig {
    int hidden = 40;
    int layers = 2;
    int heads = 4;
    int max_len = kMaxNodes + 2;
};

/// Dimensions of the three-generator stack. Defaults are desk scale.
struct StackConfig {
    TransformerConfig node{40, 2, 4, kMaxNodes + 2};
    TransformerConfig edge{48, 2, 4, 2 * kMaxEdges + 2};
    TransformerConfig param{96, 4, 4, 2 + kMaxNodes * 8};
    int encoder_layers = 2; // bidirectional encoder over the node sequence
    int gcn_layers = 6;
    int cond_dim = 256;
    int bins = tok::kBins;
};

/// Decoder-style transformer. Owns tensor ids inside a shared ParamStore;
/// input is either raw token ids (embedded internally) or a prebuilt matrix.
class SeqTransformer {
public:
    void build(ParamStore& store, const std::string& prefix, const TransformerConfig& cfg,
               int in_vocab, Rng& rng);

    /// tokens -> hidden states (T x hidden). `extra_rows` are tape nodes of
    /// shape T x hidden summed into the input embedding. `cond_vec` (1 x
    /// hidden tape node, or -1) is added after each layer's final norm.
    int forward_tokens(Tape& t, ParamStore& store, const std::vector<int>& tokens,
                       const std::vector<int>& extra_rows, int cond_vec, bool causal) const;

    /// Same, but the caller supplies the already-embedded input (T x hidden);
    /// positional embeddings are still added here.
    int forward_embedded(Tape& t, ParamStore& store, int x, int cond_vec, bool causal) const;

    const TransformerConfig& config() const { return cfg_; }

private:
    int run_layers(Tape& t, ParamStore& store, int x, int cond_vec, bool causal) const;

    TransformerConfig cfg_;
    int tok_emb_ = -1, pos_emb_ = -1;
    struct Layer {
        int wq, bq, wk, bk, wv, bv, wo, bo;
        int ln1g, ln1b;
        int ffw1, ffb1, ffw2, ffb2;
        int ln2g, ln2b;
    };
    std::vector<Layer> layers_;
};

/// Two-layer MLP mapping the prompt embedding to a 1 x hidden bias vector.
class CondMlp {
public:
    void build(ParamStore& store, const std::string& prefix, int cond_dim, int hidden, Rng& rng);
    int forward(Tape& t, ParamStore& store, const std::vector<float>& cond) const;

private:
    int cond_dim_ = 0;
    int w1_ = -1, b1_ = -1, w2_ = -1, b2_ = -1;
};

/// Residual message-passing encoder over node types: each layer averages the
/// undirected neighborhood (self included) and applies a learned projection.
class GraphEncoder {
public:
    void build(ParamStore& store, const std::string& prefix, int n_types, int hidden, int layers,
               Rng& rng);
    int forward(Tape& t, ParamStore& store, const std::vector<int>& types,
                const std::vector<std::pair<int, int>>& edges) const;
    int layer_count() const { return int(layers_w_.size()); }

private:
    int type_emb_ = -1;
    std::vector<int> layers_w_, layers_b_;
};

/// Autoregressive generator over the node-type stream.
class NodeModel {
public:
    NodeModel(const OpLibrary& lib, const TransformerConfig& cfg, int cond_dim, uint64_t seed);
    /// tokens = current S_n prefix; returns T x vocab logits.
    int forward(Tape& t, const std::vector<int>& tokens, const std::vector<float>& cond);
    int vocab() const { return vocab_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }

private:
    ParamStore store_;
    SeqTransformer body_;
    CondMlp cond_;
    int out_w_ = -1, out_b_ = -1;
    int vocab_ = 0;
};

/// Pointer-network generator over the edge stream: scores every slot of the
/// node list plus an END sentinel.
class EdgeModel {
public:
    EdgeModel(const OpLibrary& lib, const TransformerConfig& cfg, int cond_dim, uint64_t seed);
    /// types = decoded node types (defines the slot list); tokens = S_e input
    /// prefix. Returns T x (n_slots + 1) logits, END scored in the last column.
    int forward(Tape& t, const std::vector<int>& types, const std::vector<int>& tokens,
                const std::vector<float>& cond);
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }

private:
    const OpLibrary* lib_;
    ParamStore store_;
    SeqTransformer body_;
    CondMlp cond_;
    int start_emb_ = -1;
    int kind_emb_ = -1, index_emb_ = -1, owner_type_emb_ = -1, owner_ord_emb_ = -1;
    int ptr_w_ = -1, end_emb_ = -1;
};

/// Parameter generator: bidirectional node-sequence encoder + graph message
/// passing give per-node context; a causal decoder emits quantization bins.
class ParamModel {
public:
    ParamModel(const OpLibrary& lib, const StackConfig& cfg, uint64_t seed);

    /// Per-node context embeddings: encoder output for each node plus the
    /// message-passing embedding. Returns N x hidden.
    int node_context(Tape& t, const std::vector<int>& node_tokens,
                     const std::vector<std::pair<int, int>>& edges,
                     const std::vector<float>& cond);

    struct ParamAux {
        std::vector<int> ordinal, index, element, kind; // +1-coded, 0 = n/a
    };

    /// tokens = S_p input prefix with its aligned aux rows; node_tokens/edges
    /// describe the graph the parameters belong to. Returns T x vocab logits.
    int forward(Tape& t, const std::vector<int>& node_tokens,
                const std::vector<std::pair<int, int>>& edges, const std::vector<int>& tokens,
                const ParamAux& aux, const std::vector<float>& cond);

    int vocab() const { return vocab_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }
    GraphEncoder& gcn() { return gcn_; }

private:
    ParamStore store_;
    SeqTransformer encoder_, decoder_;
    GraphEncoder gcn_;
    CondMlp cond_;
    int ord_emb_ = -1, idx_emb_ = -1, elem_emb_ = -1, kind_emb_ = -1;
    int out_w_ = -1, out_b_ = -1;
    int vocab_ = 0;
};

/// The three generators plus everything needed to rebuild them from disk.
struct ModelStack {
    StackConfig cfg;
    int n_types = 0;
    NodeModel node;
    EdgeModel edge;
    ParamModel param;

    ModelStack(const OpLibrary& lib, const StackConfig& cfg, uint64_t init_seed);

    void save(const std::string& path) const;
    static ModelStack load(const std::string& path, const OpLibrary& lib);
};

/// Undirected node-id pairs for the message-passing graph, decoded from an
/// edge-token stream over the given node types.
std::vector<std::pair<int, int>> edge_pairs_from_tokens(const std::vector<int>& types,
                                                        const std::vector<int>& edge_seq,
                                                        const OpLibrary& lib);

/// Teacher-forced next-token losses (tape node ids).
int node_loss(Tape& t, NodeModel& m, const ShardRecord& rec, const std::vector<float>& cond);
int edge_loss(Tape& t, EdgeModel& m, const std::vector<int>& types, const ShardRecord& rec,
              const std::vector<float>& cond, const OpLibrary& lib);
int param_loss(Tape& t, ParamModel& m, const std::vector<int>& types, const ShardRecord& rec,
               const std::vector<float>& cond, const OpLibrary& lib);

/// Interior type ids of a stored node sequence.
std::vector<int> types_from_node_seq(const std::vector<int>& node_seq);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 64;
    double lr = 1e-5;
    uint64_t seed = 1;
    double cond_dropout = 0.1;
    std::string target = "all"; // node | edge | param | all
};

struct TrainReport {
    double best_val_node = 0.0, best_val_edge = 0.0, best_val_param = 0.0;
    int best_epoch_node = -1, best_epoch_edge = -1, best_epoch_param = -1;
};

using LogFn = std::function<void(const std::string& event_json)>;

/// Adam + teacher forcing over the shard records; keeps the best-validation
/// weights per model. Throws Error("divergence") on a non-finite loss.
TrainReport train_stack(ModelStack& stack, const std::vector<ShardRecord>& train,
                        const std::vector<ShardRecord>& val, const TrainConfig& cfg,
                        const OpLibrary& lib, const LogFn& log);

} // namespace matforge
