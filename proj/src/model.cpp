#include "matforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace matforge {

namespace {

constexpr double kMaskNegative = -1e9;

Mat causal_mask(int n) {
    Mat m = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m(i, j) = kMaskNegative;
    return m;
}

std::vector<int> iota_ids(int n) {
    std::vector<int> ids(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ids[size_t(i)] = i;
    return ids;
}

} // namespace

// ---- SeqTransformer ----------------------------------------------------------

void SeqTransformer::build(ParamStore& store, const std::string& prefix,
                           const TransformerConfig& cfg, int in_vocab, Rng& rng) {
    cfg_ = cfg;
    if (cfg.hidden % cfg.heads != 0)
        throw Error("config-invalid", prefix + ": hidden must divide evenly into heads");
    const int D = cfg.hidden;
    const double ws = 1.0 / std::sqrt(double(D));
    if (in_vocab > 0) tok_emb_ = store.add(prefix + "/tok_emb", in_vocab, D, 0.02, rng);
    pos_emb_ = store.add(prefix + "/pos_emb", cfg.max_len, D, 0.02, rng);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = prefix + "/l" + std::to_string(l);
        Layer lay;
        lay.wq = store.add(p + "/wq", D, D, ws, rng);
        lay.bq = store.add(p + "/bq", 1, D, 0.0, rng);
        lay.wk = store.add(p + "/wk", D, D, ws, rng);
        lay.bk = store.add(p + "/bk", 1, D, 0.0, rng);
        lay.wv = store.add(p + "/wv", D, D, ws, rng);
        lay.bv = store.add(p + "/bv", 1, D, 0.0, rng);
        lay.wo = store.add(p + "/wo", D, D, ws, rng);
        lay.bo = store.add(p + "/bo", 1, D, 0.0, rng);
        lay.ln1g = store.add_constant(p + "/ln1_g", 1, D, 1.0);
        lay.ln1b = store.add_constant(p + "/ln1_b", 1, D, 0.0);
        lay.ffw1 = store.add(p + "/ff_w1", D, 4 * D, ws, rng);
        lay.ffb1 = store.add(p + "/ff_b1", 1, 4 * D, 0.0, rng);
        lay.ffw2 = store.add(p + "/ff_w2", 4 * D, D, 1.0 / std::sqrt(4.0 * D), rng);
        lay.ffb2 = store.add(p + "/ff_b2", 1, D, 0.0, rng);
        lay.ln2g = store.add_constant(p + "/ln2_g", 1, D, 1.0);
        lay.ln2b = store.add_constant(p + "/ln2_b", 1, D, 0.0);
        layers_.push_back(lay);
    }
}

int SeqTransformer::run_layers(Tape& t, ParamStore& store, int x, int cond_vec,
                               bool causal) const {
    const int T = int(t.value(x).rows());
    const int D = cfg_.hidden;
    const int H = cfg_.heads;
    const int dh = D / H;
    const int mask = causal ? t.constant(causal_mask(T)) : -1;

    for (const Layer& lay : layers_) {
        const int q = t.add_rowvec(t.matmul(x, t.leaf(store, lay.wq)), t.leaf(store, lay.bq));
        const int k = t.add_rowvec(t.matmul(x, t.leaf(store, lay.wk)), t.leaf(store, lay.bk));
        const int v = t.add_rowvec(t.matmul(x, t.leaf(store, lay.wv)), t.leaf(store, lay.bv));
        std::vector<int> heads;
        for (int h = 0; h < H; ++h) {
            const int qh = t.col_block(q, h * dh, dh);
            const int kh = t.col_block(k, h * dh, dh);
            const int vh = t.col_block(v, h * dh, dh);
            int scores = t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / std::sqrt(double(dh)));
            if (mask >= 0) scores = t.add(scores, mask);
            heads.push_back(t.matmul(t.softmax_rows(scores), vh));
        }
        const int attn = t.add_rowvec(t.matmul(t.concat_cols(heads), t.leaf(store, lay.wo)),
                                      t.leaf(store, lay.bo));
        x = t.layernorm(t.add(x, attn), t.leaf(store, lay.ln1g), t.leaf(store, lay.ln1b));

        const int ff = t.add_rowvec(
            t.matmul(t.gelu(t.add_rowvec(t.matmul(x, t.leaf(store, lay.ffw1)),
                                         t.leaf(store, lay.ffb1))),
                     t.leaf(store, lay.ffw2)),
            t.leaf(store, lay.ffb2));
        x = t.layernorm(t.add(x, ff), t.leaf(store, lay.ln2g), t.leaf(store, lay.ln2b));

        // conditioning joins after the layer's final normalization
        if (cond_vec >= 0) x = t.add_rowvec(x, cond_vec);
    }
    return x;
}

int SeqTransformer::forward_tokens(Tape& t, ParamStore& store, const std::vector<int>& tokens,
                                   const std::vector<int>& extra_rows, int cond_vec,
                                   bool causal) const {
    if (tok_emb_ < 0) throw Error("config-invalid", "transformer built without a token table");
    if (int(tokens.size()) > cfg_.max_len)
        throw Error("size-cap-exceeded", "sequence length " + std::to_string(tokens.size()) +
                                             " exceeds max_len " + std::to_string(cfg_.max_len));
    int x = t.add(t.gather_rows(t.leaf(store, tok_emb_), tokens),
                  t.gather_rows(t.leaf(store, pos_emb_), iota_ids(int(tokens.size()))));
    for (int e : extra_rows) x = t.add(x, e);
    return run_layers(t, store, x, cond_vec, causal);
}

int SeqTransformer::forward_embedded(Tape& t, ParamStore& store, int x, int cond_vec,
                                     bool causal) const {
    const int T = int(t.value(x).rows());
    if (T > cfg_.max_len)
        throw Error("size-cap-exceeded", "sequence length " + std::to_string(T) +
                                             " exceeds max_len " + std::to_string(cfg_.max_len));
    x = t.add(x, t.gather_rows(t.leaf(store, pos_emb_), iota_ids(T)));
    return run_layers(t, store, x, cond_vec, causal);
}

// ---- CondMlp ------------------------------------------------------------------

void CondMlp::build(ParamStore& store, const std::string& prefix, int cond_dim, int hidden,
                    Rng& rng) {
    cond_dim_ = cond_dim;
    w1_ = store.add(prefix + "/cond_w1", cond_dim, hidden, 1.0 / std::sqrt(double(cond_dim)), rng);
    b1_ = store.add(prefix + "/cond_b1", 1, hidden, 0.0, rng);
    w2_ = store.add(prefix + "/cond_w2", hidden, hidden, 1.0 / std::sqrt(double(hidden)), rng);
    b2_ = store.add(prefix + "/cond_b2", 1, hidden, 0.0, rng);
}

int CondMlp::forward(Tape& t, ParamStore& store, const std::vector<float>& cond) const {
    if (int(cond.size()) != cond_dim_)
        throw Error("shape-mismatch", "prompt embedding has " + std::to_string(cond.size()) +
                                          " values, expected " + std::to_string(cond_dim_));
    Mat c(1, cond_dim_);
    for (int i = 0; i < cond_dim_; ++i) c(0, i) = double(cond[size_t(i)]);
    const int h =
        t.gelu(t.add_rowvec(t.matmul(t.constant(std::move(c)), t.leaf(store, w1_)),
                            t.leaf(store, b1_)));
    return t.add_rowvec(t.matmul(h, t.leaf(store, w2_)), t.leaf(store, b2_));
}

// ---- GraphEncoder ---------------------------------------------------------------

void GraphEncoder::build(ParamStore& store, const std::string& prefix, int n_types, int hidden,
                         int layers, Rng& rng) {
    type_emb_ = store.add(prefix + "/type_emb", n_types, hidden, 0.02, rng);
    for (int l = 0; l < layers; ++l) {
        layers_w_.push_back(store.add(prefix + "/l" + std::to_string(l) + "/w", hidden, hidden,
                                      1.0 / std::sqrt(double(hidden)), rng));
        layers_b_.push_back(
            store.add(prefix + "/l" + std::to_string(l) + "/b", 1, hidden, 0.0, rng));
    }
}

int GraphEncoder::forward(Tape& t, ParamStore& store, const std::vector<int>& types,
                          const std::vector<std::pair<int, int>>& edges) const {
    const int N = int(types.size());
    if (N == 0) throw Error("shape-mismatch", "message passing over an empty node list");
    // row-normalized adjacency with self loops
    Mat A = Mat::Zero(N, N);
    for (int i = 0; i < N; ++i) A(i, i) = 1.0;
    for (const auto& [a, b] : edges) {
        if (a < 0 || a >= N || b < 0 || b >= N)
            throw Error("bad-edge-endpoint", "message-passing edge outside the node list");
        A(a, b) = 1.0;
        A(b, a) = 1.0;
    }
    for (int i = 0; i < N; ++i) A.row(i) /= A.row(i).sum();
    const int adj = t.constant(std::move(A));

    int h = t.gather_rows(t.leaf(store, type_emb_), types);
    for (size_t l = 0; l < layers_w_.size(); ++l) {
        const int m = t.matmul(adj, h);
        const int u = t.gelu(t.add_rowvec(t.matmul(m, t.leaf(store, layers_w_[l])),
                                          t.leaf(store, layers_b_[l])));
        h = t.add(h, u);
    }
    return h;
}

// ---- NodeModel -------------------------------------------------------------------

NodeModel::NodeModel(const OpLibrary& lib, const TransformerConfig& cfg, int cond_dim,
                     uint64_t seed) {
    Rng rng(seed);
    vocab_ = tok::kTypeOffset + lib.size();
    body_.build(store_, "node", cfg, vocab_, rng);
    cond_.build(store_, "node", cond_dim, cfg.hidden, rng);
    out_w_ = store_.add("node/out_w", cfg.hidden, vocab_, 1.0 / std::sqrt(double(cfg.hidden)), rng);
    out_b_ = store_.add("node/out_b", 1, vocab_, 0.0, rng);
}

int NodeModel::forward(Tape& t, const std::vector<int>& tokens, const std::vector<float>& cond) {
    const int cv = cond_.forward(t, store_, cond);
    const int h = body_.forward_tokens(t, store_, tokens, {}, cv, true);
    return t.add_rowvec(t.matmul(h, t.leaf(store_, out_w_)), t.leaf(store_, out_b_));
}

// ---- EdgeModel -------------------------------------------------------------------

EdgeModel::EdgeModel(const OpLibrary& lib, const TransformerConfig& cfg, int cond_dim,
                     uint64_t seed)
    : lib_(&lib) {
    Rng rng(seed);
    body_.build(store_, "edge", cfg, 0, rng);
    cond_.build(store_, "edge", cond_dim, cfg.hidden, rng);
    const int D = cfg.hidden;
    start_emb_ = store_.add("edge/start_emb", 1, D, 0.02, rng);
    kind_emb_ = store_.add("edge/slot_kind_emb", 2, D, 0.02, rng);
    index_emb_ = store_.add("edge/slot_index_emb", 8, D, 0.02, rng);
    owner_type_emb_ = store_.add("edge/owner_type_emb", lib.size(), D, 0.02, rng);
    owner_ord_emb_ = store_.add("edge/owner_ord_emb", kMaxNodes, D, 0.02, rng);
    ptr_w_ = store_.add("edge/ptr_w", D, D, 1.0 / std::sqrt(double(D)), rng);
    end_emb_ = store_.add("edge/end_emb", 1, D, 0.02, rng);
}

int EdgeModel::forward(Tape& t, const std::vector<int>& types, const std::vector<int>& tokens,
                       const std::vector<float>& cond) {
    const std::vector<SlotRef> slots = slot_list_from_types(types, *lib_);
    if (slots.empty()) throw Error("empty-slot-list", "no slots to point at");

    std::vector<int> kind_ids, index_ids, type_ids, ord_ids;
    for (const SlotRef& s : slots) {
        kind_ids.push_back(s.kind == SlotKind::Output ? 0 : 1);
        index_ids.push_back(std::min(s.index, 7));
        type_ids.push_back(types[size_t(s.node_id)]);
        ord_ids.push_back(s.node_id);
    }
    int feats = t.add(t.gather_rows(t.leaf(store_, kind_emb_), kind_ids),
                      t.gather_rows(t.leaf(store_, index_emb_), index_ids));
    feats = t.add(feats, t.gather_rows(t.leaf(store_, owner_type_emb_), type_ids));
    feats = t.add(feats, t.gather_rows(t.leaf(store_, owner_ord_emb_), ord_ids));

    // input rows: START -> its own embedding, pointer j -> slot feature j
    std::vector<int> in_ids;
    for (int tokv : tokens) {
        if (tokv == tok::kStart) {
            in_ids.push_back(0);
        } else {
            const int ptr = tokv - tok::kPtrOffset;
            if (ptr < 0 || ptr >= int(slots.size()))
                throw Error("pointer-out-of-range", "edge input token " + std::to_string(tokv));
            in_ids.push_back(1 + ptr);
        }
    }
    const int in_table = t.concat_rows({t.leaf(store_, start_emb_), feats});
    const int x = t.gather_rows(in_table, in_ids);

    const int cv = cond_.forward(t, store_, cond);
    const int h = body_.forward_embedded(t, store_, x, cv, true);
    const int proj = t.matmul(h, t.leaf(store_, ptr_w_));
    const int slot_scores = t.matmul(proj, t.transpose(feats));
    const int end_score = t.matmul(proj, t.transpose(t.leaf(store_, end_emb_)));
    return t.concat_cols({slot_scores, end_score});
}

// ---- ParamModel -------------------------------------------------------------------

ParamModel::ParamModel(const OpLibrary& lib, const StackConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    vocab_ = tok::kBinOffset + cfg.bins;
    TransformerConfig enc_cfg{cfg.param.hidden, cfg.encoder_layers, cfg.param.heads,
                              kMaxNodes + 2};
    encoder_.build(store_, "param/enc", enc_cfg, tok::kTypeOffset + lib.size(), rng);
    gcn_.build(store_, "param/gcn", lib.size(), cfg.param.hidden, cfg.gcn_layers, rng);
    decoder_.build(store_, "param/dec", cfg.param, vocab_, rng);
    cond_.build(store_, "param", cfg.cond_dim, cfg.param.hidden, rng);
    const int D = cfg.param.hidden;
    ord_emb_ = store_.add("param/ord_emb", kMaxNodes + 1, D, 0.02, rng);
    idx_emb_ = store_.add("param/idx_emb", 16, D, 0.02, rng);
    elem_emb_ = store_.add("param/elem_emb", 8, D, 0.02, rng);
    kind_emb_ = store_.add("param/kind_emb", 8, D, 0.02, rng);
    out_w_ = store_.add("param/out_w", D, vocab_, 1.0 / std::sqrt(double(D)), rng);
    out_b_ = store_.add("param/out_b", 1, vocab_, 0.0, rng);
}

int ParamModel::node_context(Tape& t, const std::vector<int>& node_tokens,
                             const std::vector<std::pair<int, int>>& edges,
                             const std::vector<float>& cond) {
    if (node_tokens.size() < 3 || node_tokens.front() != tok::kStart ||
        node_tokens.back() != tok::kEnd)
        throw Error("malformed-sequence", "node context needs a full [START, types..., END]");
    const int N = int(node_tokens.size()) - 2;
    const int cv = cond_.forward(t, store_, cond);
    const int enc = encoder_.forward_tokens(t, store_, node_tokens, {}, cv, false);

    std::vector<int> interior(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) interior[size_t(i)] = i + 1;
    const int tau_seq = t.gather_rows(enc, interior);

    std::vector<int> types(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) types[size_t(i)] = node_tokens[size_t(i) + 1] - tok::kTypeOffset;
    const int tau_graph = gcn_.forward(t, store_, types, edges);
    return t.add(tau_seq, tau_graph);
}

int ParamModel::forward(Tape& t, const std::vector<int>& node_tokens,
                        const std::vector<std::pair<int, int>>& edges,
                        const std::vector<int>& tokens, const ParamAux& aux,
                        const std::vector<float>& cond) {
    if (aux.ordinal.size() != tokens.size() || aux.index.size() != tokens.size() ||
        aux.element.size() != tokens.size() || aux.kind.size() != tokens.size())
        throw Error("alignment-mismatch", "aux rows must align one-to-one with tokens");
    const int N = int(node_tokens.size()) - 2;
    for (int o : aux.ordinal)
        if (o < 0 || o > N)
            throw Error("alignment-mismatch",
                        "token refers to node ordinal " + std::to_string(o) + " of " +
                            std::to_string(N) + " nodes");

    const int tau = node_context(t, node_tokens, edges, cond);
    const int D = decoder_.config().hidden;
    const int tau_aug = t.concat_rows({t.constant(Mat::Zero(1, D)), tau});

    std::vector<int> extras;
    extras.push_back(t.gather_rows(tau_aug, aux.ordinal));
    extras.push_back(t.gather_rows(t.leaf(store_, ord_emb_), aux.ordinal));
    extras.push_back(t.gather_rows(t.leaf(store_, idx_emb_), aux.index));
    extras.push_back(t.gather_rows(t.leaf(store_, elem_emb_), aux.element));
    extras.push_back(t.gather_rows(t.leaf(store_, kind_emb_), aux.kind));

    const int cv = cond_.forward(t, store_, cond);
    const int h = decoder_.forward_tokens(t, store_, tokens, extras, cv, true);
    return t.add_rowvec(t.matmul(h, t.leaf(store_, out_w_)), t.leaf(store_, out_b_));
}

// ---- stack, checkpoint ---------------------------------------------------------

ModelStack::ModelStack(const OpLibrary& lib, const StackConfig& cfg_in, uint64_t init_seed)
    : cfg(cfg_in),
      n_types(lib.size()),
      node(lib, cfg_in.node, cfg_in.cond_dim, splitmix64(init_seed ^ 0x11ULL)),
      edge(lib, cfg_in.edge, cfg_in.cond_dim, splitmix64(init_seed ^ 0x22ULL)),
      param(lib, cfg_in, splitmix64(init_seed ^ 0x33ULL)) {}

namespace {

json transformer_config_json(const TransformerConfig& c) {
    return json{{"hidden", c.hidden}, {"layers", c.layers}, {"heads", c.heads},
                {"max_len", c.max_len}};
}

TransformerConfig transformer_config_from(const json& j) {
    TransformerConfig c;
    c.hidden = j.at("hidden").get<int>();
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.max_len = j.at("max_len").get<int>();
    return c;
}

json store_to_json(const ParamStore& store) {
    json out = json::object();
    for (int i = 0; i < store.size(); ++i) {
        const auto& s = store.slot(i);
        json data = json::array();
        for (int r = 0; r < s.value.rows(); ++r)
            for (int c = 0; c < s.value.cols(); ++c) data.push_back(s.value(r, c));
        out[s.name] = json{{"rows", s.value.rows()}, {"cols", s.value.cols()},
                           {"data", std::move(data)}};
    }
    return out;
}

void store_from_json(ParamStore& store, const json& j) {
    if (int(j.size()) != store.size())
        throw Error("checkpoint-mismatch", "tensor count differs from the model layout");
    for (int i = 0; i < store.size(); ++i) {
        auto& s = store.slot(i);
        auto it = j.find(s.name);
        if (it == j.end())
            throw Error("checkpoint-mismatch", "missing tensor " + s.name);
        const json& tj = *it;
        if (tj.at("rows").get<int>() != s.value.rows() ||
            tj.at("cols").get<int>() != s.value.cols())
            throw Error("checkpoint-mismatch", "shape differs for tensor " + s.name);
        const json& data = tj.at("data");
        if (int(data.size()) != s.value.size())
            throw Error("checkpoint-mismatch", "element count differs for tensor " + s.name);
        int k = 0;
        for (int r = 0; r < s.value.rows(); ++r)
            for (int c = 0; c < s.value.cols(); ++c) s.value(r, c) = data[size_t(k++)].get<double>();
    }
}

} // namespace

void ModelStack::save(const std::string& path) const {
    json j;
    j["format"] = "matforge-ckpt/1";
    j["config"] = json{{"node", transformer_config_json(cfg.node)},
                       {"edge", transformer_config_json(cfg.edge)},
                       {"param", transformer_config_json(cfg.param)},
                       {"encoder_layers", cfg.encoder_layers},
                       {"gcn_layers", cfg.gcn_layers},
                       {"cond_dim", cfg.cond_dim},
                       {"bins", cfg.bins},
                       {"n_types", n_types}};
    j["tensors"] = json{{"node", store_to_json(node.store())},
                        {"edge", store_to_json(edge.store())},
                        {"param", store_to_json(param.store())}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io-failure", "cannot write checkpoint " + path);
    out << j.dump() << "\n";
}

ModelStack ModelStack::load(const std::string& path, const OpLibrary& lib) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io-failure", "cannot read checkpoint " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw Error("checkpoint-parse-error", e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "matforge-ckpt/1")
            throw Error("checkpoint-version", "unsupported checkpoint format");
        const json& cj = j.at("config");
        StackConfig cfg;
        cfg.node = transformer_config_from(cj.at("node"));
        cfg.edge = transformer_config_from(cj.at("edge"));
        cfg.param = transformer_config_from(cj.at("param"));
        cfg.encoder_layers = cj.at("encoder_layers").get<int>();
        cfg.gcn_layers = cj.at("gcn_layers").get<int>();
        cfg.cond_dim = cj.at("cond_dim").get<int>();
        cfg.bins = cj.at("bins").get<int>();
        if (cj.at("n_types").get<int>() != lib.size())
            throw Error("checkpoint-mismatch", "operator library size differs from checkpoint");

        ModelStack stack(lib, cfg, 0);
        store_from_json(stack.node.store(), j.at("tensors").at("node"));
        store_from_json(stack.edge.store(), j.at("tensors").at("edge"));
        store_from_json(stack.param.store(), j.at("tensors").at("param"));
        return stack;
    } catch (const json::exception& e) {
        throw Error("checkpoint-parse-error", e.what());
    }
}

// ---- losses -------------------------------------------------------------------

std::vector<int> types_from_node_seq(const std::vector<int>& node_seq) {
    std::vector<int> types;
    for (size_t i = 1; i + 1 < node_seq.size(); ++i)
        types.push_back(node_seq[i] - tok::kTypeOffset);
    return types;
}

std::vector<std::pair<int, int>> edge_pairs_from_tokens(const std::vector<int>& types,
                                                        const std::vector<int>& edge_seq,
                                                        const OpLibrary& lib) {
    const std::vector<SlotRef> slots = slot_list_from_types(types, lib);
    std::vector<std::pair<int, int>> pairs;
    for (size_t i = 1; i + 1 < edge_seq.size(); i += 2) {
        const int a = edge_seq[i] - tok::kPtrOffset;
        const int b = edge_seq[i + 1] - tok::kPtrOffset;
        if (a < 0 || a >= int(slots.size()) || b < 0 || b >= int(slots.size()))
            throw Error("pointer-out-of-range", "edge stream points past the slot list");
        pairs.push_back({slots[size_t(a)].node_id, slots[size_t(b)].node_id});
    }
    return pairs;
}

int node_loss(Tape& t, NodeModel& m, const ShardRecord& rec, const std::vector<float>& cond) {
    const std::vector<int>& seq = rec.node_seq;
    std::vector<int> input(seq.begin(), seq.end() - 1);
    std::vector<int> targets(seq.begin() + 1, seq.end());
    return t.softmax_ce_mean(m.forward(t, input, cond), std::move(targets));
}

int edge_loss(Tape& t, EdgeModel& m, const std::vector<int>& types, const ShardRecord& rec,
              const std::vector<float>& cond, const OpLibrary& lib) {
    const std::vector<int>& seq = rec.edge_seq;
    const int n_slots = int(slot_list_from_types(types, lib).size());
    std::vector<int> input(seq.begin(), seq.end() - 1);
    std::vector<int> targets;
    for (size_t i = 1; i < seq.size(); ++i)
        targets.push_back(seq[i] == tok::kEnd ? n_slots : seq[i] - tok::kPtrOffset);
    return t.softmax_ce_mean(m.forward(t, types, input, cond), std::move(targets));
}

int param_loss(Tape& t, ParamModel& m, const std::vector<int>& types, const ShardRecord& rec,
               const std::vector<float>& cond, const OpLibrary& lib) {
    const std::vector<int>& seq = rec.param_seq;
    const auto edges = edge_pairs_from_tokens(types, rec.edge_seq, lib);
    std::vector<int> input(seq.begin(), seq.end() - 1);
    std::vector<int> targets(seq.begin() + 1, seq.end());
    ParamModel::ParamAux aux;
    const size_t L = input.size();
    aux.ordinal.assign(rec.aux.param_ordinal.begin(), rec.aux.param_ordinal.begin() + L);
    aux.index.assign(rec.aux.param_index.begin(), rec.aux.param_index.begin() + L);
    aux.element.assign(rec.aux.param_element.begin(), rec.aux.param_element.begin() + L);
    aux.kind.assign(rec.aux.param_kind.begin(), rec.aux.param_kind.begin() + L);
    return t.softmax_ce_mean(m.forward(t, rec.node_seq, edges, input, aux, cond),
                             std::move(targets));
}

// ---- training -------------------------------------------------------------------

namespace {

struct ModelHandle {
    std::string name;
    ParamStore* store;
    std::function<int(Tape&, const ShardRecord&, const std::vector<float>&)> loss;
};

double run_epoch(ModelHandle& mh, const std::vector<ShardRecord>& records,
                 const std::vector<size_t>& order, int batch_size, AdamOptimizer* opt,
                 Rng* dropout_rng, double cond_dropout, int epoch) {
    double total = 0.0;
    long long counted = 0;
    const std::vector<float> zero_cond(records.empty() ? 0 : records[0].cond.size(), 0.0f);
    for (size_t at = 0; at < order.size(); at += size_t(batch_size)) {
        const size_t hi = std::min(order.size(), at + size_t(batch_size));
        const int n = int(hi - at);
        if (opt) mh.store->zero_grad();
        for (size_t k = at; k < hi; ++k) {
            const ShardRecord& rec = records[order[k]];
            const bool drop = dropout_rng && dropout_rng->uniform() < cond_dropout;
            const std::vector<float>& cond = drop ? zero_cond : rec.cond;
            Tape tape(opt != nullptr);
            const int l = mh.loss(tape, rec, cond);
            const double lv = tape.scalar(l);
            if (!std::isfinite(lv))
                throw Error("divergence", mh.name + ": non-finite loss at epoch " +
                                              std::to_string(epoch) + ", record " +
                                              std::to_string(order[k]));
            total += lv;
            ++counted;
            if (opt) tape.backward(tape.scale(l, 1.0 / n));
        }
        if (opt) opt->step(*mh.store);
    }
    return counted ? total / double(counted) : 0.0;
}

} // namespace

TrainReport train_stack(ModelStack& stack, const std::vector<ShardRecord>& train,
                        const std::vector<ShardRecord>& val, const TrainConfig& cfg,
                        const OpLibrary& lib, const LogFn& log) {
    if (train.empty()) throw Error("empty-corpus", "no training records");

    std::vector<ModelHandle> handles;
    if (cfg.target == "all" || cfg.target == "node")
        handles.push_back({"node", &stack.node.store(),
                           [&](Tape& t, const ShardRecord& r, const std::vector<float>& c) {
                               return node_loss(t, stack.node, r, c);
                           }});
    if (cfg.target == "all" || cfg.target == "edge")
        handles.push_back({"edge", &stack.edge.store(),
                           [&](Tape& t, const ShardRecord& r, const std::vector<float>& c) {
                               return edge_loss(t, stack.edge, types_from_node_seq(r.node_seq), r,
                                                c, lib);
                           }});
    if (cfg.target == "all" || cfg.target == "param")
        handles.push_back({"param", &stack.param.store(),
                           [&](Tape& t, const ShardRecord& r, const std::vector<float>& c) {
                               return param_loss(t, stack.param, types_from_node_seq(r.node_seq),
                                                 r, c, lib);
                           }});
    if (handles.empty()) throw Error("config-invalid", "unknown train target: " + cfg.target);

    TrainReport report;
    std::vector<size_t> val_order(val.size());
    for (size_t i = 0; i < val.size(); ++i) val_order[i] = i;

    for (ModelHandle& mh : handles) {
        AdamOptimizer opt(cfg.lr);
        double best_val = std::numeric_limits<double>::infinity();
        int best_epoch = -1;
        std::vector<Mat> best_values = mh.store->snapshot_values();

        uint64_t model_salt = 0;
        for (char ch : mh.name) model_salt = model_salt * 131 + uint64_t(ch);

        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            std::vector<size_t> order(train.size());
            for (size_t i = 0; i < train.size(); ++i) order[i] = i;
            Rng shuffle_rng(splitmix64(hash_combine(hash_combine(cfg.seed, model_salt),
                                                    uint64_t(epoch))));
            for (size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[size_t(shuffle_rng.uniform_int(0, int64_t(i) - 1))]);
            Rng dropout_rng(splitmix64(hash_combine(hash_combine(cfg.seed, model_salt ^ 0xD0ULL),
                                                    uint64_t(epoch))));

            const double train_loss = run_epoch(mh, train, order, cfg.batch_size, &opt,
                                                &dropout_rng, cfg.cond_dropout, epoch);
            const std::vector<ShardRecord>& val_set = val.empty() ? train : val;
            std::vector<size_t> vorder(val_set.size());
            for (size_t i = 0; i < val_set.size(); ++i) vorder[i] = i;
            const double val_loss =
                run_epoch(mh, val_set, vorder, cfg.batch_size, nullptr, nullptr, 0.0, epoch);

            if (val_loss < best_val) {
                best_val = val_loss;
                best_epoch = epoch;
                best_values = mh.store->snapshot_values();
            }
            if (log) {
                json ev{{"event", "epoch"},       {"model", mh.name},
                        {"epoch", epoch},         {"train_loss", train_loss},
                        {"val_loss", val_loss},   {"best_val", best_val},
                        {"best_epoch", best_epoch}};
                log(ev.dump());
            }
        }
        mh.store->restore_values(best_values);
        if (mh.name == "node") {
            report.best_val_node = best_val;
            report.best_epoch_node = best_epoch;
        } else if (mh.name == "edge") {
            report.best_val_edge = best_val;
            report.best_epoch_edge = best_epoch;
        } else {
            report.best_val_param = best_val;
            report.best_epoch_param = best_epoch;
        }
    }
    return report;
}

} // namespace matforge
