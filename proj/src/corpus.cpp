#include "matforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "matforge/png_io.hpp"
#include "matforge/prompt.hpp"
#include "matforge/shard.hpp"
#include "matforge/tokenizer.hpp"

namespace matforge {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- ParamStats -------------------------------------------------------------

void ParamStats::observe(int type_id, int param_index, int element, double v) {
    Entry& e = entries_[{type_id, param_index, element}];
    e.n += 1;
    const double d = v - e.mean;
    e.mean += d / double(e.n);
    e.m2 += d * (v - e.mean);
}

long long ParamStats::count(int type_id, int param_index, int element) const {
    auto it = entries_.find({type_id, param_index, element});
    return it == entries_.end() ? 0 : it->second.n;
}

double ParamStats::sigma(int type_id, int param_index, int element) const {
    auto it = entries_.find({type_id, param_index, element});
    if (it == entries_.end() || it->second.n < 2) return 0.0;
    return std::sqrt(it->second.m2 / double(it->second.n - 1));
}

bool ParamStats::reliable(int type_id, int param_index, int element, int threshold) const {
    return count(type_id, param_index, element) >= threshold;
}

ParamStats compute_param_stats(const std::vector<NodeGraph>& graphs, const OpLibrary& lib) {
    ParamStats stats;
    for (const NodeGraph& g : graphs)
        for (const Node& n : g.nodes) {
            const OpSchema& s = lib.schema(n.type_id);
            for (size_t pi = 0; pi < s.params.size(); ++pi) {
                if (s.params[pi].kind == ParamKind::Enumeration) continue;
                for (size_t e = 0; e < n.params[pi].scalars.size(); ++e)
                    stats.observe(n.type_id, int(pi), int(e), n.params[pi].scalars[e]);
            }
        }
    return stats;
}

// ---- synthetic base-graph grammar -------------------------------------------

namespace {

class Builder {
public:
    explicit Builder(const OpLibrary& lib) : lib_(lib) {}

    /// Add a node with every parameter drawn uniformly from its schema range.
    int add(const char* op, Rng& rng) {
        const OpSchema& s = lib_.by_name(op);
        Node n;
        n.id = int(g_.nodes.size());
        n.type_id = s.type_id;
        for (const ParamSchema& ps : s.params) {
            ParamValue v;
            for (int e = 0; e < ps.scalar_count(); ++e) {
                if (ps.is_discrete())
                    v.scalars.push_back(double(rng.uniform_int(int(std::llround(ps.lo)),
                                                               int(std::llround(ps.hi)))));
                else
                    v.scalars.push_back(rng.uniform(ps.lo, ps.hi));
            }
            n.params.push_back(std::move(v));
        }
        g_.nodes.push_back(std::move(n));
        return g_.nodes.back().id;
    }

    void set(int node, const char* pname, std::vector<double> value) {
        Node& n = g_.nodes[size_t(node)];
        const OpSchema& s = lib_.schema(n.type_id);
        for (size_t pi = 0; pi < s.params.size(); ++pi)
            if (s.params[pi].name == pname) {
                n.params[pi].scalars = std::move(value);
                return;
            }
        throw Error("schema-mismatch", std::string("no parameter ") + pname);
    }

    void connect(int from, int to, int in_slot, int out_slot = 0) {
        g_.edges.push_back({{from, SlotKind::Output, out_slot}, {to, SlotKind::Input, in_slot}});
    }

    /// Add the role's output node fed from `src`.
    void output(MapRole role, int src, Rng& rng) {
        const int out = add(lib_.schema(lib_.output_type(role)).name.c_str(), rng);
        connect(src, out, 0);
        g_.outputs[int(role)] = out;
    }

    int node_count() const { return int(g_.nodes.size()); }
    NodeGraph take() { return std::move(g_); }

private:
    const OpLibrary& lib_;
    NodeGraph g_;
};

int generator_node(Builder& b, Rng& rng) {
    static const char* kGens[] = {"perlin_noise", "fbm_noise", "cells",
                                  "checker",      "brick",     "gradient_linear"};
    return b.add(kGens[rng.uniform_int(0, 5)], rng);
}

int unary_filter(Builder& b, Rng& rng, int src) {
    static const char* kFilters[] = {"levels", "invert", "threshold", "blur_gaussian", "transform2d"};
    const int id = b.add(kFilters[rng.uniform_int(0, 4)], rng);
    b.connect(src, id, 0);
    return id;
}

/// Recursive grayscale texture expression.
int field(Builder& b, Rng& rng, int depth, const TemplateConfig& cfg) {
    const double r = rng.uniform();
    int id;
    if (depth <= 0 || r < 0.4) {
        id = generator_node(b, rng);
    } else if (r < 0.75) {
        const int fg = field(b, rng, depth - 1, cfg);
        const int bg = field(b, rng, depth - 1, cfg);
        id = b.add("blend", rng);
        b.connect(fg, id, 0);
        b.connect(bg, id, 1);
    } else if (r < 0.85) {
        const int img = field(b, rng, depth - 1, cfg);
        const int warp = generator_node(b, rng);
        id = b.add("directional_warp", rng);
        b.connect(img, id, 0);
        b.connect(warp, id, 1);
    } else {
        id = unary_filter(b, rng, field(b, rng, depth - 1, cfg));
    }
    if (rng.uniform() < cfg.p_extra_filter * 0.5) id = unary_filter(b, rng, id);
    return id;
}

NodeGraph build_template_graph(const TemplateConfig& cfg, Rng& rng, const OpLibrary& lib,
                               int max_depth) {
    Builder b(lib);

    // albedo branch
    const int albedo_field = field(b, rng, rng.uniform_int(std::min(1, max_depth), max_depth), cfg);
    int albedo;
    switch (rng.uniform_int(0, 2)) {
    case 0: {
        albedo = b.add("colorize", rng);
        b.connect(albedo_field, albedo, 0);
        break;
    }
    case 1: {
        const int col = b.add("colorize", rng);
        b.connect(albedo_field, col, 0);
        albedo = b.add("hsl_adjust", rng);
        b.set(albedo, "dh", {rng.uniform(-0.15, 0.15)});
        b.set(albedo, "ds", {rng.uniform(-0.3, 0.3)});
        b.set(albedo, "dl", {rng.uniform(-0.2, 0.2)});
        b.connect(col, albedo, 0);
        break;
    }
    default: {
        const int col = b.add("colorize", rng);
        b.connect(albedo_field, col, 0);
        const int flat = b.add("uniform_color", rng);
        albedo = b.add("blend", rng);
        b.set(albedo, "opacity", {rng.uniform(0.2, 0.8)});
        b.connect(flat, albedo, 0);
        b.connect(col, albedo, 1);
        break;
    }
    }
    b.output(MapRole::Albedo, albedo, rng);

    // height and normal branch
    int height = field(b, rng, rng.uniform_int(0, std::min(2, max_depth)), cfg);
    if (rng.uniform() < 0.3) {
        const int blur = b.add("blur_gaussian", rng);
        b.set(blur, "radius", {rng.uniform(0.5, 3.0)});
        b.connect(height, blur, 0);
        height = blur;
    }
    const int nfh = b.add("normal_from_height", rng);
    b.connect(height, nfh, 0);
    int normal_src = nfh;
    if (rng.uniform() < cfg.p_levels_in_normal) {
        const int lv = b.add("levels", rng);
        b.connect(nfh, lv, 0);
        normal_src = lv;
    }
    b.output(MapRole::Normal, normal_src, rng);

    // roughness branch, optionally behind a switch
    int rough_src;
    if (rng.uniform() < cfg.p_switch) {
        const int k = rng.uniform_int(2, 4);
        const std::string op = "switch_" + std::to_string(k);
        const int sw = b.add(op.c_str(), rng);
        for (int i = 0; i < k; ++i)
            b.connect(field(b, rng, rng.uniform_int(0, 1), cfg), sw, i);
        rough_src = sw;
    } else {
        rough_src = rng.uniform() < cfg.p_share_height ? height
                                                       : field(b, rng, rng.uniform_int(0, 1), cfg);
    }
    int rough;
    switch (rng.uniform_int(0, 2)) {
    case 0: {
        rough = b.add("levels", rng);
        b.set(rough, "gamma", {rng.uniform(0.5, 2.0)});
        b.connect(rough_src, rough, 0);
        break;
    }
    case 1: {
        rough = b.add("invert", rng);
        b.connect(rough_src, rough, 0);
        break;
    }
    default: rough = rough_src; break;
    }
    b.output(MapRole::Roughness, rough, rng);

    // metallic branch (optional)
    if (rng.uniform() < cfg.p_metallic) {
        int metal;
        if (rng.uniform() < 0.5) {
            metal = b.add("threshold", rng);
            b.set(metal, "level", {rng.uniform(0.4, 0.8)});
            b.connect(field(b, rng, 0, cfg), metal, 0);
        } else {
            metal = b.add("uniform_color", rng);
            const double m = rng.uniform(0.0, 0.4);
            b.set(metal, "color", {m, m, m});
        }
        b.output(MapRole::Metallic, metal, rng);
    }

    return b.take();
}

} // namespace

std::vector<NodeGraph> generate_base_graphs(const TemplateConfig& cfg, int count, uint64_t seed,
                                            const OpLibrary& lib) {
    if (count < 1) throw Error("param-range", "generate_base_graphs: count must be >= 1");
    std::vector<NodeGraph> out;
    out.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        uint64_t h = seed;
        h = hash_combine(h, uint64_t(i));
        Rng rng(h);
        NodeGraph g;
        for (int depth = cfg.max_blend_depth; depth >= 0; --depth) {
            g = build_template_graph(cfg, rng, lib, depth);
            if (filter_by_size(g, lib)) break;
        }
        ValidationReport report = validate_graph(g, lib);
        if (!report.ok)
            throw Error(report.violations[0].rule,
                        "generated graph invalid: " + report.violations[0].message);
        out.push_back(std::move(g));
    }
    return out;
}

// ---- preprocessing pipeline -------------------------------------------------

NodeGraph prune_unused_outputs(const NodeGraph& g0, const OpLibrary& lib) {
    NodeGraph g = g0;
    const int levels_type = lib.by_name("levels").type_id;
    std::set<int> skipped; // levels nodes that cannot be bridged (no input source)

    while (g.outputs[int(MapRole::Normal)] >= 0) {
        // nodes with a directed path into the normal output
        std::map<int, std::vector<int>> sources;
        std::map<std::pair<int, int>, SlotRef> incoming;
        for (const Edge& e : g.edges) {
            sources[e.to.node_id].push_back(e.from.node_id);
            incoming[{e.to.node_id, e.to.index}] = e.from;
        }
        std::set<int> to_normal;
        std::vector<int> stack = {g.outputs[int(MapRole::Normal)]};
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            if (!to_normal.insert(id).second) continue;
            auto it = sources.find(id);
            if (it != sources.end())
                for (int src : it->second) stack.push_back(src);
        }

        int victim = -1;
        for (const Node& n : g.nodes)
            if (n.type_id == levels_type && to_normal.count(n.id) && !skipped.count(n.id)) {
                victim = n.id;
                break;
            }
        if (victim < 0) break;

        auto src_it = incoming.find({victim, 0});
        if (src_it == incoming.end()) {
            skipped.insert(victim);
            continue;
        }
        const SlotRef src = src_it->second;
        std::vector<Edge> edges;
        for (const Edge& e : g.edges) {
            if (e.to.node_id == victim) continue; // drop the input edge
            Edge kept = e;
            if (kept.from.node_id == victim) kept.from = src; // bridge consumers
            edges.push_back(kept);
        }
        g.edges = std::move(edges);
        std::vector<Node> nodes;
        for (const Node& n : g.nodes)
            if (n.id != victim) nodes.push_back(n);
        g.nodes = std::move(nodes);
    }

    return remove_unconnected_nodes(g);
}

std::vector<NodeGraph> split_switch(const NodeGraph& g, const OpLibrary& lib, int cap) {
    std::vector<int> switch_ids;
    for (const Node& n : g.nodes)
        if (lib.schema(n.type_id).is_switch) switch_ids.push_back(n.id);
    if (switch_ids.empty()) return {g};

    std::vector<int> ks;
    long long combos = 1;
    int k_b = 0;
    for (int id : switch_ids) {
        const int k = lib.schema(g.find_node(id)->type_id).n_inputs;
        ks.push_back(k);
        k_b = std::max(k_b, k);
        if (combos < (1 << 20)) combos *= k;
    }
    const long long n = std::min<long long>(combos, std::max<long long>(k_b, cap));

    std::map<std::pair<int, int>, SlotRef> incoming;
    for (const Edge& e : g.edges) incoming[{e.to.node_id, e.to.index}] = e.from;
    std::map<int, size_t> switch_pos;
    for (size_t i = 0; i < switch_ids.size(); ++i) switch_pos[switch_ids[i]] = i;

    std::vector<NodeGraph> variants;
    for (long long j = 0; j < n; ++j) {
        std::vector<int> sel(ks.size());
        if (combos <= n) {
            long long rest = j; // mixed radix, last switch varies fastest
            for (size_t i = ks.size(); i-- > 0;) {
                sel[i] = int(rest % ks[i]);
                rest /= ks[i];
            }
        } else {
            for (size_t i = 0; i < ks.size(); ++i) sel[i] = int(j % ks[i]);
        }

        // follow switch chains to the real producing slot
        auto resolve = [&](SlotRef s) -> std::pair<bool, SlotRef> {
            while (true) {
                auto sp = switch_pos.find(s.node_id);
                if (sp == switch_pos.end() || s.kind != SlotKind::Output) return {true, s};
                auto in = incoming.find({s.node_id, sel[sp->second]});
                if (in == incoming.end()) return {false, s};
                s = in->second;
            }
        };

        NodeGraph v;
        for (const Node& node : g.nodes)
            if (!switch_pos.count(node.id)) v.nodes.push_back(node);
        for (const Edge& e : g.edges) {
            if (switch_pos.count(e.to.node_id)) continue;
            auto [ok, from] = resolve(e.from);
            if (ok) v.edges.push_back({from, e.to});
        }
        for (int r = 0; r < kNumRoles; ++r) v.outputs[r] = g.outputs[r];
        variants.push_back(remove_unconnected_nodes(v));
    }
    return variants;
}

namespace {

double mean_map_mse(const MaterialMaps& a, const MaterialMaps& b) {
    return (mse(a.albedo, b.albedo) + mse(a.normal, b.normal) + mse(a.roughness, b.roughness) +
            mse(a.metallic, b.metallic)) /
           4.0;
}

} // namespace

std::vector<NodeGraph> dedup(const std::vector<NodeGraph>& graphs, const OpLibrary& lib,
                             int resolution, uint64_t seed) {
    std::vector<NodeGraph> kept;
    std::vector<MaterialMaps> kept_maps;
    for (const NodeGraph& g : graphs) {
        MaterialMaps maps = evaluate(g, lib, resolution, seed);
        bool duplicate = false;
        for (const MaterialMaps& km : kept_maps)
            if (mean_map_mse(maps, km) < 0.01) {
                duplicate = true;
                break;
            }
        if (!duplicate) {
            kept.push_back(g);
            kept_maps.push_back(std::move(maps));
        }
    }
    return kept;
}

bool filter_by_size(const NodeGraph& g, const OpLibrary& lib) {
    return int(g.nodes.size()) <= kMaxNodes && int(g.edges.size()) <= kMaxEdges &&
           int(g.total_slots(lib)) <= kMaxSlots;
}

std::vector<NodeGraph> augment_parameters(const NodeGraph& g, const ParamStats& stats,
                                          const AugmentConfig& cfg, uint64_t seed,
                                          const OpLibrary& lib) {
    std::vector<NodeGraph> out;
    out.reserve(size_t(cfg.variants_per_graph));
    for (int v = 0; v < cfg.variants_per_graph; ++v) {
        uint64_t h = seed;
        h = hash_combine(h, uint64_t(v));
        Rng rng(h);
        NodeGraph variant = g;
        for (Node& n : variant.nodes) {
            const OpSchema& s = lib.schema(n.type_id);
            for (size_t pi = 0; pi < s.params.size(); ++pi) {
                const ParamSchema& ps = s.params[pi];
                if (ps.kind == ParamKind::Enumeration) continue;
                if (s.is_switch && ps.name == "selector") continue;
                for (size_t e = 0; e < n.params[pi].scalars.size(); ++e) {
                    const double mu = n.params[pi].scalars[e];
                    double draw;
                    if (stats.reliable(n.type_id, int(pi), int(e), cfg.reliability_threshold)) {
                        const double beta =
                            ps.kind == ParamKind::Integer ? cfg.beta_int : cfg.beta_float;
                        draw = mu + beta * stats.sigma(n.type_id, int(pi), int(e)) * rng.normal();
                    } else {
                        const double a = (1.0 - cfg.alpha) * mu;
                        const double b = (1.0 + cfg.alpha) * mu;
                        draw = rng.uniform(std::min(a, b), std::max(a, b));
                    }
                    if (ps.kind == ParamKind::Integer) draw = std::round(draw);
                    n.params[pi].scalars[e] = std::clamp(draw, ps.lo, ps.hi);
                }
            }
        }
        out.push_back(std::move(variant));
    }
    return out;
}

// ---- full pipeline ----------------------------------------------------------

CorpusManifest build_corpus(const CorpusConfig& cfg, const std::string& out_dir) {
    const OpLibrary& lib = OpLibrary::builtin();
    fs::create_directories(fs::path(out_dir) / "renders");

    CorpusManifest m;
    m.seed = cfg.seed;

    std::vector<NodeGraph> bases = generate_base_graphs(cfg.templates, cfg.base_graphs, cfg.seed, lib);
    m.base_count = int(bases.size());

    for (NodeGraph& g : bases) g = prune_unused_outputs(g, lib);
    m.pruned_count = int(bases.size());

    struct Item {
        std::string gid;
        int base = 0;
        NodeGraph g;
    };
    std::vector<Item> items;
    for (size_t i = 0; i < bases.size(); ++i) {
        std::vector<NodeGraph> variants = split_switch(bases[i], lib, cfg.switch_cap);
        for (size_t v = 0; v < variants.size(); ++v) {
            char gid[32];
            std::snprintf(gid, sizeof gid, "b%04zus%zu", i, v);
            items.push_back({gid, int(i), std::move(variants[v])});
        }
    }
    m.split_count = int(items.size());

    {
        std::vector<Item> kept;
        std::vector<MaterialMaps> kept_maps;
        for (Item& it : items) {
            MaterialMaps maps = evaluate(it.g, lib, cfg.resolution, 0);
            bool duplicate = false;
            for (const MaterialMaps& km : kept_maps)
                if (mean_map_mse(maps, km) < 0.01) {
                    duplicate = true;
                    break;
                }
            if (!duplicate) {
                kept.push_back(std::move(it));
                kept_maps.push_back(std::move(maps));
            }
        }
        items = std::move(kept);
    }
    m.dedup_count = int(items.size());

    {
        std::vector<Item> kept;
        for (Item& it : items)
            if (filter_by_size(it.g, lib)) kept.push_back(std::move(it));
        items = std::move(kept);
    }
    m.filter_count = int(items.size());
    m.post_filter_fraction = m.dedup_count > 0 ? double(m.filter_count) / m.dedup_count : 0.0;
    if (items.empty()) throw Error("empty-corpus", "no graphs survived the pipeline");

    std::vector<NodeGraph> survivors;
    for (const Item& it : items) survivors.push_back(it.g);
    const ParamStats stats = compute_param_stats(survivors, lib);

    // train/val split by base-graph topology
    std::vector<int> base_ids;
    {
        std::set<int> seen;
        for (const Item& it : items) seen.insert(it.base);
        base_ids.assign(seen.begin(), seen.end());
    }
    {
        uint64_t h = cfg.seed;
        h = hash_combine(h, 0x5B117ULL);
        Rng rng(h);
        for (size_t i = base_ids.size(); i > 1; --i)
            std::swap(base_ids[i - 1], base_ids[size_t(rng.uniform_int(0, int(i) - 1))]);
    }
    std::set<int> val_bases;
    const int n_val = base_ids.size() > 1
                          ? std::max(1, int(std::llround(cfg.val_fraction * double(base_ids.size()))))
                          : 0;
    for (int i = 0; i < n_val; ++i) val_bases.insert(base_ids[size_t(i)]);
    m.val_topologies = int(val_bases.size());
    m.train_topologies = int(base_ids.size()) - m.val_topologies;

    // augment, render, tokenize per surviving graph
    std::vector<std::vector<ShardRecord>> per_item(items.size());
    parallel_for(items.size(), cfg.jobs, [&](size_t i) {
        const Item& it = items[i];
        uint64_t h = cfg.seed;
        h = hash_combine(h, 0xA06ULL);
        h = hash_combine(h, uint64_t(i));
        const std::vector<NodeGraph> variants =
            augment_parameters(it.g, stats, cfg.augment, h, lib);
        for (size_t v = 0; v < variants.size(); ++v) {
            // snap to the token grid first: the stored render then depicts
            // exactly the graph the token streams describe
            const NodeGraph snapped = snap_to_bins(variants[v], lib, cfg.bins);
            const MaterialMaps maps = evaluate(snapped, lib, cfg.resolution, 0);
            const ImagePlane img = render(maps, cfg.render);
            const std::string rel = "renders/" + it.gid + "_v" + std::to_string(v) + ".png";
            write_png((fs::path(out_dir) / rel).string(), img, false);

            const TokenizedGraph t = encode(snapped, lib, cfg.bins);
            ShardRecord rec;
            rec.graph_id = it.gid;
            rec.variant_id = int(v);
            rec.node_seq = t.node_seq;
            rec.edge_seq = t.edge_seq;
            rec.param_seq = t.param_seq;
            rec.aux = t.aux;
            rec.cond = encode_prompt(img);
            rec.render = rel;
            per_item[i].push_back(std::move(rec));
        }
    });

    std::vector<ShardRecord> train, val;
    for (size_t i = 0; i < items.size(); ++i) {
        auto& dst = val_bases.count(items[i].base) ? val : train;
        for (ShardRecord& r : per_item[i]) dst.push_back(std::move(r));
    }
    m.train_records = long(train.size());
    m.val_records = long(val.size());
    if (train.empty()) throw Error("empty-corpus", "no training records after split");

    write_shard((fs::path(out_dir) / "train.ndjson").string(), train);
    write_shard((fs::path(out_dir) / "val.ndjson").string(), val);

    std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::binary);
    if (!mf) throw Error("io-failure", "cannot write manifest");
    mf << corpus_manifest_to_json(m);
    return m;
}

CorpusConfig corpus_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error("config-parse-error", std::string("corpus config: ") + e.what());
    }
    CorpusConfig cfg;
    cfg.base_graphs = j.value("base_graphs", cfg.base_graphs);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.resolution = j.value("resolution", cfg.resolution);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    cfg.switch_cap = j.value("switch_cap", cfg.switch_cap);
    cfg.bins = j.value("bins", cfg.bins);
    cfg.jobs = j.value("jobs", cfg.jobs);
    if (j.contains("templates")) {
        const json& t = j["templates"];
        cfg.templates.max_blend_depth = t.value("max_blend_depth", cfg.templates.max_blend_depth);
        cfg.templates.p_switch = t.value("p_switch", cfg.templates.p_switch);
        cfg.templates.p_metallic = t.value("p_metallic", cfg.templates.p_metallic);
        cfg.templates.p_extra_filter = t.value("p_extra_filter", cfg.templates.p_extra_filter);
        cfg.templates.p_levels_in_normal =
            t.value("p_levels_in_normal", cfg.templates.p_levels_in_normal);
        cfg.templates.p_share_height = t.value("p_share_height", cfg.templates.p_share_height);
    }
    if (j.contains("augment")) {
        const json& a = j["augment"];
        cfg.augment.alpha = a.value("alpha", cfg.augment.alpha);
        cfg.augment.beta_float = a.value("beta_float", cfg.augment.beta_float);
        cfg.augment.beta_int = a.value("beta_int", cfg.augment.beta_int);
        cfg.augment.variants_per_graph = a.value("variants_per_graph", cfg.augment.variants_per_graph);
        cfg.augment.reliability_threshold =
            a.value("reliability_threshold", cfg.augment.reliability_threshold);
    }
    if (j.contains("render")) {
        const json& r = j["render"];
        cfg.render.light_intensity = r.value("light_intensity", cfg.render.light_intensity);
        cfg.render.camera_distance = r.value("camera_distance", cfg.render.camera_distance);
        cfg.render.orthographic = r.value("orthographic", cfg.render.orthographic);
        cfg.render.gamma = r.value("gamma", cfg.render.gamma);
    }
    return cfg;
}

std::string corpus_manifest_to_json(const CorpusManifest& m) {
    json j;
    j["seed"] = m.seed;
    j["base_count"] = m.base_count;
    j["pruned_count"] = m.pruned_count;
    j["split_count"] = m.split_count;
    j["dedup_count"] = m.dedup_count;
    j["filter_count"] = m.filter_count;
    j["post_filter_fraction"] = m.post_filter_fraction;
    j["train_records"] = m.train_records;
    j["val_records"] = m.val_records;
    j["train_topologies"] = m.train_topologies;
    j["val_topologies"] = m.val_topologies;
    return j.dump(2) + "\n";
}

} // namespace matforge
