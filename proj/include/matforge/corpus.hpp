#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "matforge/eval.hpp"
#include "matforge/graph.hpp"

namespace matforge {

/// Knobs of the synthetic base-graph grammar.
struct TemplateConfig {
    int max_blend_depth = 3;
    double p_switch = 0.3;
    double p_metallic = 0.5;
    double p_extra_filter = 0.6;
    double p_levels_in_normal = 0.15;
    double p_share_height = 0.5;
};

/// Parameter augmentation settings. variants_per_graph = 100 reproduces the
/// reference protocol; desk-scale runs override it downward.
struct AugmentConfig {
    double alpha = 0.06;
    double beta_float = 0.2;
    double beta_int = 0.5;
    int variants_per_graph = 100;
    int reliability_threshold = 20;
};

/// Per (op type, parameter, element) population statistics driving augmentation.
class ParamStats {
public:
    void observe(int type_id, int param_index, int element, double v);
    long long count(int type_id, int param_index, int element) const;
    double sigma(int type_id, int param_index, int element) const;
    bool reliable(int type_id, int param_index, int element, int threshold) const;

private:
    struct Entry {
        long long n = 0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    std::map<std::tuple<int, int, int>, Entry> entries_;
};

ParamStats compute_param_stats(const std::vector<NodeGraph>& graphs, const OpLibrary& lib);

/// Grammar-sampled base graphs; deterministic given seed, all valid and
/// within size caps.
std::vector<NodeGraph> generate_base_graphs(const TemplateConfig& cfg, int count, uint64_t seed,
                                            const OpLibrary& lib);

/// Drop branches that feed no output role, and bridge out `levels` nodes
/// sitting on any path into the normal output.
NodeGraph prune_unused_outputs(const NodeGraph& g, const OpLibrary& lib);

/// Replace switches by direct edges, one variant per chosen branch combination:
/// n = min(total combinations, max(k_b, cap)) variants, every branch covered.
std::vector<NodeGraph> split_switch(const NodeGraph& g, const OpLibrary& lib, int cap = 5);

/// Greedy in input order: drop a graph when the mean MSE of its four material
/// maps against any kept graph is < 0.01.
std::vector<NodeGraph> dedup(const std::vector<NodeGraph>& graphs, const OpLibrary& lib,
                             int resolution, uint64_t seed);

/// true iff within the serialization caps (nodes <= 80, edges <= 200, slots <= 210).
bool filter_by_size(const NodeGraph& g, const OpLibrary& lib);

/// variants_per_graph copies with resampled continuous/integer parameters:
/// reliable stats -> Gaussian around the stored value, otherwise
/// U((1-alpha)mu, (1+alpha)mu); clamped; enums and switch selectors untouched.
std::vector<NodeGraph> augment_parameters(const NodeGraph& g, const ParamStats& stats,
                                          const AugmentConfig& cfg, uint64_t seed,
                                          const OpLibrary& lib);

struct CorpusConfig {
    int base_graphs = 500;
    uint64_t seed = 1;
    int resolution = 128;
    double val_fraction = 0.1;
    int switch_cap = 5;
    int bins = 128;
    int jobs = 1;
    TemplateConfig templates;
    AugmentConfig augment;
    RenderConfig render;

    CorpusConfig() { augment.variants_per_graph = 20; } // desk-scale default
};

struct CorpusManifest {
    uint64_t seed = 0;
    int base_count = 0;
    int pruned_count = 0;
    int split_count = 0;
    int dedup_count = 0;
    int filter_count = 0;
    double post_filter_fraction = 0.0;
    long long train_records = 0;
    long long val_records = 0;
    int train_topologies = 0;
    int val_topologies = 0;
};

/// Full pipeline: generate -> prune -> split -> dedup -> filter -> augment ->
/// render/encode -> shards. Writes train.ndjson, val.ndjson, renders/ and
/// manifest.json under out_dir. Train/val split is by base-graph topology.
CorpusManifest build_corpus(const CorpusConfig& cfg, const std::string& out_dir);

CorpusConfig corpus_config_from_json(const std::string& text);
std::string corpus_manifest_to_json(const CorpusManifest& m);

} // namespace matforge
