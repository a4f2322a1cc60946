// matforge command-line entry point: one binary wiring the corpus pipeline,
// training, sampling, ranking, optimization, and the graph/token codecs into
// reproducible workflows. Configuration is JSON (with --set key=value
// overrides), progress is newline-delimited JSON on stderr, and every run
// writes a manifest listing inputs, seed, versions, and outputs. Manifests
// carry no clocks, so identical invocations produce byte-identical files.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "matforge/corpus.hpp"
#include "matforge/graph_json.hpp"
#include "matforge/match.hpp"
#include "matforge/model.hpp"
#include "matforge/png_io.hpp"
#include "matforge/prompt.hpp"
#include "matforge/sampler.hpp"
#include "matforge/shard.hpp"
#include "matforge/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace matforge;

namespace {

constexpr const char* kToolVersion = "0.1.0";

void log_event(const json& j) { std::cerr << j.dump() << "\n"; }

[[noreturn]] void fail(const std::string& code, const std::string& message) {
    std::cerr << json{{"event", "error"}, {"code", code}, {"message", message}}.dump() << "\n";
    std::exit(1);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io-error", "cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

void write_text(const std::string& path, const std::string& text) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("io-error", "cannot write " + path);
    out << text;
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail("config-parse-error", origin + ": " + e.what());
    }
}

/// Dotted-path --set overrides applied onto a JSON config tree. Values parse
/// as JSON when possible (numbers, bools, arrays) and fall back to strings.
void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            fail("config-parse-error", "--set expects key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq);
        const std::string value = s.substr(eq + 1);
        json* node = &cfg;
        size_t pos = 0;
        while (true) {
            const size_t dot = key.find('.', pos);
            const std::string part =
                dot == std::string::npos ? key.substr(pos) : key.substr(pos, dot - pos);
            if (part.empty()) fail("config-parse-error", "--set key has an empty segment: " + key);
            if (dot == std::string::npos) {
                json parsed;
                try {
                    parsed = json::parse(value);
                } catch (const json::exception&) {
                    parsed = value;
                }
                (*node)[part] = parsed;
                break;
            }
            node = &(*node)[part];
            pos = dot + 1;
        }
    }
}

json load_config(const std::string& path, const std::vector<std::string>& sets) {
    json cfg = path.empty() ? json::object() : parse_json(read_text(path), path);
    if (!cfg.is_object()) fail("config-parse-error", path + ": config root must be an object");
    apply_overrides(cfg, sets);
    return cfg;
}

/// Per-run manifest written next to the primary outputs.
void write_manifest(const std::string& path, const std::string& command, uint64_t seed,
                    const json& inputs, const std::vector<std::string>& outputs) {
    const json m{{"command", command},
                 {"seed", seed},
                 {"versions", {{"matforge", kToolVersion}, {"graph_format", "matforge-graph/1"}}},
                 {"inputs", inputs},
                 {"outputs", outputs}};
    write_text(path, m.dump(2) + "\n");
}

TransformerConfig transformer_from_json(const json& j, TransformerConfig d) {
    d.hidden = j.value("hidden", d.hidden);
    d.layers = j.value("layers", d.layers);
    d.heads = j.value("heads", d.heads);
    d.max_len = j.value("max_len", d.max_len);
    return d;
}

StackConfig stack_from_json(const json& j) {
    StackConfig cfg;
    if (j.contains("node")) cfg.node = transformer_from_json(j["node"], cfg.node);
    if (j.contains("edge")) cfg.edge = transformer_from_json(j["edge"], cfg.edge);
    if (j.contains("param")) cfg.param = transformer_from_json(j["param"], cfg.param);
    cfg.encoder_layers = j.value("encoder_layers", cfg.encoder_layers);
    cfg.gcn_layers = j.value("gcn_layers", cfg.gcn_layers);
    cfg.cond_dim = j.value("cond_dim", cfg.cond_dim);
    cfg.bins = j.value("bins", cfg.bins);
    return cfg;
}

TrainConfig train_from_json(const json& j) {
    TrainConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.cond_dropout = j.value("cond_dropout", cfg.cond_dropout);
    cfg.target = j.value("target", cfg.target);
    return cfg;
}

StyleMetricConfig metric_from_json(const json& j) {
    StyleMetricConfig cfg;
    cfg.kernel_count = j.value("kernel_count", cfg.kernel_count);
    cfg.kernel_seed = j.value("kernel_seed", cfg.kernel_seed);
    cfg.gram_weight = j.value("gram_weight", cfg.gram_weight);
    cfg.thumb_weight = j.value("thumb_weight", cfg.thumb_weight);
    cfg.swd_directions = j.value("swd_directions", cfg.swd_directions);
    cfg.swd_seed = j.value("swd_seed", cfg.swd_seed);
    return cfg;
}

RenderConfig render_from_json(const json& j) {
    RenderConfig cfg;
    cfg.light_intensity = j.value("light_intensity", cfg.light_intensity);
    cfg.camera_distance = j.value("camera_distance", cfg.camera_distance);
    cfg.orthographic = j.value("orthographic", cfg.orthographic);
    cfg.gamma = j.value("gamma", cfg.gamma);
    return cfg;
}

json tokens_to_json(const TokenizedGraph& tg, int bins) {
    return json{{"format", "matforge-tokens/1"},
                {"bins", bins},
                {"node_seq", tg.node_seq},
                {"edge_seq", tg.edge_seq},
                {"param_seq", tg.param_seq}};
}

std::pair<TokenizedGraph, int> tokens_from_json(const json& j, const std::string& origin) {
    if (!j.is_object() || j.value("format", "") != "matforge-tokens/1")
        throw Error("format-version", origin + ": expected format matforge-tokens/1");
    TokenizedGraph tg;
    try {
        tg.node_seq = j.at("node_seq").get<std::vector<int>>();
        tg.edge_seq = j.at("edge_seq").get<std::vector<int>>();
        tg.param_seq = j.at("param_seq").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw Error("parse-error", origin + ": " + e.what());
    }
    return {tg, j.value("bins", tok::kBins)};
}

/// Graph files of a directory in byte-order of their names, so candidate
/// indexing is stable across platforms and reruns.
std::vector<std::string> list_graph_files(const std::string& dir) {
    if (!fs::is_directory(dir)) fail("io-error", dir + " is not a directory");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (entry.path().extension() == ".json" && name != "run_manifest.json" &&
            name != "manifest.json")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<float> condition_vector(const std::string& image_path, bool uncond) {
    if (uncond && !image_path.empty())
        fail("config-parse-error", "--image and --uncond are mutually exclusive");
    if (uncond || image_path.empty()) return std::vector<float>(size_t(kCondDim), 0.0f);
    return encode_prompt(to_channels(read_png(image_path), 3));
}

uint64_t sample_seed(uint64_t base, size_t index) {
    return splitmix64(splitmix64(base) + index);
}

// ---------------------------------------------------------------------------
// subcommand payloads

struct CorpusArgs {
    std::string config, out;
    std::vector<std::string> sets;
    int jobs = 0;       // 0 = leave to config
    int64_t seed = -1;  // <0 = leave to config
    int base_graphs = 0;
};

int run_corpus_build(const CorpusArgs& a) {
    json cfgj = load_config(a.config, a.sets);
    if (a.jobs > 0) cfgj["jobs"] = a.jobs;
    if (a.seed >= 0) cfgj["seed"] = uint64_t(a.seed);
    if (a.base_graphs > 0) cfgj["base_graphs"] = a.base_graphs;
    const CorpusConfig cfg = corpus_config_from_json(cfgj.dump());
    log_event({{"event", "start"}, {"command", "corpus build"}, {"out", a.out}});
    const CorpusManifest m = build_corpus(cfg, a.out);
    log_event({{"event", "corpus"},
               {"base", m.base_count},
               {"split", m.split_count},
               {"dedup", m.dedup_count},
               {"train_records", m.train_records},
               {"val_records", m.val_records}});
    write_manifest((fs::path(a.out) / "run_manifest.json").string(), "corpus build", cfg.seed,
                   json{{"config", a.config}, {"set", a.sets}, {"resolved", cfgj}},
                   {"train.ndjson", "val.ndjson", "manifest.json", "renders/"});
    return 0;
}

struct TrainArgs {
    std::string shards, out, config, target = "all";
    std::vector<std::string> sets;
    int epochs = 0;
    double lr = 0.0;
    int64_t seed = -1;
};

int run_train(const TrainArgs& a) {
    json cfgj = load_config(a.config, a.sets);
    const StackConfig sc = stack_from_json(cfgj.value("stack", json::object()));
    TrainConfig tc = train_from_json(cfgj.value("train", json::object()));
    if (a.epochs > 0) tc.epochs = a.epochs;
    if (a.lr > 0.0) tc.lr = a.lr;
    if (a.seed >= 0) tc.seed = uint64_t(a.seed);
    tc.target = a.target;

    const auto train_set = read_shard((fs::path(a.shards) / "train.ndjson").string());
    const auto val_set = read_shard((fs::path(a.shards) / "val.ndjson").string());
    log_event({{"event", "start"},
               {"command", "train"},
               {"train_records", train_set.size()},
               {"val_records", val_set.size()},
               {"target", tc.target}});

    const OpLibrary& lib = OpLibrary::builtin();
    ModelStack stack(lib, sc, tc.seed);
    const TrainReport rep = train_stack(stack, train_set, val_set, tc, lib,
                                        [](const std::string& line) { std::cerr << line << "\n"; });
    stack.save(a.out);
    log_event({{"event", "trained"},
               {"best_val_node", rep.best_val_node},
               {"best_val_edge", rep.best_val_edge},
               {"best_val_param", rep.best_val_param},
               {"ckpt", a.out}});
    write_manifest(a.out + ".manifest.json", "train", tc.seed,
                   json{{"shards", a.shards},
                        {"config", a.config},
                        {"set", a.sets},
                        {"target", tc.target},
                        {"epochs", tc.epochs}},
                   {a.out});
    return 0;
}

struct GenerateArgs {
    std::string ckpt, out, image, partial;
    bool uncond = false;
    int n = 30;
    uint64_t seed = 0;
    double top_p = 0.9;
    double temperature = 1.0;
    int res = 128;
    uint64_t eval_seed = 0;
    int jobs = 1;
    bool preview = true;
    bool require_partial = false;
};

int run_generate(const GenerateArgs& a) {
    if (!a.uncond && a.image.empty() && !a.require_partial)
        fail("config-parse-error", "generate needs --image or --uncond");
    if (a.require_partial && a.partial.empty())
        fail("config-parse-error", "autocomplete needs --partial");
    const OpLibrary& lib = OpLibrary::builtin();
    ModelStack stack = ModelStack::load(a.ckpt, lib);
    const std::vector<float> cond = condition_vector(a.image, a.uncond);
    std::optional<NodeGraph> partial;
    if (!a.partial.empty()) partial = load_graph(a.partial, lib);

    log_event({{"event", "start"},
               {"command", a.require_partial ? "autocomplete" : "generate"},
               {"n", a.n},
               {"seed", a.seed},
               {"conditional", !a.image.empty()}});

    std::vector<NodeGraph> graphs(size_t(a.n));
    parallel_for(size_t(a.n), a.jobs, [&](size_t i) {
        SamplerConfig sc;
        sc.top_p = a.top_p;
        sc.temperature = a.temperature;
        sc.seed = sample_seed(a.seed, i);
        graphs[i] = sample_graph(stack, cond, sc, lib, partial ? &*partial : nullptr);
    });

    fs::create_directories(a.out);
    std::vector<std::string> outputs;
    for (size_t i = 0; i < graphs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "g_%03zu", i);
        const std::string stem = (fs::path(a.out) / name).string();
        save_graph(stem + ".json", graphs[i], lib);
        outputs.push_back(std::string(name) + ".json");
        if (a.preview) {
            const MaterialMaps maps = evaluate(graphs[i], lib, a.res, a.eval_seed);
            write_png(stem + ".png", render(maps, RenderConfig{}), false);
            outputs.push_back(std::string(name) + ".png");
        }
        log_event({{"event", "sample"},
                   {"index", i},
                   {"nodes", graphs[i].nodes.size()},
                   {"edges", graphs[i].edges.size()}});
    }
    write_manifest((fs::path(a.out) / "run_manifest.json").string(),
                   a.require_partial ? "autocomplete" : "generate", a.seed,
                   json{{"ckpt", a.ckpt},
                        {"image", a.image},
                        {"uncond", a.uncond},
                        {"partial", a.partial},
                        {"n", a.n},
                        {"top_p", a.top_p},
                        {"temperature", a.temperature},
                        {"res", a.res},
                        {"jobs", a.jobs}},
                   outputs);
    return 0;
}

struct RankArgs {
    std::string prompt, graphs, report, config;
    std::vector<std::string> sets;
    int k = 5;
    int res = 0;
    uint64_t eval_seed = 0;
    int jobs = 1;
};

int run_rank(const RankArgs& a) {
    const json cfgj = load_config(a.config, a.sets);
    RankConfig rc;
    rc.metric = metric_from_json(cfgj.value("metric", json::object()));
    rc.render = render_from_json(cfgj.value("render", json::object()));
    rc.resolution = a.res;
    rc.eval_seed = a.eval_seed;
    rc.jobs = a.jobs;

    const ImagePlane prompt = to_channels(read_png(a.prompt), 3);
    const std::vector<std::string> files = list_graph_files(a.graphs);
    log_event({{"event", "start"}, {"command", "rank"}, {"candidates", files.size()}});

    const OpLibrary& lib = OpLibrary::builtin();
    std::vector<NodeGraph> candidates;
    std::vector<int> file_of;                             // candidate index -> file index
    std::vector<std::pair<int, std::string>> load_fails;  // file index -> reason
    for (size_t f = 0; f < files.size(); ++f) {
        try {
            candidates.push_back(load_graph(files[f], lib));
            file_of.push_back(int(f));
        } catch (const Error& e) {
            load_fails.emplace_back(int(f), e.code() + ": " + e.what());
        }
    }
    const RankReport report = rank(candidates, prompt, lib, rc);

    json entries = json::array();
    json top_k = json::array();
    for (size_t r = 0; r < report.ranked.size(); ++r) {
        const RankEntry& e = report.ranked[r];
        const std::string file = fs::path(files[size_t(file_of[size_t(e.index)])]).filename().string();
        entries.push_back({{"file", file}, {"style", e.style}, {"swd", e.swd}});
        if (int(r) < a.k) top_k.push_back(file);
        log_event({{"event", "ranked"}, {"rank", r}, {"file", file}, {"style", e.style}});
    }
    json excluded = json::array();
    for (const auto& [ci, reason] : report.excluded)
        excluded.push_back(
            {{"file", fs::path(files[size_t(file_of[size_t(ci)])]).filename().string()},
             {"reason", reason}});
    for (const auto& [fi, reason] : load_fails)
        excluded.push_back(
            {{"file", fs::path(files[size_t(fi)]).filename().string()}, {"reason", reason}});

    const json out{{"format", "matforge-rank/1"}, {"prompt", a.prompt}, {"k", a.k},
                   {"ranked", entries},           {"top_k", top_k},    {"excluded", excluded}};
    write_text(a.report, out.dump(2) + "\n");
    write_manifest(a.report + ".manifest.json", "rank", a.eval_seed,
                   json{{"prompt", a.prompt},
                        {"graphs", a.graphs},
                        {"k", a.k},
                        {"config", a.config},
                        {"set", a.sets}},
                   {a.report});
    return 0;
}

struct OptimizeArgs {
    std::string graph, target, out, config;
    std::vector<std::string> sets;
    int iters = 200;
    uint64_t seed = 0;
    int res = 0;
    uint64_t eval_seed = 0;
};

int run_optimize(const OptimizeArgs& a) {
    const json cfgj = load_config(a.config, a.sets);
    OptimizeConfig oc;
    oc.metric = metric_from_json(cfgj.value("metric", json::object()));
    oc.render = render_from_json(cfgj.value("render", json::object()));
    oc.c_rel = cfgj.value("c_rel", oc.c_rel);
    oc.lr_rel = cfgj.value("lr_rel", oc.lr_rel);
    oc.lr_decay = cfgj.value("lr_decay", oc.lr_decay);
    oc.iters = a.iters;
    oc.seed = a.seed;
    oc.resolution = a.res;
    oc.eval_seed = a.eval_seed;

    const OpLibrary& lib = OpLibrary::builtin();
    const NodeGraph g = load_graph(a.graph, lib);
    const ImagePlane target = to_channels(read_png(a.target), 3);
    log_event({{"event", "start"}, {"command", "optimize"}, {"iters", a.iters}});

    const OptimizeResult res = optimize_params(g, target, lib, oc);
    save_graph(a.out, res.graph, lib);
    log_event({{"event", "optimized"},
               {"initial", res.initial_score},
               {"best", res.best_score},
               {"out", a.out}});
    write_manifest(a.out + ".manifest.json", "optimize", a.seed,
                   json{{"graph", a.graph},
                        {"target", a.target},
                        {"iters", a.iters},
                        {"config", a.config},
                        {"set", a.sets},
                        {"initial_score", res.initial_score},
                        {"best_score", res.best_score}},
                   {a.out});
    return 0;
}

struct RenderArgs {
    std::string graph, out;
    int res = 128;
    uint64_t eval_seed = 0;
};

int run_render(const RenderArgs& a) {
    const OpLibrary& lib = OpLibrary::builtin();
    const NodeGraph g = load_graph(a.graph, lib);
    const MaterialMaps maps = evaluate(g, lib, a.res, a.eval_seed);
    if (fs::path(a.out).has_parent_path())
        fs::create_directories(fs::path(a.out).parent_path());
    save_material_maps(a.out, maps);
    write_png(a.out + "_render.png", render(maps, RenderConfig{}), false);
    log_event({{"event", "rendered"}, {"stem", a.out}, {"res", a.res}});
    write_manifest(a.out + ".manifest.json", "render", a.eval_seed,
                   json{{"graph", a.graph}, {"res", a.res}},
                   {a.out + "_albedo.png", a.out + "_normal.png", a.out + "_roughness.png",
                    a.out + "_metallic.png", a.out + "_render.png"});
    return 0;
}

int run_validate(const std::string& path) {
    const OpLibrary& lib = OpLibrary::builtin();
    const NodeGraph g = load_graph(path, lib);
    const ValidationReport report = validate_graph(g, lib);
    if (!report.ok) {
        json violations = json::array();
        for (const Violation& v : report.violations)
            violations.push_back({{"rule", v.rule}, {"message", v.message}});
        std::cerr << json{{"event", "error"},
                          {"code", "validation-failed"},
                          {"file", path},
                          {"violations", violations}}
                         .dump()
                  << "\n";
        return 1;
    }
    log_event({{"event", "validated"}, {"file", path}, {"ok", true}});
    return 0;
}

struct CodecArgs {
    std::string in, out;
    int bins = tok::kBins;
};

int run_encode(const CodecArgs& a) {
    const OpLibrary& lib = OpLibrary::builtin();
    const NodeGraph g = load_graph(a.in, lib);
    const TokenizedGraph tg = encode(g, lib, a.bins);
    write_text(a.out, tokens_to_json(tg, a.bins).dump(2) + "\n");
    log_event({{"event", "encoded"},
               {"node_tokens", tg.node_seq.size()},
               {"edge_tokens", tg.edge_seq.size()},
               {"param_tokens", tg.param_seq.size()}});
    write_manifest(a.out + ".manifest.json", "encode", 0,
                   json{{"graph", a.in}, {"bins", a.bins}}, {a.out});
    return 0;
}

int run_decode(const CodecArgs& a) {
    const OpLibrary& lib = OpLibrary::builtin();
    const auto [tg, bins] = tokens_from_json(parse_json(read_text(a.in), a.in), a.in);
    const NodeGraph g = decode(tg, lib, bins);
    save_graph(a.out, g, lib);
    log_event({{"event", "decoded"}, {"nodes", g.nodes.size()}, {"edges", g.edges.size()}});
    write_manifest(a.out + ".manifest.json", "decode", 0, json{{"tokens", a.in}, {"bins", bins}},
                   {a.out});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"procedural material graph toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    // corpus build
    auto corpus_args = std::make_shared<CorpusArgs>();
    CLI::App* corpus_cmd = app.add_subcommand("corpus", "dataset pipeline");
    corpus_cmd->require_subcommand(1);
    CLI::App* corpus_build = corpus_cmd->add_subcommand("build", "generate corpus and token shards");
    corpus_build->add_option("--config", corpus_args->config, "corpus config JSON");
    corpus_build->add_option("--out", corpus_args->out, "output directory")->required();
    corpus_build->add_option("--set", corpus_args->sets, "config override key=value");
    corpus_build->add_option("--jobs", corpus_args->jobs, "worker threads");
    corpus_build->add_option("--seed", corpus_args->seed, "corpus seed");
    corpus_build->add_option("--base-graphs", corpus_args->base_graphs, "number of base graphs");
    corpus_build->callback([&] { exit_code = run_corpus_build(*corpus_args); });

    // train
    auto train_args = std::make_shared<TrainArgs>();
    CLI::App* train_cmd = app.add_subcommand("train", "train the generator stack");
    train_cmd->add_option("--shards", train_args->shards, "shard directory")->required();
    train_cmd->add_option("--out", train_args->out, "checkpoint path")->required();
    train_cmd->add_option("--config", train_args->config, "train config JSON");
    train_cmd->add_option("--set", train_args->sets, "config override key=value");
    train_cmd->add_option("--model", train_args->target, "node|edge|param|all");
    train_cmd->add_option("--epochs", train_args->epochs, "epoch count");
    train_cmd->add_option("--lr", train_args->lr, "learning rate");
    train_cmd->add_option("--seed", train_args->seed, "training seed");
    train_cmd->callback([&] { exit_code = run_train(*train_args); });

    // generate / autocomplete
    auto gen_args = std::make_shared<GenerateArgs>();
    CLI::App* gen_cmd = app.add_subcommand("generate", "sample graphs from a checkpoint");
    auto add_gen_options = [](CLI::App* cmd, GenerateArgs& ga, bool partial_required) {
        cmd->add_option("--ckpt", ga.ckpt, "checkpoint path")->required();
        cmd->add_option("--out", ga.out, "output directory")->required();
        cmd->add_option("--image", ga.image, "prompt image (PNG)");
        cmd->add_flag("--uncond", ga.uncond, "sample with a zero condition vector");
        auto* popt = cmd->add_option("--partial", ga.partial, "partial graph JSON to complete");
        if (partial_required) popt->required();
        cmd->add_option("--n", ga.n, "number of samples");
        cmd->add_option("--seed", ga.seed, "sampling seed");
        cmd->add_option("--top-p", ga.top_p, "nucleus mass");
        cmd->add_option("--temperature", ga.temperature, "softmax temperature");
        cmd->add_option("--res", ga.res, "preview render resolution");
        cmd->add_option("--eval-seed", ga.eval_seed, "graph evaluation seed");
        cmd->add_option("--jobs", ga.jobs, "worker threads");
        cmd->add_flag("!--no-preview", ga.preview, "skip preview renders");
    };
    add_gen_options(gen_cmd, *gen_args, false);
    gen_cmd->callback([&] { exit_code = run_generate(*gen_args); });

    auto auto_args = std::make_shared<GenerateArgs>();
    auto_args->require_partial = true;
    CLI::App* auto_cmd = app.add_subcommand("autocomplete", "complete a partial graph");
    add_gen_options(auto_cmd, *auto_args, true);
    auto_cmd->callback([&] { exit_code = run_generate(*auto_args); });

    // rank
    auto rank_args = std::make_shared<RankArgs>();
    CLI::App* rank_cmd = app.add_subcommand("rank", "rank candidate graphs against a prompt");
    rank_cmd->add_option("--prompt", rank_args->prompt, "prompt image (PNG)")->required();
    rank_cmd->add_option("--graphs", rank_args->graphs, "directory of graph JSON files")->required();
    rank_cmd->add_option("--k", rank_args->k, "top-k size");
    rank_cmd->add_option("--report", rank_args->report, "report JSON path")->required();
    rank_cmd->add_option("--config", rank_args->config, "metric config JSON");
    rank_cmd->add_option("--set", rank_args->sets, "config override key=value");
    rank_cmd->add_option("--res", rank_args->res, "evaluation resolution (0 = prompt's)");
    rank_cmd->add_option("--eval-seed", rank_args->eval_seed, "graph evaluation seed");
    rank_cmd->add_option("--jobs", rank_args->jobs, "worker threads");
    rank_cmd->callback([&] { exit_code = run_rank(*rank_args); });

    // optimize
    auto opt_args = std::make_shared<OptimizeArgs>();
    CLI::App* opt_cmd = app.add_subcommand("optimize", "refine parameters toward a target image");
    opt_cmd->add_option("--graph", opt_args->graph, "graph JSON")->required();
    opt_cmd->add_option("--target", opt_args->target, "target image (PNG)")->required();
    opt_cmd->add_option("--iters", opt_args->iters, "iteration count");
    opt_cmd->add_option("--out", opt_args->out, "output graph JSON")->required();
    opt_cmd->add_option("--config", opt_args->config, "optimizer config JSON");
    opt_cmd->add_option("--set", opt_args->sets, "config override key=value");
    opt_cmd->add_option("--seed", opt_args->seed, "perturbation seed");
    opt_cmd->add_option("--res", opt_args->res, "evaluation resolution (0 = target's)");
    opt_cmd->add_option("--eval-seed", opt_args->eval_seed, "graph evaluation seed");
    opt_cmd->callback([&] { exit_code = run_optimize(*opt_args); });

    // render
    auto render_args = std::make_shared<RenderArgs>();
    CLI::App* render_cmd = app.add_subcommand("render", "evaluate a graph and write its maps");
    render_cmd->add_option("--graph", render_args->graph, "graph JSON")->required();
    render_cmd->add_option("--out", render_args->out, "output stem")->required();
    render_cmd->add_option("--res", render_args->res, "resolution");
    render_cmd->add_option("--eval-seed", render_args->eval_seed, "graph evaluation seed");
    render_cmd->callback([&] { exit_code = run_render(*render_args); });

    // validate
    auto validate_path = std::make_shared<std::string>();
    CLI::App* validate_cmd = app.add_subcommand("validate", "validate a graph JSON file");
    validate_cmd->add_option("graph", *validate_path, "graph JSON")->required();
    validate_cmd->callback([&] { exit_code = run_validate(*validate_path); });

    // encode / decode
    auto encode_args = std::make_shared<CodecArgs>();
    CLI::App* encode_cmd = app.add_subcommand("encode", "graph JSON -> token streams");
    encode_cmd->add_option("--graph", encode_args->in, "graph JSON")->required();
    encode_cmd->add_option("--out", encode_args->out, "token JSON path")->required();
    encode_cmd->add_option("--bins", encode_args->bins, "quantization bins");
    encode_cmd->callback([&] { exit_code = run_encode(*encode_args); });

    auto decode_args = std::make_shared<CodecArgs>();
    CLI::App* decode_cmd = app.add_subcommand("decode", "token streams -> graph JSON");
    decode_cmd->add_option("--tokens", decode_args->in, "token JSON path")->required();
    decode_cmd->add_option("--out", decode_args->out, "graph JSON path")->required();
    decode_cmd->callback([&] { exit_code = run_decode(*decode_args); });

    const CLI::App* scope = &app;
    for (int i = 1; i < argc && argv[i][0] != '-' && !scope->get_subcommands({}).empty(); ++i) {
        const CLI::App* next = scope->get_subcommand_no_throw(argv[i]);
        if (next == nullptr)
            fail("unknown-subcommand", std::string("unknown subcommand '") + argv[i] + "'");
        scope = next;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ExtrasError& e) {
        fail("unknown-subcommand", e.what());
    } catch (const CLI::ParseError& e) {
        fail("config-parse-error", e.what());
    } catch (const Error& e) {
        fail(e.code(), e.what());
    } catch (const std::exception& e) {
        fail("internal-error", e.what());
    }
    return exit_code;
}
