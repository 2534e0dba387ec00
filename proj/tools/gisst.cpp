// gisst: generate synthetic benchmarks, train models, explain and evaluate.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gisst/explain.hpp"
#include "gisst/graph.hpp"
#include "gisst/json_util.hpp"
#include "gisst/model.hpp"
#include "gisst/pipeline.hpp"
#include "gisst/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gisst;

namespace {

fs::path resolve_dir(const std::string& out, const std::string& command) {
    return out.empty() ? default_output_root() / command : fs::path(out);
}

/// Writes `text` to `path` and records it in the manifest.
void emit(Manifest& manifest, const fs::path& path, const std::string& text) {
    write_text_file(path, text);
    manifest.add_file(path);
}

// generate -------------------------------------------------------------------

struct GenerateArgs {
    std::string kind;
    std::uint64_t seed = 0;
    std::string out;
    std::optional<std::size_t> base_nodes, motifs;
};

int run_generate(const GenerateArgs& a) {
    DatasetSpec spec = DatasetSpec::defaults(parse_kind(a.kind), a.seed);
    if (a.base_nodes) spec.base_nodes = *a.base_nodes;
    if (a.motifs) spec.num_motifs = *a.motifs;
    const Dataset ds = generate(spec);
    const fs::path path = a.out.empty() ? default_output_root() / "generate" / (a.kind + ".json") : fs::path(a.out);
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    Manifest manifest = Manifest::open(dir);
    manifest.set_stage("generate:" + path.filename().string(),
                       {{"kind", a.kind}, {"seed", a.seed}, {"base_nodes", spec.base_nodes}, {"motifs", spec.num_motifs}});
    emit(manifest, path, dataset_to_json(ds));
    manifest.save();
    std::cout << "wrote " << path.string() << " (" << ds.graph.num_nodes << " nodes, " << ds.graph.undirected.size()
              << " edges)\n";
    return 0;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
    std::string dataset;
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::optional<std::size_t> epochs, layers, hidden;
    std::optional<double> lr;
    bool plain = false;
};

int run_train(const TrainArgs& a) {
    const Dataset ds = load_dataset(a.dataset);
    json cfg = config_to_json(RunConfig::default_model(!a.plain));
    if (!a.config.empty()) {
        const json overrides = json::parse(read_text_file(a.config));
        for (const auto& [k, v] : overrides.items()) cfg[k] = v;
    }
    if (a.plain) cfg["gisst"] = false;
    if (a.epochs) cfg["epochs"] = *a.epochs;
    if (a.layers) cfg["num_layers"] = *a.layers;
    if (a.hidden) cfg["hidden_units"] = *a.hidden;
    if (a.lr) cfg["learning_rate"] = *a.lr;
    const ModelConfig config = config_from_json(cfg);
    config.validate();

    const TrainReport report = train(ds.graph, config, a.seed);
    const fs::path dir = resolve_dir(a.out, "train");
    Manifest manifest = Manifest::open(dir);
    manifest.set_stage("train", {{"dataset", fs::path(a.dataset).filename().string()},
                                 {"dataset_sha256", sha256_hex(read_text_file(a.dataset))},
                                 {"seed", a.seed},
                                 {"config", config_to_json(config)}});
    emit(manifest, dir / "model.json", model_to_json(report.model));
    emit(manifest, dir / "report.json", report_to_json(report));
    emit(manifest, dir / "metrics.csv", report_to_csv(report));
    manifest.save();
    std::cout << "train_acc " << report.train_acc << " val_acc " << report.val_acc << " test_acc " << report.test_acc
              << "\n";
    return 0;
}

// explain --------------------------------------------------------------------

struct ExplainArgs {
    std::string checkpoint;
    std::string dataset;
    std::string method;
    std::vector<std::size_t> targets;
    bool all_test_motifs = false;
    bool dot = false;
    std::optional<std::size_t> motif_size;
    std::size_t parallel = 1;
    std::string out;
};

std::vector<std::size_t> test_motif_nodes(const Dataset& ds) {
    std::set<std::size_t> motif;
    for (const auto& m : ds.truth.motif_nodes) motif.insert(m.begin(), m.end());
    std::vector<std::size_t> out;
    for (auto v : ds.graph.masks.test) {
        if (motif.count(v)) out.push_back(v);
    }
    return out;
}

int run_explain(const ExplainArgs& a) {
    const Dataset ds = load_dataset(a.dataset);
    const Model model = load_model(a.checkpoint);
    const Method method = parse_method(a.method);
    if (needs_gisst_model(method) != model.gisst.has_value()) {
        throw precondition_error("method " + a.method + " cannot explain a " + (model.gisst ? "GISST" : "plain GCN") +
                                 " checkpoint");
    }
    const std::vector<std::size_t> targets = a.all_test_motifs ? test_motif_nodes(ds) : a.targets;
    if (targets.empty()) throw precondition_error("no targets (use --target or --all-test-motifs)");

    Dataset subset = ds;
    subset.graph.masks.test = targets;
    EvaluationOptions options;
    options.threads = a.parallel;
    const auto explanations = explain_test_nodes(method, model, subset, options);

    const fs::path dir = resolve_dir(a.out, "explain");
    const fs::path method_dir = dir / a.method;
    Manifest manifest = Manifest::open(dir);
    manifest.set_stage("explain:" + a.method, {{"checkpoint_sha256", sha256_hex(read_text_file(a.checkpoint))},
                                               {"dataset_sha256", sha256_hex(read_text_file(a.dataset))},
                                               {"targets", targets}});
    const std::size_t vm = a.motif_size.value_or(ds.truth.motif_size);
    for (const auto& ex : explanations) {
        const fs::path file = method_dir / explanation_file_name(ex.targets.front());
        emit(manifest, file, explanation_to_json(ex));
        if (a.dot) {
            fs::path dot_file = file;
            dot_file.replace_extension(".dot");
            emit(manifest, dot_file, to_dot(ex, extract_subgraph(ex, vm), ds.truth));
        }
    }
    manifest.save();
    std::cout << "wrote " << explanations.size() << " explanations to " << method_dir.string() << "\n";
    return 0;
}

// evaluate -------------------------------------------------------------------

struct EvaluateArgs {
    std::string config;
    std::string dataset;       // with --explanations
    std::string explanations;  // directory holding one sub-directory per method
    std::vector<std::string> datasets;
    std::vector<std::string> methods;
    bool methods_given = false;
    std::optional<std::uint64_t> data_seed, train_seed;
    std::optional<std::size_t> epochs, motif_size, top_k;
    std::size_t parallel = 1;
    std::string out;
};

std::vector<MetricRow> evaluate_from_files(const EvaluateArgs& a, const std::vector<Method>& methods,
                                           const EvaluationOptions& options) {
    const Dataset ds = load_dataset(a.dataset);
    std::vector<MetricRow> rows;
    for (auto m : methods) {
        auto explanations = load_explanations(fs::path(a.explanations) / std::string(method_name(m)));
        if (explanations.empty()) throw precondition_error("no explanations for " + std::string(method_name(m)));
        // the feature ranking covers the saved targets; edge metrics keep the motif ones
        auto r = evaluate_explanations(m, ds, explanations, options);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
}

int run_evaluate(const EvaluateArgs& a) {
    RunConfig rc;
    if (!a.config.empty()) rc = run_config_from_json(json::parse(read_text_file(a.config)));
    if (!a.datasets.empty()) {
        rc.datasets.clear();
        for (const auto& k : a.datasets) rc.datasets.push_back(parse_kind(k));
    }
    if (a.methods_given) {
        rc.methods.clear();
        for (const auto& m : a.methods) {
            if (!m.empty()) rc.methods.push_back(parse_method(m));
        }
    }
    if (a.data_seed) rc.data_seed = *a.data_seed;
    if (a.train_seed) rc.train_seed = *a.train_seed;
    if (a.epochs) rc.model.epochs = rc.baseline.epochs = *a.epochs;
    if (a.motif_size) rc.motif_size = *a.motif_size;
    if (a.top_k) rc.top_k = *a.top_k;
    if (a.parallel != 1) rc.parallel = a.parallel;
    if (!a.out.empty()) rc.output_dir = a.out;
    rc.validate();

    EvaluationOptions options;
    options.motif_size = rc.motif_size;
    options.top_k = rc.top_k;
    options.threads = rc.parallel;

    const fs::path dir = rc.output_dir.empty() ? default_output_root() / "evaluate" : fs::path(rc.output_dir);
    Manifest manifest = Manifest::open(dir);
    std::vector<MetricRow> rows;

    if (!a.explanations.empty()) {
        if (a.dataset.empty()) throw precondition_error("--explanations needs --dataset");
        manifest.set_stage("evaluate", {{"dataset_sha256", sha256_hex(read_text_file(a.dataset))},
                                        {"run_config", run_config_to_json(rc)}});
        rows = evaluate_from_files(a, rc.methods, options);
    } else {
        manifest.set_stage("evaluate", {{"run_config", run_config_to_json(rc)}});
        emit(manifest, dir / "run_config.json", run_config_to_json(rc).dump(2) + "\n");
        bool any_gisst = false, any_plain = false;
        for (auto m : rc.methods) (needs_gisst_model(m) ? any_gisst : any_plain) = true;
        for (auto kind : rc.datasets) {
            const std::string name(kind_name(kind));
            const Dataset ds = generate(DatasetSpec::defaults(kind, rc.data_seed));
            emit(manifest, dir / name / "dataset.json", dataset_to_json(ds));
            std::optional<Model> gisst_model, plain_model;
            if (any_gisst) {
                auto report = train(ds.graph, rc.model_for(kind, true), rc.train_seed);
                emit(manifest, dir / name / "gisst_model.json", model_to_json(report.model));
                emit(manifest, dir / name / "gisst_report.json", report_to_json(report));
                std::cerr << name << " gisst test_acc " << report.test_acc << "\n";
                gisst_model = std::move(report.model);
            }
            if (any_plain) {
                auto report = train(ds.graph, rc.model_for(kind, false), rc.train_seed);
                emit(manifest, dir / name / "gcn_model.json", model_to_json(report.model));
                emit(manifest, dir / name / "gcn_report.json", report_to_json(report));
                std::cerr << name << " gcn test_acc " << report.test_acc << "\n";
                plain_model = std::move(report.model);
            }
            for (auto m : rc.methods) {
                const Model& model = needs_gisst_model(m) ? *gisst_model : *plain_model;
                const auto explanations = explain_test_nodes(m, model, ds, options);
                const fs::path method_dir = dir / name / "explanations" / std::string(method_name(m));
                for (const auto& ex : explanations) {
                    emit(manifest, method_dir / explanation_file_name(ex.targets.front()), explanation_to_json(ex));
                }
                auto r = evaluate_explanations(m, ds, explanations, options);
                rows.insert(rows.end(), r.begin(), r.end());
            }
        }
    }
    const std::string csv = metrics_to_csv(rows);
    emit(manifest, dir / "metrics.csv", csv);
    manifest.save();
    std::cout << csv;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse edge and feature importance for graph neural networks"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Generate a synthetic benchmark dataset");
    g->add_option("--kind", gen.kind, "noisy-ba-house | noisy-ba-community | noisy-tree-cycle | noisy-tree-grid")
        ->required();
    g->add_option("--seed", gen.seed, "Data seed")->required();
    g->add_option("-o,--out", gen.out, "Output dataset JSON");
    g->add_option("--base-nodes", gen.base_nodes, "Base graph size override");
    g->add_option("--motifs", gen.motifs, "Motif count override");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a GISST model or a plain GCN");
    t->add_option("--dataset", tr.dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);
    t->add_option("--seed", tr.seed, "Training seed")->required();
    t->add_option("--config", tr.config, "Model config JSON")->check(CLI::ExistingFile);
    t->add_option("-o,--out", tr.out, "Output directory");
    t->add_option("--epochs", tr.epochs);
    t->add_option("--layers", tr.layers);
    t->add_option("--hidden", tr.hidden);
    t->add_option("--lr", tr.lr);
    t->add_flag("--plain", tr.plain, "Plain GCN without the importance layer");

    ExplainArgs ex;
    auto* e = app.add_subcommand("explain", "Explain predictions of a trained model");
    e->add_option("--checkpoint", ex.checkpoint, "Model JSON")->required()->check(CLI::ExistingFile);
    e->add_option("--dataset", ex.dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);
    e->add_option("--method", ex.method, "gisst-global | gisst-grad | grad | mask-opt")->required();
    auto* target_opt = e->add_option("--target", ex.targets, "Target node id(s)");
    auto* motif_opt = e->add_flag("--all-test-motifs", ex.all_test_motifs, "Every motif node in the test split");
    target_opt->excludes(motif_opt);
    e->add_flag("--dot", ex.dot, "Also write DOT files");
    e->add_option("--motif-size", ex.motif_size, "V_M override for the DOT extraction");
    e->add_option("--parallel", ex.parallel, "Worker threads")->check(CLI::PositiveNumber);
    e->add_option("-o,--out", ex.out, "Output directory");

    EvaluateArgs ev;
    auto* v = app.add_subcommand("evaluate", "Score explanations against ground truth");
    v->add_option("--config", ev.config, "Run config JSON")->check(CLI::ExistingFile);
    v->add_option("--dataset", ev.dataset, "Dataset JSON (with --explanations)")->check(CLI::ExistingFile);
    v->add_option("--explanations", ev.explanations, "Directory written by explain");
    v->add_option("--datasets", ev.datasets, "Dataset kinds for an end-to-end run");
    auto* methods_opt = v->add_option("--methods", ev.methods, "Methods (may be empty)")->expected(0, -1);
    v->add_option("--data-seed", ev.data_seed);
    v->add_option("--train-seed", ev.train_seed);
    v->add_option("--epochs", ev.epochs);
    v->add_option("--motif-size", ev.motif_size);
    v->add_option("--top-k", ev.top_k);
    v->add_option("--parallel", ev.parallel, "Worker threads for explanation targets")->check(CLI::PositiveNumber);
    v->add_option("-o,--out", ev.out, "Output directory");

    CLI11_PARSE(app, argc, argv);
    ev.methods_given = methods_opt->count() > 0;

    try {
        if (*g) return run_generate(gen);
        if (*t) return run_train(tr);
        if (*e) return run_explain(ex);
        if (*v) return run_evaluate(ev);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 1;
}
