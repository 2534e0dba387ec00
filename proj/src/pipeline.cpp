#include "gisst/pipeline.hpp"

#include <cstdlib>
#include <regex>

#include "gisst/json_util.hpp"

namespace gisst {

namespace fs = std::filesystem;
using json = nlohmann::json;

fs::path default_output_root() {
    const char* root = std::getenv(kOutputRootEnv);
    return root && *root ? fs::path(root) : fs::path("runs");
}

ModelConfig RunConfig::default_model(bool gisst) {
    ModelConfig c;
    c.gisst = gisst;
    if (gisst) {
        c.l1_feat = 0.005;
    } else {
        c.l1_edge = c.ent_edge = c.l1_feat = c.ent_feat = 0.0;
    }
    return c;
}

ModelConfig RunConfig::model_for(DatasetKind kind, bool gisst) const {
    ModelConfig c = gisst ? model : baseline;
    const bool tree = kind == DatasetKind::NoisyTreeCycle || kind == DatasetKind::NoisyTreeGrid;
    c.num_layers = tree ? tree_layers : ba_layers;
    return c;
}

void RunConfig::validate() const {
    model.validate();
    baseline.validate();
    if (!model.gisst) throw precondition_error("run config: model must be a GISST config");
    if (baseline.gisst) throw precondition_error("run config: baseline must be a plain GCN config");
    if (ba_layers < 1 || tree_layers < 1) throw precondition_error("run config: layer counts must be >= 1");
    if (motif_size && *motif_size < 2) throw precondition_error("run config: motif_size must be >= 2");
    if (top_k < 1) throw precondition_error("run config: top_k must be >= 1");
    if (parallel < 1) throw precondition_error("run config: parallel must be >= 1");
}

namespace {

/// Keys present in `overrides` replace the run defaults for that model kind.
ModelConfig merged_config(bool gisst, const json& overrides) {
    if (!overrides.is_object()) throw precondition_error("model config must be a JSON object");
    json merged = config_to_json(RunConfig::default_model(gisst));
    for (const auto& [k, v] : overrides.items()) merged[k] = v;
    return config_from_json(merged);
}

}  // namespace

json run_config_to_json(const RunConfig& c) {
    json datasets = json::array(), methods = json::array();
    for (auto k : c.datasets) datasets.push_back(std::string(kind_name(k)));
    for (auto m : c.methods) methods.push_back(std::string(method_name(m)));
    return {{"datasets", datasets},
            {"data_seed", c.data_seed},
            {"train_seed", c.train_seed},
            {"model", config_to_json(c.model)},
            {"baseline", config_to_json(c.baseline)},
            {"ba_layers", c.ba_layers},
            {"tree_layers", c.tree_layers},
            {"methods", methods},
            {"output_dir", c.output_dir},
            {"motif_size", c.motif_size ? json(*c.motif_size) : json(nullptr)},
            {"top_k", c.top_k},
            {"parallel", c.parallel}};
}

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw precondition_error("run config must be a JSON object");
    RunConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "datasets") {
                c.datasets.clear();
                for (const auto& k : value) c.datasets.push_back(parse_kind(k.get<std::string>()));
            } else if (key == "data_seed") {
                c.data_seed = value.get<std::uint64_t>();
            } else if (key == "train_seed") {
                c.train_seed = value.get<std::uint64_t>();
            } else if (key == "model") {
                c.model = merged_config(true, value);
            } else if (key == "baseline") {
                c.baseline = merged_config(false, value);
            } else if (key == "ba_layers") {
                c.ba_layers = value.get<std::size_t>();
            } else if (key == "tree_layers") {
                c.tree_layers = value.get<std::size_t>();
            } else if (key == "methods") {
                c.methods.clear();
                for (const auto& m : value) c.methods.push_back(parse_method(m.get<std::string>()));
            } else if (key == "output_dir") {
                c.output_dir = value.get<std::string>();
            } else if (key == "motif_size") {
                if (value.is_null()) c.motif_size.reset();
                else c.motif_size = value.get<std::size_t>();
            } else if (key == "top_k") {
                c.top_k = value.get<std::size_t>();
            } else if (key == "parallel") {
                c.parallel = value.get<std::size_t>();
            } else {
                throw precondition_error("unknown run config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw precondition_error(std::string("malformed run config: ") + e.what());
    }
    c.validate();
    return c;
}

Manifest Manifest::open(const fs::path& dir) {
    Manifest m;
    m.dir_ = dir;
    const fs::path file = dir / "manifest.json";
    if (fs::exists(file)) {
        m.doc_ = nlohmann::json::parse(read_text_file(file));
    } else {
        m.doc_ = {{"tool", "gisst"}, {"version", kVersion}, {"stages", nlohmann::json::object()}};
    }
    return m;
}

void Manifest::set_stage(const std::string& stage, nlohmann::json parameters) {
    stage_ = stage;
    doc_["version"] = kVersion;
    doc_["stages"][stage] = {{"parameters", std::move(parameters)}, {"files", nlohmann::json::object()}};
}

void Manifest::add_file(const fs::path& file) {
    if (stage_.empty()) throw precondition_error("manifest: no stage selected");
    const fs::path rel = fs::relative(file, dir_);
    if (rel.empty() || *rel.begin() == "..") {
        throw precondition_error("manifest: " + file.string() + " is outside " + dir_.string());
    }
    doc_["stages"][stage_]["files"][rel.generic_string()] = sha256_hex(read_text_file(file));
}

void Manifest::save() const { write_text_file(dir_ / "manifest.json", doc_.dump(2) + "\n"); }

std::string explanation_file_name(std::size_t target) { return "node_" + std::to_string(target) + ".json"; }

std::vector<Explanation> load_explanations(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw precondition_error("no explanation directory " + dir.string());
    static const std::regex name(R"(node_(\d+)\.json)");
    std::vector<std::pair<std::size_t, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch match;
        const std::string file = entry.path().filename().string();
        if (std::regex_match(file, match, name)) files.emplace_back(std::stoull(match[1].str()), entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Explanation> out;
    for (const auto& [target, path] : files) out.push_back(explanation_from_json(read_text_file(path)));
    return out;
}

}  // namespace gisst
