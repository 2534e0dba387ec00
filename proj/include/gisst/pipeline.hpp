#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gisst/explain.hpp"
#include "gisst/graph.hpp"
#include "gisst/model.hpp"

namespace gisst {

inline constexpr const char* kVersion = "0.1.0";
/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "GISST_OUTPUT_ROOT";

/// $GISST_OUTPUT_ROOT when set and non-empty, otherwise "runs".
std::filesystem::path default_output_root();

/// End-to-end evaluation settings.
struct RunConfig {
    std::vector<DatasetKind> datasets{DatasetKind::NoisyBAHouse, DatasetKind::NoisyBACommunity,
                                      DatasetKind::NoisyTreeCycle, DatasetKind::NoisyTreeGrid};
    std::uint64_t data_seed = 1;
    std::uint64_t train_seed = 1;
    ModelConfig model = default_model(true);
    ModelConfig baseline = default_model(false);  // plain GCN for grad and mask-opt
    std::size_t ba_layers = 3;
    std::size_t tree_layers = 4;
    std::vector<Method> methods{Method::GisstGlobal, Method::GisstGrad, Method::Grad, Method::MaskOpt};
    std::string output_dir;  // empty: default_output_root()
    std::optional<std::size_t> motif_size;
    std::size_t top_k = 40;
    std::size_t parallel = 1;

    /// GISST: library defaults with l1_feat = 0.005. Plain GCN: no importance penalties.
    static ModelConfig default_model(bool gisst);
    /// Model config for `kind` with the per-family layer count applied.
    ModelConfig model_for(DatasetKind kind, bool gisst) const;
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

/// Every field is written, so to_json(from_json(j)) is the normalised form of j.
nlohmann::json run_config_to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys throw precondition_error.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Audit record kept as manifest.json in a run directory. Each command owns one stage entry,
/// holding its parameters and the SHA-256 of each file it wrote (paths relative to the directory).
class Manifest {
public:
    /// Loads `dir`/manifest.json when it exists.
    static Manifest open(const std::filesystem::path& dir);

    void set_stage(const std::string& stage, nlohmann::json parameters);
    /// Hashes `file` (must live under the manifest directory) into the current stage.
    void add_file(const std::filesystem::path& file);
    /// Writes manifest.json.
    void save() const;

    const nlohmann::json& json() const { return doc_; }
    const std::filesystem::path& directory() const { return dir_; }

private:
    std::filesystem::path dir_;
    nlohmann::json doc_;
    std::string stage_;
};

/// The file names written per target by the explain command.
std::string explanation_file_name(std::size_t target);

/// Reads every explanation in `dir` (files named by explanation_file_name), ordered by target.
std::vector<Explanation> load_explanations(const std::filesystem::path& dir);

}  // namespace gisst
