#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gisst/autodiff.hpp"
#include "gisst/graph.hpp"
#include "gisst/random.hpp"
#include "gisst/tensor.hpp"

namespace gisst {

struct ModelConfig {
    std::size_t hidden_units = 32;
    std::size_t num_layers = 3;  // graph convolution layers, the last one emits class logits
    double dropout = 0.1;
    double learning_rate = 0.005;
    double l2_penalty = 0.0005;
    double l1_edge = 0.005;
    double ent_edge = 0.01;
    double l1_feat = 0.0005;
    double ent_feat = 0.001;
    std::size_t epochs = 1000;
    bool gisst = true;  // false trains a plain GCN (used by the Grad and mask-optimisation baselines)

    /// Throws precondition_error when a rate or coefficient is out of range.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Per-edge-type attention parameters.
struct TypedEdgeParams {
    Tensor b;                // [2d]
    std::optional<Tensor> a; // [h]
    bool operator==(const TypedEdgeParams&) const = default;
};

/// Importance parameters: feature logits m, edge attention weights b and the optional
/// edge-attribute extensions (coefficients a, or one {b, a} set per edge type).
struct GisstParams {
    Tensor m;                 // [d]
    Tensor b;                 // [2d]
    std::optional<Tensor> a;  // [h]
    std::vector<TypedEdgeParams> typed;

    bool operator==(const GisstParams&) const = default;
};

/// Optional per-directed-edge attributes, aligned with Graph::edges.
struct EdgeAttributes {
    std::optional<Tensor> features;   // [E x h]
    std::vector<std::size_t> types;   // empty, or one type id per directed edge
};

struct GcnLayer {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]
    bool operator==(const GcnLayer&) const = default;
};

struct GcnStack {
    std::vector<GcnLayer> layers;

    /// d -> hidden -> ... -> classes, Xavier-uniform weights and zero biases.
    static GcnStack init(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, std::size_t num_layers, Rng& rng);
    bool operator==(const GcnStack&) const = default;
};

struct Model {
    ModelConfig config;
    GcnStack stack;
    std::optional<GisstParams> gisst;
    std::uint64_t seed = 0;
    std::size_t num_features = 0;
    std::size_t num_classes = 0;

    /// edge_feature_dim > 0 adds coefficients a; num_edge_types > 0 adds one parameter set per type.
    static Model init(const ModelConfig& config, std::size_t num_features, std::size_t num_classes, std::uint64_t seed,
                      std::size_t edge_feature_dim = 0, std::size_t num_edge_types = 0);

    bool operator==(const Model&) const = default;
};

/// Uniform on +-sqrt(6 / (fan_in + fan_out)). Rank-1 shapes are treated as [n x 1].
Tensor xavier_init(const Shape& shape, Rng& rng);
Tensor xavier_init(const Shape& shape, std::uint64_t seed);

// Tape-level building blocks ------------------------------------------------

struct GisstVars {
    ad::Var m;
    ad::Var b;
    std::optional<ad::Var> a;
    std::vector<std::pair<ad::Var, std::optional<ad::Var>>> typed;
};

struct ModelVars {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
    std::optional<GisstVars> gisst;
};

/// Places the model's parameters on a tape.
ModelVars bind(ad::Tape& tape, const Model& model, bool requires_grad);

/// p = sigmoid(m); one probability per feature shared by all nodes.
ad::Var feature_probs(const GisstVars& params);

/// sigmoid([x_i * p || x_j * p]^T b (+ z_ij^T a)) for every directed edge i -> j.
/// With edge types, edge e uses the parameter set of types[e].
ad::Var edge_probs(const GisstVars& params, ad::Var probs, ad::Var features, std::span<const ad::Edge> edges,
                   const EdgeAttributes* attributes = nullptr);

/// Stacked GCN over the edge-weighted adjacency with unit self-loops and symmetric
/// normalisation by the weighted degree. ReLU and dropout between layers.
ad::Var gcn_forward(const ModelVars& vars, std::span<const ad::Edge> edges, std::size_t num_nodes, ad::Var edge_weights,
                    ad::Var input, double dropout, bool training, Rng& rng);

struct Forward {
    ad::Var logits;
    std::optional<ad::Var> feature_probs;  // [d], GISST only
    std::optional<ad::Var> edge_probs;     // [E], GISST only
};

/// Full forward: for a GISST model the input is X * p and edges carry P_As;
/// a plain GCN uses X and unit edge weights.
Forward model_forward(ad::Tape& tape, const ModelVars& vars, const Model& model, const Graph& graph, bool training,
                      Rng& rng, const EdgeAttributes* attributes = nullptr);

// Convenience evaluation (no gradients) --------------------------------------

Tensor predict_logits(const Model& model, const Graph& graph, const EdgeAttributes* attributes = nullptr);
std::vector<int> predict(const Model& model, const Graph& graph);
double accuracy(const Model& model, const Graph& graph, std::span<const std::size_t> nodes);
/// sigmoid(m).
std::vector<double> feature_probabilities(const Model& model);
/// P_As per directed edge, aligned with Graph::edges.
std::vector<double> edge_probabilities(const Model& model, const Graph& graph, const EdgeAttributes* attributes = nullptr);

// Checkpoints ----------------------------------------------------------------

nlohmann::json config_to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys throw precondition_error.
ModelConfig config_from_json(const nlohmann::json& j);

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace gisst
