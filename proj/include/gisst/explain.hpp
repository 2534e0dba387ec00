#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gisst/graph.hpp"
#include "gisst/model.hpp"

namespace gisst {

enum class Method {
    GisstGlobal,  // learned probabilities: P_As per edge, sigmoid(m) per feature
    GisstGrad,    // |gradient of the predicted loss| w.r.t. P_As and P_Xs
    Grad,         // |gradient of the predicted loss| w.r.t. adjacency weights and X (plain GCN)
    MaskOpt,      // post-hoc edge/feature mask optimisation (plain GCN)
};

std::string_view method_name(Method method);
Method parse_method(std::string_view name);
/// True for methods that read a GISST checkpoint.
bool needs_gisst_model(Method method);

/// Importance scores for one target node (or a node set in group mode).
///
/// Edge scores are keyed by undirected edge and cover exactly the edges of the
/// targets' computation subgraphs (k-hop, k = number of graph layers). A directed
/// pair of scores is folded into one by averaging.
struct Explanation {
    Method method = Method::GisstGrad;
    std::vector<std::size_t> targets;
    std::size_t hops = 0;
    std::vector<std::size_t> subgraph_nodes;  // ascending, original ids
    std::map<UndirectedEdge, double> edge_scores;
    std::vector<double> feature_scores;

    bool operator==(const Explanation&) const = default;
};

/// Cross-entropy of each target's logits against the class the unmodified model predicts for it,
/// averaged over targets, with caller-supplied edge weights [E] and feature weights [N x d].
double gisst_predicted_loss(const Model& model, const Graph& graph, std::span<const std::size_t> targets,
                            const std::vector<double>& edge_weights, const Tensor& feature_weights);

/// Gradient explanation of a GISST model. One target is an instance explanation; several targets
/// explain their average predicted loss.
Explanation gisst_scores(const Model& model, const Graph& graph, std::span<const std::size_t> targets);
/// Probability explanation of a GISST model (edge: P_As, feature: sigmoid(m)).
Explanation gisst_global(const Model& model, const Graph& graph, std::span<const std::size_t> targets);
/// Gradient explanation of a plain GCN with unit edge weights inserted ahead of normalisation.
Explanation grad_baseline(const Model& model, const Graph& graph, std::span<const std::size_t> targets);

/// Defaults are fixed, not tuned on the benchmarks.
struct MaskOptConfig {
    std::size_t steps = 100;
    double learning_rate = 0.01;
    double edge_size = 0.005;   // times the sum of edge mask probabilities
    double edge_entropy = 1.0;  // times the mean binary entropy of the edge mask
    double feat_size = 1.0;     // times the mean feature mask probability
    double feat_entropy = 0.1;

    bool operator==(const MaskOptConfig&) const = default;
};

/// Post-hoc mask optimisation on the target's computation subgraph. Logits start at zero.
Explanation mask_opt_baseline(const Model& model, const Graph& graph, std::size_t target,
                              const MaskOptConfig& config = {});
/// Group explanation for mask optimisation: per-edge and per-feature median across targets.
Explanation aggregate_median(std::span<const Explanation> explanations);

/// Dispatch on `method` for a single target.
Explanation explain(Method method, const Model& model, const Graph& graph, std::size_t target,
                    const MaskOptConfig& mask_config = {});

struct ExtractedSubgraph {
    bool excluded = false;  // computation subgraph spans fewer than V_M nodes
    double threshold = 0.0;
    std::vector<UndirectedEdge> edges;  // ascending
    std::vector<std::size_t> nodes;     // ascending

    bool operator==(const ExtractedSubgraph&) const = default;
};

/// Largest score threshold whose retained edges (score >= threshold) touch at least `min_nodes` nodes.
ExtractedSubgraph extract_subgraph(const Explanation& explanation, std::size_t min_nodes);

struct SetMetrics {
    bool valid = false;  // false when nothing was extracted
    std::size_t true_positives = 0;
    std::size_t selected = 0;
    std::size_t relevant = 0;  // ground-truth positives in the universe
    std::size_t universe = 0;
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
};

/// Precision/recall/accuracy of the extracted edges against ground truth over the computation-subgraph edges.
SetMetrics edge_metrics(const ExtractedSubgraph& extracted, const GroundTruth& truth, const Explanation& explanation);

/// Minmax-normalises each score vector (constant vectors become zeros), averages them and takes the
/// top-K features (ties to the lower index).
SetMetrics feature_metrics(std::span<const std::vector<double>> per_node_scores,
                           std::span<const std::size_t> important, std::size_t top_k = 40);

struct MetricRow {
    std::string dataset;
    std::string method;
    std::string metric;
    double mean = 0.0;
    std::size_t n = 0;

    bool operator==(const MetricRow&) const = default;
};

struct EvaluationOptions {
    MaskOptConfig mask_opt;
    std::size_t top_k = 40;
    std::optional<std::size_t> motif_size;  // overrides GroundTruth::motif_size as V_M
    std::size_t threads = 1;
};

/// Per-target explanations for the test nodes of `dataset`.
std::vector<Explanation> explain_test_nodes(Method method, const Model& model, const Dataset& dataset,
                                            const EvaluationOptions& options = {});

/// Edge metrics over test motif nodes, feature metrics over all test nodes; six rows per method.
std::vector<MetricRow> evaluate_explanations(Method method, const Dataset& dataset,
                                             std::span<const Explanation> explanations,
                                             const EvaluationOptions& options = {});

/// Explains and scores every method. GISST methods use `gisst_model`, baselines `plain_model`.
std::vector<MetricRow> evaluate_dataset(const Dataset& dataset, const Model* gisst_model, const Model* plain_model,
                                        std::span<const Method> methods, const EvaluationOptions& options = {});

/// CSV with header dataset,method,metric,mean,n.
std::string metrics_to_csv(std::span<const MetricRow> rows);

std::string explanation_to_json(const Explanation& explanation);
Explanation explanation_from_json(const std::string& text);

/// Undirected DOT graph of the explanation: every edge carries weight=<score>, extracted edges are
/// bold, ground-truth important edges are red.
std::string to_dot(const Explanation& explanation, const ExtractedSubgraph& extracted, const GroundTruth& truth);

}  // namespace gisst
