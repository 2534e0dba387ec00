#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gisst/autodiff.hpp"
#include "gisst/graph.hpp"
#include "gisst/model.hpp"

namespace gisst {

/// Raised when the training loss stops being finite.
class training_divergence : public numeric_error {
public:
    using numeric_error::numeric_error;
};

/// Lower clamp for probabilities entering a logarithm; the upper clamp is 1 - kProbClamp.
inline constexpr double kProbClamp = 1e-7;

/// Terms of the composite objective. `total` is the coefficient-weighted sum.
struct LossBreakdown {
    double class_loss = 0.0;
    double edge_l1 = 0.0;
    double edge_entropy = 0.0;
    double feat_l1 = 0.0;
    double feat_entropy = 0.0;
    double l2_weight_penalty = 0.0;  // 1/2 sum of squared GCN parameters
    double total = 0.0;

    bool operator==(const LossBreakdown&) const = default;
};

/// total = class + l1_edge*edge_l1 + ent_edge*edge_entropy + l1_feat*feat_l1 + ent_feat*feat_entropy + l2*penalty.
double combine(const LossBreakdown& terms, const ModelConfig& config);

/// Mean of the probabilities.
ad::Var l1_reg(ad::Var probs);
/// Mean binary entropy -[p log p + (1 - p) log(1 - p)] of the clamped probabilities.
ad::Var entropy_reg(ad::Var probs);

/// Cross-entropy of `logits` against graph labels over `mask`.
ad::Var classification_loss(ad::Var logits, const Graph& graph, std::span<const std::size_t> mask);

double l2_penalty_value(const Model& model);

struct LossTerms {
    ad::Var total;  // excludes the L2 term, which enters through weight decay
    LossBreakdown values;
};

/// Forward pass plus every loss term, recorded on `tape`.
LossTerms total_loss(ad::Tape& tape, const ModelVars& vars, const Model& model, const Graph& graph,
                     std::span<const std::size_t> mask, bool training, Rng& rng,
                     const EdgeAttributes* attributes = nullptr);
/// Evaluation-mode breakdown on the training mask.
LossBreakdown total_loss(const Model& model, const Graph& graph, const EdgeAttributes* attributes = nullptr);

struct AdamOptions {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // added to the gradient as weight_decay * param
};

struct AdamState {
    std::vector<double> first;
    std::vector<double> second;
    std::size_t step = 0;
};

/// One bias-corrected Adam update of `param` in place.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamOptions& options);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based; 0 is the untrained model
    LossBreakdown loss;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
};

struct TrainReport {
    ModelConfig config;
    std::uint64_t seed = 0;
    EpochRecord initial;
    std::vector<EpochRecord> epochs;
    Model model;
    LossBreakdown final_loss;  // evaluation mode, after the last epoch
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double wall_seconds = 0.0;
};

struct TrainOptions {
    const EdgeAttributes* attributes = nullptr;
    /// Record accuracies every `eval_every` epochs (the last epoch is always recorded).
    std::size_t eval_every = 1;
};

/// Full-batch training on the train mask. The returned model is the one after the last epoch.
TrainReport train(const Graph& graph, const ModelConfig& config, std::uint64_t seed, const TrainOptions& options = {});

/// Cartesian hyperparameter grid.
struct HyperGrid {
    std::vector<std::size_t> hidden_units{16, 32};
    std::vector<std::size_t> num_layers{2, 3, 4};
    std::vector<double> learning_rate{0.001, 0.005};
    std::vector<double> l2_penalty{0.0005, 0.005};
    std::vector<double> dropout{0.1, 0.2};
    std::vector<double> l1_edge{0.005, 0.05, 0.5};
    std::vector<double> l1_feat{0.0005, 0.005, 0.05};
    std::vector<double> ent_edge{0.01, 0.1, 1.0};
    std::vector<double> ent_feat{0.001, 0.01, 0.1};
    std::size_t epochs = 1000;
    bool gisst = true;

    /// Grid used for GISST models.
    static HyperGrid gisst_grid();
    /// Grid used for the plain GCN baselines (no importance penalties).
    static HyperGrid gcn_grid();

    /// All combinations in lexicographic order of the fields above.
    std::vector<ModelConfig> expand() const;
};

struct GridResult {
    std::size_t best = 0;
    std::vector<ModelConfig> configs;
    std::vector<TrainReport> reports;
};

/// Trains every config (all with `seed`) and picks the best validation accuracy; ties go to
/// the lower final loss, then to the earlier config. `threads` > 1 trains configs concurrently.
GridResult grid_search(const Graph& graph, const std::vector<ModelConfig>& configs, std::uint64_t seed,
                       std::size_t threads = 1);
GridResult grid_search(const Graph& graph, const HyperGrid& grid, std::uint64_t seed, std::size_t threads = 1);

// Persistence ----------------------------------------------------------------

/// Wall-clock time is machine dependent, so it is only written when asked for.
std::string report_to_json(const TrainReport& report, bool include_timing = false);
/// Header: epoch,class_loss,edge_l1,edge_entropy,feat_l1,feat_entropy,total,train_acc,val_acc
std::string report_to_csv(const TrainReport& report);

}  // namespace gisst
