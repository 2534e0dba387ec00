#include "gisst/explain.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gisst/train.hpp"

namespace gisst {

using ad::Var;
using json = nlohmann::json;

std::string_view method_name(Method method) {
    switch (method) {
        case Method::GisstGlobal: return "gisst-global";
        case Method::GisstGrad: return "gisst-grad";
        case Method::Grad: return "grad";
        case Method::MaskOpt: return "mask-opt";
    }
    throw precondition_error("unknown method");
}

Method parse_method(std::string_view name) {
    for (auto m : {Method::GisstGlobal, Method::GisstGrad, Method::Grad, Method::MaskOpt}) {
        if (method_name(m) == name) return m;
    }
    throw precondition_error("unknown method '" + std::string(name) +
                             "' (expected gisst-global, gisst-grad, grad or mask-opt)");
}

bool needs_gisst_model(Method method) { return method == Method::GisstGlobal || method == Method::GisstGrad; }

namespace {

void check_model(const Model& model, const Graph& graph, Method method) {
    if (needs_gisst_model(method) && !model.gisst) {
        throw precondition_error(std::string(method_name(method)) + " needs a GISST checkpoint");
    }
    if (!needs_gisst_model(method) && model.gisst) {
        throw precondition_error(std::string(method_name(method)) + " needs a plain GCN checkpoint");
    }
    if (graph.num_features() != model.num_features) throw dimension_error("feature count does not match the model");
    auto finite = [](const Tensor& t) { return all_finite(t.values); };
    for (const auto& layer : model.stack.layers) {
        if (!finite(layer.weight) || !finite(layer.bias)) throw numeric_error("model has non-finite parameters");
    }
    if (model.gisst && (!finite(model.gisst->m) || !finite(model.gisst->b))) {
        throw numeric_error("model has non-finite importance parameters");
    }
}

void check_targets(const Graph& graph, std::span<const std::size_t> targets) {
    if (targets.empty()) throw precondition_error("no target nodes");
    for (auto t : targets) {
        if (t >= graph.num_nodes) throw precondition_error("target " + std::to_string(t) + " out of range");
    }
}

/// Union of the targets' k-hop subgraphs.
struct Region {
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> edge_indices;
};

Region computation_region(const Graph& graph, std::span<const std::size_t> targets, std::size_t hops) {
    std::set<std::size_t> nodes, edges;
    for (auto t : targets) {
        const auto sub = k_hop_subgraph(graph, t, hops);
        nodes.insert(sub.nodes.begin(), sub.nodes.end());
        edges.insert(sub.edge_indices.begin(), sub.edge_indices.end());
    }
    return {{nodes.begin(), nodes.end()}, {edges.begin(), edges.end()}};
}

Explanation skeleton(Method method, const Model& model, const Graph& graph, std::span<const std::size_t> targets,
                     Region& region) {
    Explanation ex;
    ex.method = method;
    ex.targets.assign(targets.begin(), targets.end());
    ex.hops = model.config.num_layers;
    region = computation_region(graph, targets, ex.hops);
    ex.subgraph_nodes = region.nodes;
    return ex;
}

struct PredictedGrad {
    double loss = 0.0;
    std::vector<double> edge_grad;  // per directed edge
    Tensor input_grad;              // [N x d]
};

/// Predicted-class loss of `targets` with input = factor * leaf (or leaf alone) and the given edge weights.
PredictedGrad predicted_loss_grad(const Model& model, const Graph& graph, std::span<const std::size_t> targets,
                                  const std::vector<int>& predicted, const std::vector<double>& edge_weights,
                                  const std::optional<Tensor>& factor, const Tensor& leaf, bool with_grad) {
    ad::Tape tape;
    auto vars = bind(tape, model, false);
    Var w = with_grad ? tape.parameter(Tensor::vector(edge_weights)) : tape.constant(Tensor::vector(edge_weights));
    Var l = with_grad ? tape.parameter(leaf) : tape.constant(leaf);
    Var input = factor ? ad::hadamard(tape.constant(*factor), l) : l;
    Rng unused = make_rng(0, 0);
    Var logits = gcn_forward(vars, graph.edges, graph.num_nodes, w, input, 0.0, false, unused);
    Var loss = ad::softmax_cross_entropy(logits, ad::one_hot(predicted, model.num_classes), targets);
    PredictedGrad out;
    out.loss = loss.value().item();
    if (!std::isfinite(out.loss)) throw numeric_error("predicted loss is not finite");
    if (with_grad) {
        tape.backward(loss);
        out.edge_grad = w.grad()->values;
        out.input_grad = *l.grad();
    }
    return out;
}

void fill_gradient_scores(Explanation& ex, const Graph& graph, const Region& region, const PredictedGrad& g) {
    for (auto k : region.edge_indices) {
        ex.edge_scores[graph.undirected[k]] = 0.5 * (std::abs(g.edge_grad[2 * k]) + std::abs(g.edge_grad[2 * k + 1]));
    }
    const std::size_t d = graph.num_features();
    ex.feature_scores.assign(d, 0.0);
    for (auto v : region.nodes) {
        for (std::size_t l = 0; l < d; ++l) ex.feature_scores[l] += std::abs(g.input_grad.at(v, l));
    }
}

Tensor broadcast_rows(const std::vector<double>& row, std::size_t n) {
    Tensor t = Tensor::zeros({n, row.size()});
    for (std::size_t i = 0; i < n; ++i) std::copy(row.begin(), row.end(), t.values.begin() + i * row.size());
    return t;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double gisst_predicted_loss(const Model& model, const Graph& graph, std::span<const std::size_t> targets,
                            const std::vector<double>& edge_weights, const Tensor& feature_weights) {
    check_model(model, graph, Method::GisstGrad);
    check_targets(graph, targets);
    const auto predicted = predict(model, graph);
    return predicted_loss_grad(model, graph, targets, predicted, edge_weights, graph.features, feature_weights, false)
        .loss;
}

Explanation gisst_scores(const Model& model, const Graph& graph, std::span<const std::size_t> targets) {
    check_model(model, graph, Method::GisstGrad);
    check_targets(graph, targets);
    Region region;
    Explanation ex = skeleton(Method::GisstGrad, model, graph, targets, region);
    const auto predicted = predict(model, graph);
    const auto pe = edge_probabilities(model, graph);
    const Tensor pxs = broadcast_rows(feature_probabilities(model), graph.num_nodes);
    fill_gradient_scores(ex, graph, region,
                         predicted_loss_grad(model, graph, targets, predicted, pe, graph.features, pxs, true));
    return ex;
}

Explanation gisst_global(const Model& model, const Graph& graph, std::span<const std::size_t> targets) {
    check_model(model, graph, Method::GisstGlobal);
    check_targets(graph, targets);
    Region region;
    Explanation ex = skeleton(Method::GisstGlobal, model, graph, targets, region);
    const auto pe = edge_probabilities(model, graph);
    for (auto k : region.edge_indices) ex.edge_scores[graph.undirected[k]] = 0.5 * (pe[2 * k] + pe[2 * k + 1]);
    ex.feature_scores = feature_probabilities(model);
    return ex;
}

Explanation grad_baseline(const Model& model, const Graph& graph, std::span<const std::size_t> targets) {
    check_model(model, graph, Method::Grad);
    check_targets(graph, targets);
    Region region;
    Explanation ex = skeleton(Method::Grad, model, graph, targets, region);
    const auto predicted = predict(model, graph);
    const std::vector<double> ones(graph.num_directed(), 1.0);
    fill_gradient_scores(ex, graph, region,
                         predicted_loss_grad(model, graph, targets, predicted, ones, std::nullopt, graph.features, true));
    return ex;
}

Explanation mask_opt_baseline(const Model& model, const Graph& graph, std::size_t target, const MaskOptConfig& config) {
    check_model(model, graph, Method::MaskOpt);
    const std::size_t targets[] = {target};
    check_targets(graph, targets);
    if (config.learning_rate <= 0.0) throw precondition_error("mask optimisation needs a positive learning rate");
    Region region;
    Explanation ex = skeleton(Method::MaskOpt, model, graph, targets, region);

    const Subgraph sub = k_hop_subgraph(graph, target, ex.hops);
    const Graph local = sub.materialize(graph);
    const std::size_t t = sub.local_index(target);
    std::vector<int> predicted(local.num_nodes, 0);
    predicted[t] = predict(model, graph)[target];
    const Tensor labels = ad::one_hot(predicted, model.num_classes);
    const std::size_t mask_rows[] = {t};

    const std::size_t d = graph.num_features();
    Tensor edge_logits = Tensor::zeros({local.num_directed()});
    Tensor feat_logits = Tensor::zeros({d});
    AdamState edge_state, feat_state;
    AdamOptions adam;
    adam.learning_rate = config.learning_rate;
    Rng unused = make_rng(0, 0);
    const bool has_edges = local.num_directed() > 0;

    for (std::size_t step = 0; step < config.steps; ++step) {
        ad::Tape tape;
        auto vars = bind(tape, model, false);
        Var el = tape.parameter(edge_logits);
        Var fl = tape.parameter(feat_logits);
        Var em = ad::sigmoid(el);
        Var fm = ad::sigmoid(fl);
        Var input = ad::mul_cols(tape.constant(local.features), fm);
        Var logits = gcn_forward(vars, local.edges, local.num_nodes, em, input, 0.0, false, unused);
        Var loss = ad::softmax_cross_entropy(logits, labels, mask_rows);
        loss = ad::add(loss, ad::scale(ad::mean(fm), config.feat_size));
        loss = ad::add(loss, ad::scale(entropy_reg(fm), config.feat_entropy));
        if (has_edges) {
            loss = ad::add(loss, ad::scale(ad::sum(em), config.edge_size));
            loss = ad::add(loss, ad::scale(entropy_reg(em), config.edge_entropy));
        }
        if (!std::isfinite(loss.value().item())) {
            throw numeric_error("mask optimisation loss is not finite at step " + std::to_string(step));
        }
        tape.backward(loss);
        if (has_edges) adam_step(edge_logits, *el.grad(), edge_state, adam);
        adam_step(feat_logits, *fl.grad(), feat_state, adam);
    }

    auto sigma = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    for (std::size_t j = 0; j < sub.edge_indices.size(); ++j) {
        ex.edge_scores[graph.undirected[sub.edge_indices[j]]] =
            0.5 * (sigma(edge_logits.values[2 * j]) + sigma(edge_logits.values[2 * j + 1]));
    }
    ex.feature_scores.resize(d);
    for (std::size_t l = 0; l < d; ++l) ex.feature_scores[l] = sigma(feat_logits.values[l]);
    return ex;
}

Explanation aggregate_median(std::span<const Explanation> explanations) {
    if (explanations.empty()) throw precondition_error("nothing to aggregate");
    Explanation out;
    out.method = explanations.front().method;
    out.hops = explanations.front().hops;
    const std::size_t d = explanations.front().feature_scores.size();
    std::set<std::size_t> nodes;
    std::map<UndirectedEdge, std::vector<double>> edge_values;
    std::vector<std::vector<double>> feat_values(d);
    for (const auto& ex : explanations) {
        if (ex.feature_scores.size() != d) throw dimension_error("feature score lengths differ");
        out.targets.insert(out.targets.end(), ex.targets.begin(), ex.targets.end());
        nodes.insert(ex.subgraph_nodes.begin(), ex.subgraph_nodes.end());
        for (const auto& [e, s] : ex.edge_scores) edge_values[e].push_back(s);
        for (std::size_t l = 0; l < d; ++l) feat_values[l].push_back(ex.feature_scores[l]);
    }
    out.subgraph_nodes.assign(nodes.begin(), nodes.end());
    for (auto& [e, v] : edge_values) out.edge_scores[e] = median(std::move(v));
    out.feature_scores.resize(d);
    for (std::size_t l = 0; l < d; ++l) out.feature_scores[l] = median(std::move(feat_values[l]));
    return out;
}

Explanation explain(Method method, const Model& model, const Graph& graph, std::size_t target,
                    const MaskOptConfig& mask_config) {
    const std::size_t targets[] = {target};
    switch (method) {
        case Method::GisstGlobal: return gisst_global(model, graph, targets);
        case Method::GisstGrad: return gisst_scores(model, graph, targets);
        case Method::Grad: return grad_baseline(model, graph, targets);
        case Method::MaskOpt: return mask_opt_baseline(model, graph, target, mask_config);
    }
    throw precondition_error("unknown method");
}

// Extraction and metrics ------------------------------------------------------

ExtractedSubgraph extract_subgraph(const Explanation& explanation, std::size_t min_nodes) {
    if (min_nodes < 2) throw precondition_error("V_M must be at least 2");
    ExtractedSubgraph out;
    if (explanation.subgraph_nodes.size() < min_nodes || explanation.edge_scores.empty()) {
        out.excluded = true;
        return out;
    }
    std::vector<double> thresholds;
    for (const auto& [e, s] : explanation.edge_scores) thresholds.push_back(s);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    for (double t : thresholds) {
        std::set<std::size_t> nodes;
        for (const auto& [e, s] : explanation.edge_scores) {
            if (s >= t) {
                nodes.insert(e.u);
                nodes.insert(e.v);
            }
        }
        if (nodes.size() >= min_nodes || t == thresholds.back()) {
            out.threshold = t;
            out.nodes.assign(nodes.begin(), nodes.end());
            for (const auto& [e, s] : explanation.edge_scores) {
                if (s >= t) out.edges.push_back(e);
            }
            out.excluded = nodes.size() < min_nodes;
            return out;
        }
    }
    return out;
}

SetMetrics edge_metrics(const ExtractedSubgraph& extracted, const GroundTruth& truth, const Explanation& explanation) {
    SetMetrics m;
    m.universe = explanation.edge_scores.size();
    for (const auto& [e, s] : explanation.edge_scores) m.relevant += truth.important_edges.count(e);
    for (const auto& e : extracted.edges) {
        if (!explanation.edge_scores.count(e)) throw precondition_error("extracted edge outside the computation subgraph");
        m.true_positives += truth.important_edges.count(e);
    }
    m.selected = extracted.edges.size();
    if (extracted.excluded || m.selected == 0) return m;
    m.valid = true;
    m.precision = static_cast<double>(m.true_positives) / static_cast<double>(m.selected);
    m.recall = m.relevant ? static_cast<double>(m.true_positives) / static_cast<double>(m.relevant) : 0.0;
    const std::size_t false_pos = m.selected - m.true_positives;
    const std::size_t false_neg = m.relevant - m.true_positives;
    m.accuracy = static_cast<double>(m.universe - false_pos - false_neg) / static_cast<double>(m.universe);
    return m;
}

SetMetrics feature_metrics(std::span<const std::vector<double>> per_node_scores, std::span<const std::size_t> important,
                           std::size_t top_k) {
    if (per_node_scores.empty()) throw precondition_error("no feature scores");
    const std::size_t d = per_node_scores.front().size();
    if (top_k == 0 || top_k > d) throw precondition_error("top-K must be in [1, d]");
    std::vector<double> avg(d, 0.0);
    for (const auto& s : per_node_scores) {
        if (s.size() != d) throw dimension_error("feature score lengths differ");
        const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
        const double range = *hi - *lo;
        if (!std::isfinite(range)) throw numeric_error("non-finite feature score");
        if (range > 0.0) {
            for (std::size_t l = 0; l < d; ++l) avg[l] += (s[l] - *lo) / range;
        }
    }
    for (auto& a : avg) a /= static_cast<double>(per_node_scores.size());

    std::vector<std::size_t> order(d);
    for (std::size_t l = 0; l < d; ++l) order[l] = l;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return avg[a] > avg[b]; });
    const std::set<std::size_t> truth(important.begin(), important.end());

    SetMetrics m;
    m.valid = true;
    m.selected = top_k;
    m.relevant = truth.size();
    m.universe = d;
    for (std::size_t r = 0; r < top_k; ++r) m.true_positives += truth.count(order[r]);
    m.precision = static_cast<double>(m.true_positives) / static_cast<double>(top_k);
    m.recall = m.relevant ? static_cast<double>(m.true_positives) / static_cast<double>(m.relevant) : 0.0;
    const std::size_t wrong = (top_k - m.true_positives) + (m.relevant - m.true_positives);
    m.accuracy = static_cast<double>(d - wrong) / static_cast<double>(d);
    return m;
}

// Dataset evaluation ------------------------------------------------------------

std::vector<Explanation> explain_test_nodes(Method method, const Model& model, const Dataset& dataset,
                                            const EvaluationOptions& options) {
    const auto& graph = dataset.graph;
    const auto& targets = graph.masks.test;
    check_model(model, graph, method);
    std::vector<Explanation> out(targets.size());
    if (method == Method::GisstGlobal) {
        // every node shares the same probabilities; only the computation subgraph differs
        for (std::size_t i = 0; i < targets.size(); ++i) out[i] = explain(method, model, graph, targets[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < targets.size(); i = next++) {
            try {
                out[i] = explain(method, model, graph, targets[i], options.mask_opt);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = targets.size();
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, targets.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::vector<MetricRow> evaluate_explanations(Method method, const Dataset& dataset,
                                             std::span<const Explanation> explanations,
                                             const EvaluationOptions& options) {
    const std::size_t vm = options.motif_size.value_or(dataset.truth.motif_size);
    std::set<std::size_t> motif_nodes;
    for (const auto& motif : dataset.truth.motif_nodes) motif_nodes.insert(motif.begin(), motif.end());

    double prec = 0.0, rec = 0.0, acc = 0.0;
    std::size_t n_edge = 0;
    std::vector<std::vector<double>> feature_scores;
    for (const auto& ex : explanations) {
        feature_scores.push_back(ex.feature_scores);
        if (ex.targets.size() != 1 || !motif_nodes.count(ex.targets.front())) continue;
        const auto m = edge_metrics(extract_subgraph(ex, vm), dataset.truth, ex);
        if (!m.valid) continue;
        prec += m.precision;
        rec += m.recall;
        acc += m.accuracy;
        ++n_edge;
    }
    const std::string ds(kind_name(dataset.spec.kind));
    const std::string mn(method_name(method));
    auto avg = [](double total, std::size_t n) { return n ? total / static_cast<double>(n) : 0.0; };
    std::vector<MetricRow> rows{
        {ds, mn, "edge_precision", avg(prec, n_edge), n_edge},
        {ds, mn, "edge_recall", avg(rec, n_edge), n_edge},
        {ds, mn, "edge_accuracy", avg(acc, n_edge), n_edge},
    };
    if (!feature_scores.empty()) {
        const auto f = feature_metrics(feature_scores, dataset.truth.important_features, options.top_k);
        const std::size_t n = feature_scores.size();
        rows.push_back({ds, mn, "feat_precision", f.precision, n});
        rows.push_back({ds, mn, "feat_recall", f.recall, n});
        rows.push_back({ds, mn, "feat_accuracy", f.accuracy, n});
    }
    return rows;
}

std::vector<MetricRow> evaluate_dataset(const Dataset& dataset, const Model* gisst_model, const Model* plain_model,
                                        std::span<const Method> methods, const EvaluationOptions& options) {
    std::vector<MetricRow> rows;
    for (auto method : methods) {
        const Model* model = needs_gisst_model(method) ? gisst_model : plain_model;
        if (!model) throw precondition_error("no model supplied for " + std::string(method_name(method)));
        const auto explanations = explain_test_nodes(method, *model, dataset, options);
        auto r = evaluate_explanations(method, dataset, explanations, options);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
}

namespace {

std::string format_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string metrics_to_csv(std::span<const MetricRow> rows) {
    std::string out = "dataset,method,metric,mean,n\n";
    for (const auto& r : rows) {
        out += r.dataset + "," + r.method + "," + r.metric + "," + format_number(r.mean) + "," + std::to_string(r.n) + "\n";
    }
    return out;
}

std::string explanation_to_json(const Explanation& explanation) {
    json j;
    j["method"] = std::string(method_name(explanation.method));
    j["targets"] = explanation.targets;
    j["hops"] = explanation.hops;
    j["subgraph_nodes"] = explanation.subgraph_nodes;
    json edges = json::array();
    for (const auto& [e, s] : explanation.edge_scores) edges.push_back(json::array({e.u, e.v, s}));
    j["edge_scores"] = std::move(edges);
    j["feature_scores"] = explanation.feature_scores;
    return j.dump(1) + "\n";
}

Explanation explanation_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        Explanation ex;
        ex.method = parse_method(j.at("method").get<std::string>());
        ex.targets = j.at("targets").get<std::vector<std::size_t>>();
        ex.hops = j.at("hops").get<std::size_t>();
        ex.subgraph_nodes = j.at("subgraph_nodes").get<std::vector<std::size_t>>();
        for (const auto& e : j.at("edge_scores")) {
            ex.edge_scores[{e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()}] = e.at(2).get<double>();
        }
        ex.feature_scores = j.at("feature_scores").get<std::vector<double>>();
        return ex;
    } catch (const json::exception& e) {
        throw precondition_error(std::string("malformed explanation: ") + e.what());
    }
}

std::string to_dot(const Explanation& explanation, const ExtractedSubgraph& extracted, const GroundTruth& truth) {
    const std::set<UndirectedEdge> kept(extracted.edges.begin(), extracted.edges.end());
    const std::set<std::size_t> targets(explanation.targets.begin(), explanation.targets.end());
    std::ostringstream os;
    os << "graph explanation {\n";
    for (auto v : explanation.subgraph_nodes) {
        os << "  " << v;
        if (targets.count(v)) os << " [shape=doublecircle]";
        os << ";\n";
    }
    for (const auto& [e, s] : explanation.edge_scores) {
        os << "  " << e.u << " -- " << e.v << " [weight=\"" << format_number(s) << "\"";
        if (kept.count(e)) os << ", style=bold";
        if (truth.important_edges.count(e)) os << ", color=red";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace gisst
