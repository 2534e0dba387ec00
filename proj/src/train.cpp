#include "gisst/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace gisst {

using ad::Var;

namespace {
constexpr std::uint64_t kDropoutStream = 200;
}

double combine(const LossBreakdown& t, const ModelConfig& c) {
    return t.class_loss + c.l1_edge * t.edge_l1 + c.ent_edge * t.edge_entropy + c.l1_feat * t.feat_l1 +
           c.ent_feat * t.feat_entropy + c.l2_penalty * t.l2_weight_penalty;
}

Var l1_reg(Var probs) { return ad::mean(probs); }

Var entropy_reg(Var probs) {
    Var p = ad::clamp(probs, kProbClamp, 1.0 - kProbClamp);
    Var q = ad::add_scalar(ad::neg(p), 1.0);
    Var plogp = ad::add(ad::hadamard(p, ad::log(p)), ad::hadamard(q, ad::log(q)));
    return ad::neg(ad::mean(plogp));
}

Var classification_loss(Var logits, const Graph& graph, std::span<const std::size_t> mask) {
    return ad::softmax_cross_entropy(logits, ad::one_hot(graph.labels, graph.num_classes), mask);
}

double l2_penalty_value(const Model& model) {
    double s = 0.0;
    for (const auto& l : model.stack.layers) {
        for (double w : l.weight.values) s += w * w;
        for (double w : l.bias.values) s += w * w;
    }
    return 0.5 * s;
}

LossTerms total_loss(ad::Tape& tape, const ModelVars& vars, const Model& model, const Graph& graph,
                     std::span<const std::size_t> mask, bool training, Rng& rng, const EdgeAttributes* attributes) {
    const auto& cfg = model.config;
    Forward f = model_forward(tape, vars, model, graph, training, rng, attributes);
    LossTerms out;
    Var total = classification_loss(f.logits, graph, mask);
    out.values.class_loss = total.value().item();
    if (f.edge_probs && graph.num_directed() > 0) {
        Var l1 = l1_reg(*f.edge_probs);
        Var ent = entropy_reg(*f.edge_probs);
        out.values.edge_l1 = l1.value().item();
        out.values.edge_entropy = ent.value().item();
        total = ad::add(total, ad::add(ad::scale(l1, cfg.l1_edge), ad::scale(ent, cfg.ent_edge)));
    }
    if (f.feature_probs) {
        Var l1 = l1_reg(*f.feature_probs);
        Var ent = entropy_reg(*f.feature_probs);
        out.values.feat_l1 = l1.value().item();
        out.values.feat_entropy = ent.value().item();
        total = ad::add(total, ad::add(ad::scale(l1, cfg.l1_feat), ad::scale(ent, cfg.ent_feat)));
    }
    out.values.l2_weight_penalty = l2_penalty_value(model);
    out.values.total = combine(out.values, cfg);
    out.total = total;
    return out;
}

LossBreakdown total_loss(const Model& model, const Graph& graph, const EdgeAttributes* attributes) {
    ad::Tape tape;
    Rng unused = make_rng(0, 0);
    auto vars = bind(tape, model, false);
    return total_loss(tape, vars, model, graph, graph.masks.train, false, unused, attributes).values;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamOptions& o) {
    if (grad.shape != param.shape) {
        throw dimension_error("adam_step: gradient " + shape_string(grad.shape) + " for parameter " +
                              shape_string(param.shape));
    }
    const std::size_t n = param.size();
    if (state.step == 0 && state.first.empty()) {
        state.first.assign(n, 0.0);
        state.second.assign(n, 0.0);
    }
    if (state.first.size() != n || state.second.size() != n) {
        throw dimension_error("adam_step: optimizer state does not match parameter " + shape_string(param.shape));
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad.values[i] + o.weight_decay * param.values[i];
        state.first[i] = o.beta1 * state.first[i] + (1.0 - o.beta1) * g;
        state.second[i] = o.beta2 * state.second[i] + (1.0 - o.beta2) * g * g;
        const double mhat = state.first[i] / c1;
        const double vhat = state.second[i] / c2;
        param.values[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.eps);
    }
}

namespace {

struct Slot {
    Tensor* param;
    bool decay;
};

// Parameter tensors in the same order bind() places them on the tape.
std::vector<Slot> parameter_slots(Model& model) {
    std::vector<Slot> slots;
    for (auto& l : model.stack.layers) {
        slots.push_back({&l.weight, true});
        slots.push_back({&l.bias, true});
    }
    if (model.gisst) {
        auto& p = *model.gisst;
        slots.push_back({&p.m, false});
        slots.push_back({&p.b, false});
        if (p.a) slots.push_back({&*p.a, false});
        for (auto& t : p.typed) {
            slots.push_back({&t.b, false});
            if (t.a) slots.push_back({&*t.a, false});
        }
    }
    return slots;
}

std::vector<Var> parameter_vars(const ModelVars& v) {
    std::vector<Var> out;
    for (std::size_t k = 0; k < v.weights.size(); ++k) {
        out.push_back(v.weights[k]);
        out.push_back(v.biases[k]);
    }
    if (v.gisst) {
        out.push_back(v.gisst->m);
        out.push_back(v.gisst->b);
        if (v.gisst->a) out.push_back(*v.gisst->a);
        for (const auto& [b, a] : v.gisst->typed) {
            out.push_back(b);
            if (a) out.push_back(*a);
        }
    }
    return out;
}

EpochRecord evaluate_epoch(const Model& model, const Graph& graph, std::size_t epoch, const EdgeAttributes* attributes) {
    EpochRecord r;
    r.epoch = epoch;
    const Tensor logits = predict_logits(model, graph, attributes);
    const std::size_t c = logits.cols();
    auto acc = [&](const std::vector<std::size_t>& nodes) {
        if (nodes.empty()) return 0.0;
        std::size_t hit = 0;
        for (auto v : nodes) {
            const double* row = &logits.values[v * c];
            hit += static_cast<int>(std::max_element(row, row + c) - row) == graph.labels[v];
        }
        return static_cast<double>(hit) / static_cast<double>(nodes.size());
    };
    r.train_acc = acc(graph.masks.train);
    r.val_acc = acc(graph.masks.val);
    r.test_acc = acc(graph.masks.test);
    return r;
}

}  // namespace

TrainReport train(const Graph& graph, const ModelConfig& config, std::uint64_t seed, const TrainOptions& options) {
    config.validate();
    if (graph.masks.train.empty()) throw precondition_error("train needs a non-empty train mask");
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t edge_dim = 0, num_types = 0;
    if (options.attributes) {
        if (options.attributes->features) edge_dim = options.attributes->features->cols();
        if (!options.attributes->types.empty()) {
            num_types = *std::max_element(options.attributes->types.begin(), options.attributes->types.end()) + 1;
        }
    }
    if (!all_finite(graph.features.values)) throw precondition_error("train: node features are not finite");
    TrainReport report;
    report.config = config;
    report.seed = seed;
    report.model = Model::init(config, graph.num_features(), graph.num_classes, seed, edge_dim, num_types);
    Model& model = report.model;

    report.initial = evaluate_epoch(model, graph, 0, options.attributes);
    report.initial.loss = total_loss(model, graph, options.attributes);

    Rng rng = make_rng(seed, kDropoutStream);
    auto slots = parameter_slots(model);
    std::vector<AdamState> states(slots.size());
    const AdamOptions base{config.learning_rate, 0.9, 0.999, 1e-8, 0.0};
    report.epochs.reserve(config.epochs);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        ad::Tape tape;
        auto vars = bind(tape, model, true);
        LossTerms terms;
        try {
            terms = total_loss(tape, vars, model, graph, graph.masks.train, true, rng, options.attributes);
        } catch (const numeric_error& e) {
            throw training_divergence("numeric failure at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        if (!std::isfinite(terms.values.total)) {
            throw training_divergence("non-finite loss at epoch " + std::to_string(epoch) + " (class loss " +
                                      std::to_string(terms.values.class_loss) + ")");
        }
        tape.backward(terms.total);
        const auto pvars = parameter_vars(vars);
        for (std::size_t k = 0; k < slots.size(); ++k) {
            AdamOptions o = base;
            if (slots[k].decay) o.weight_decay = config.l2_penalty;
            adam_step(*slots[k].param, *pvars[k].grad(), states[k], o);
        }
        EpochRecord rec;
        const bool record = options.eval_every <= 1 || epoch % options.eval_every == 0 || epoch == config.epochs;
        if (record) {
            rec = evaluate_epoch(model, graph, epoch, options.attributes);
        } else {
            rec.epoch = epoch;
            rec.train_acc = rec.val_acc = rec.test_acc = std::nan("");
        }
        rec.loss = terms.values;
        report.epochs.push_back(rec);
    }

    report.final_loss = total_loss(model, graph, options.attributes);
    const EpochRecord last = evaluate_epoch(model, graph, config.epochs, options.attributes);
    report.train_acc = last.train_acc;
    report.val_acc = last.val_acc;
    report.test_acc = last.test_acc;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

HyperGrid HyperGrid::gisst_grid() { return HyperGrid{}; }

HyperGrid HyperGrid::gcn_grid() {
    HyperGrid g;
    g.l2_penalty = {0.0005, 0.005, 0.5};
    g.dropout = {0.1, 0.2, 0.3, 0.4};
    g.l1_edge = g.l1_feat = g.ent_edge = g.ent_feat = {0.0};
    g.gisst = false;
    return g;
}

std::vector<ModelConfig> HyperGrid::expand() const {
    std::vector<ModelConfig> out;
    for (auto h : hidden_units)
        for (auto l : num_layers)
            for (auto lr : learning_rate)
                for (auto l2 : l2_penalty)
                    for (auto dr : dropout)
                        for (auto a : l1_edge)
                            for (auto b : l1_feat)
                                for (auto c : ent_edge)
                                    for (auto d : ent_feat) {
                                        ModelConfig m;
                                        m.hidden_units = h;
                                        m.num_layers = l;
                                        m.learning_rate = lr;
                                        m.l2_penalty = l2;
                                        m.dropout = dr;
                                        m.l1_edge = a;
                                        m.l1_feat = b;
                                        m.ent_edge = c;
                                        m.ent_feat = d;
                                        m.epochs = epochs;
                                        m.gisst = gisst;
                                        out.push_back(m);
                                    }
    return out;
}

GridResult grid_search(const Graph& graph, const std::vector<ModelConfig>& configs, std::uint64_t seed,
                       std::size_t threads) {
    if (configs.empty()) throw precondition_error("grid_search needs at least one config");
    GridResult res;
    res.configs = configs;
    res.reports.resize(configs.size());
    threads = std::clamp<std::size_t>(threads, 1, configs.size());
    if (threads == 1) {
        for (std::size_t i = 0; i < configs.size(); ++i) res.reports[i] = train(graph, configs[i], seed);
    } else {
        std::mutex mu;
        std::size_t next = 0;
        std::exception_ptr failure;
        auto worker = [&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard lock(mu);
                    if (next >= configs.size() || failure) return;
                    i = next++;
                }
                try {
                    res.reports[i] = train(graph, configs[i], seed);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }
    for (std::size_t i = 1; i < res.reports.size(); ++i) {
        const auto& cand = res.reports[i];
        const auto& best = res.reports[res.best];
        if (cand.val_acc > best.val_acc ||
            (cand.val_acc == best.val_acc && cand.final_loss.total < best.final_loss.total)) {
            res.best = i;
        }
    }
    return res;
}

GridResult grid_search(const Graph& graph, const HyperGrid& grid, std::uint64_t seed, std::size_t threads) {
    return grid_search(graph, grid.expand(), seed, threads);
}

// Persistence ----------------------------------------------------------------

using nlohmann::json;

namespace {

json loss_to_json(const LossBreakdown& l) {
    return {{"class_loss", l.class_loss}, {"edge_l1", l.edge_l1}, {"edge_entropy", l.edge_entropy},
            {"feat_l1", l.feat_l1}, {"feat_entropy", l.feat_entropy}, {"l2_weight_penalty", l.l2_weight_penalty},
            {"total", l.total}};
}

json epoch_to_json(const EpochRecord& r) {
    json j{{"epoch", r.epoch}, {"loss", loss_to_json(r.loss)}};
    // Skipped evaluations are NaN, which JSON cannot carry.
    auto put = [&](const char* key, double v) { j[key] = std::isnan(v) ? json(nullptr) : json(v); };
    put("train_acc", r.train_acc);
    put("val_acc", r.val_acc);
    put("test_acc", r.test_acc);
    return j;
}

}  // namespace

std::string report_to_json(const TrainReport& r, bool include_timing) {
    json epochs = json::array();
    for (const auto& e : r.epochs) epochs.push_back(epoch_to_json(e));
    json j{{"config", config_to_json(r.config)},
           {"seed", r.seed},
           {"initial", epoch_to_json(r.initial)},
           {"epochs", epochs},
           {"final_loss", loss_to_json(r.final_loss)},
           {"train_acc", r.train_acc},
           {"val_acc", r.val_acc},
           {"test_acc", r.test_acc}};
    if (include_timing) j["wall_seconds"] = r.wall_seconds;
    return j.dump(1);
}

std::string report_to_csv(const TrainReport& r) {
    std::ostringstream os;
    os << "epoch,class_loss,edge_l1,edge_entropy,feat_l1,feat_entropy,total,train_acc,val_acc\n";
    os << std::setprecision(17);
    auto row = [&](const EpochRecord& e) {
        const auto& l = e.loss;
        os << e.epoch << ',' << l.class_loss << ',' << l.edge_l1 << ',' << l.edge_entropy << ',' << l.feat_l1 << ','
           << l.feat_entropy << ',' << l.total << ',';
        if (!std::isnan(e.train_acc)) os << e.train_acc;
        os << ',';
        if (!std::isnan(e.val_acc)) os << e.val_acc;
        os << '\n';
    };
    row(r.initial);
    for (const auto& e : r.epochs) row(e);
    return os.str();
}

}  // namespace gisst
