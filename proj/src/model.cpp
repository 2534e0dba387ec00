#include "gisst/model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "gisst/json_util.hpp"

namespace gisst {

using ad::Var;

namespace {
constexpr std::uint64_t kInitStream = 100;
}

void ModelConfig::validate() const {
    if (num_layers < 1) throw precondition_error("num_layers must be >= 1");
    if (hidden_units < 1) throw precondition_error("hidden_units must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw precondition_error("dropout must be in [0, 1)");
    if (!(learning_rate > 0.0) || learning_rate >= 1.0) throw precondition_error("learning_rate must be in (0, 1)");
    for (double c : {l2_penalty, l1_edge, ent_edge, l1_feat, ent_feat}) {
        if (c < 0.0 || !std::isfinite(c)) throw precondition_error("penalty coefficients must be finite and >= 0");
    }
}

Tensor xavier_init(const Shape& shape, Rng& rng) {
    std::size_t fan_in = 0, fan_out = 0;
    if (shape.size() == 2) {
        fan_in = shape[0];
        fan_out = shape[1];
    } else if (shape.size() == 1) {
        fan_in = shape[0];
        fan_out = 1;
    } else {
        throw dimension_error("xavier_init needs a 2-D shape, got " + shape_string(shape));
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.values) v = u(rng);
    return t;
}

Tensor xavier_init(const Shape& shape, std::uint64_t seed) {
    Rng rng = make_rng(seed, kInitStream);
    return xavier_init(shape, rng);
}

GcnStack GcnStack::init(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, std::size_t num_layers, Rng& rng) {
    GcnStack s;
    std::size_t prev = in_dim;
    for (std::size_t k = 0; k < num_layers; ++k) {
        const std::size_t next = k + 1 == num_layers ? out_dim : hidden;
        s.layers.push_back({xavier_init({prev, next}, rng), Tensor::zeros({next})});
        prev = next;
    }
    return s;
}

Model Model::init(const ModelConfig& config, std::size_t num_features, std::size_t num_classes, std::uint64_t seed,
                  std::size_t edge_feature_dim, std::size_t num_edge_types) {
    config.validate();
    Rng rng = make_rng(seed, kInitStream);
    Model m;
    m.config = config;
    m.seed = seed;
    m.num_features = num_features;
    m.num_classes = num_classes;
    m.stack = GcnStack::init(num_features, config.hidden_units, num_classes, config.num_layers, rng);
    if (config.gisst) {
        GisstParams p;
        p.m = xavier_init({num_features}, rng);
        p.b = xavier_init({2 * num_features}, rng);
        if (num_edge_types > 0) {
            for (std::size_t r = 0; r < num_edge_types; ++r) {
                TypedEdgeParams t{xavier_init({2 * num_features}, rng), std::nullopt};
                if (edge_feature_dim > 0) t.a = xavier_init({edge_feature_dim}, rng);
                p.typed.push_back(std::move(t));
            }
        } else if (edge_feature_dim > 0) {
            p.a = xavier_init({edge_feature_dim}, rng);
        }
        m.gisst = std::move(p);
    }
    return m;
}

ModelVars bind(ad::Tape& tape, const Model& model, bool requires_grad) {
    auto put = [&](const Tensor& t) { return requires_grad ? tape.parameter(t) : tape.constant(t); };
    ModelVars v;
    for (const auto& layer : model.stack.layers) {
        v.weights.push_back(put(layer.weight));
        v.biases.push_back(put(layer.bias));
    }
    if (model.gisst) {
        const auto& p = *model.gisst;
        GisstVars g{put(p.m), put(p.b), std::nullopt, {}};
        if (p.a) g.a = put(*p.a);
        for (const auto& t : p.typed) {
            std::optional<Var> a;
            if (t.a) a = put(*t.a);
            g.typed.emplace_back(put(t.b), a);
        }
        v.gisst = std::move(g);
    }
    return v;
}

Var feature_probs(const GisstVars& params) { return ad::sigmoid(params.m); }

namespace {

Var attention_logits(Var b, const std::optional<Var>& a, Var masked, std::span<const std::size_t> src,
                     std::span<const std::size_t> tgt, const EdgeAttributes* attributes) {
    const std::size_t d = masked.value().cols();
    if (b.value().size() != 2 * d) {
        throw dimension_error("edge attention weights " + shape_string(b.shape()) + " for " + std::to_string(d) +
                              " features");
    }
    Var s_src = ad::matvec(masked, ad::slice(b, 0, d));
    Var s_tgt = ad::matvec(masked, ad::slice(b, d, d));
    Var logit = ad::add(ad::gather(s_src, src), ad::gather(s_tgt, tgt));
    const bool has_feats = attributes && attributes->features;
    if (has_feats != a.has_value()) {
        throw precondition_error(has_feats ? "edge features given but model has no coefficients a"
                                           : "model has edge-feature coefficients but no edge features were given");
    }
    if (has_feats) {
        const Tensor& z = *attributes->features;
        if (z.rank() != 2 || z.rows() != src.size() || z.cols() != a->value().size()) {
            throw dimension_error("edge features " + shape_string(z.shape) + " vs " + std::to_string(src.size()) +
                                  " edges and coefficients " + shape_string(a->shape()));
        }
        logit = ad::add(logit, ad::matvec(b.tape().constant(z), *a));
    }
    return logit;
}

}  // namespace

Var edge_probs(const GisstVars& params, Var probs, Var features, std::span<const ad::Edge> edges,
               const EdgeAttributes* attributes) {
    Var masked = ad::mul_cols(features, probs);
    std::vector<std::size_t> src(edges.size()), tgt(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        src[k] = edges[k].source;
        tgt[k] = edges[k].target;
    }
    auto& tape = probs.tape();
    const bool typed = attributes && !attributes->types.empty();
    if (!typed) {
        if (!params.typed.empty()) throw precondition_error("typed model needs edge types");
        return ad::sigmoid(attention_logits(params.b, params.a, masked, src, tgt, attributes));
    }
    if (attributes->types.size() != edges.size()) throw dimension_error("one edge type per directed edge required");
    if (params.typed.empty()) throw precondition_error("edge types given but model has no typed parameters");
    for (auto t : attributes->types) {
        if (t >= params.typed.size()) throw precondition_error("unknown edge type " + std::to_string(t));
    }
    Var logit = tape.constant(Tensor::zeros({edges.size()}));
    for (std::size_t r = 0; r < params.typed.size(); ++r) {
        std::vector<double> sel(edges.size(), 0.0);
        for (std::size_t k = 0; k < edges.size(); ++k) sel[k] = attributes->types[k] == r ? 1.0 : 0.0;
        const auto& [b_r, a_r] = params.typed[r];
        Var l_r = attention_logits(b_r, a_r, masked, src, tgt, attributes);
        logit = ad::add(logit, ad::hadamard(l_r, tape.constant(Tensor::vector(std::move(sel)))));
    }
    return ad::sigmoid(logit);
}

Var gcn_forward(const ModelVars& vars, std::span<const ad::Edge> edges, std::size_t num_nodes, Var edge_weights,
                Var input, double dropout, bool training, Rng& rng) {
    if (input.value().rows() != num_nodes) {
        throw dimension_error("input " + shape_string(input.shape()) + " for " + std::to_string(num_nodes) + " nodes");
    }
    if (edge_weights.value().size() != edges.size()) {
        throw dimension_error("edge weights " + shape_string(edge_weights.shape()) + " for " +
                              std::to_string(edges.size()) + " edges");
    }
    std::vector<std::size_t> src(edges.size()), tgt(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        src[k] = edges[k].source;
        tgt[k] = edges[k].target;
    }
    // D~ = 1 + weighted in-degree; coef(u->v) = w / sqrt(D~u D~v), self-loop 1 / D~v.
    Var degree = ad::add_scalar(ad::scatter_add(edge_weights, tgt, num_nodes), 1.0);
    Var inv_sqrt = ad::pow(degree, -0.5);
    Var coef = ad::hadamard(ad::hadamard(ad::gather(inv_sqrt, src), edge_weights), ad::gather(inv_sqrt, tgt));
    Var self = ad::hadamard(inv_sqrt, inv_sqrt);

    Var h = input;
    const std::size_t layers = vars.weights.size();
    for (std::size_t k = 0; k < layers; ++k) {
        const auto& w = vars.weights[k].value();
        if (h.value().cols() != w.rows()) {
            throw dimension_error("layer " + std::to_string(k) + ": input " + shape_string(h.shape()) + " vs weight " +
                                  shape_string(w.shape));
        }
        Var hw = ad::matmul(h, vars.weights[k]);
        h = ad::add(ad::scatter_aggregate(coef, hw, edges), ad::mul_rows(hw, self));
        h = ad::add_bias(h, vars.biases[k]);
        if (k + 1 < layers) {
            h = ad::relu(h);
            h = ad::dropout(h, dropout, training, rng);
        }
    }
    return h;
}

Forward model_forward(ad::Tape& tape, const ModelVars& vars, const Model& model, const Graph& graph, bool training,
                      Rng& rng, const EdgeAttributes* attributes) {
    if (graph.num_features() != model.num_features) {
        throw dimension_error("graph has " + std::to_string(graph.num_features()) + " features, model expects " +
                              std::to_string(model.num_features));
    }
    Var x = tape.constant(graph.features);
    Forward f;
    if (vars.gisst) {
        Var p = feature_probs(*vars.gisst);
        Var pe = edge_probs(*vars.gisst, p, x, graph.edges, attributes);
        f.logits = gcn_forward(vars, graph.edges, graph.num_nodes, pe, ad::mul_cols(x, p), model.config.dropout,
                               training, rng);
        f.feature_probs = p;
        f.edge_probs = pe;
    } else {
        Var ones = tape.constant(Tensor::filled({graph.num_directed()}, 1.0));
        f.logits = gcn_forward(vars, graph.edges, graph.num_nodes, ones, x, model.config.dropout, training, rng);
    }
    return f;
}

Tensor predict_logits(const Model& model, const Graph& graph, const EdgeAttributes* attributes) {
    ad::Tape tape;
    Rng unused = make_rng(0, 0);
    auto vars = bind(tape, model, false);
    return model_forward(tape, vars, model, graph, false, unused, attributes).logits.value();
}

std::vector<int> predict(const Model& model, const Graph& graph) {
    const Tensor logits = predict_logits(model, graph);
    const std::size_t c = logits.cols();
    std::vector<int> out(logits.rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double* row = &logits.values[i * c];
        out[i] = static_cast<int>(std::max_element(row, row + c) - row);
    }
    return out;
}

double accuracy(const Model& model, const Graph& graph, std::span<const std::size_t> nodes) {
    if (nodes.empty()) return 0.0;
    const auto pred = predict(model, graph);
    std::size_t hit = 0;
    for (auto v : nodes) hit += pred[v] == graph.labels[v];
    return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

std::vector<double> feature_probabilities(const Model& model) {
    if (!model.gisst) throw precondition_error("plain GCN has no feature probabilities");
    std::vector<double> p = model.gisst->m.values;
    for (double& v : p) v = 1.0 / (1.0 + std::exp(-v));
    return p;
}

std::vector<double> edge_probabilities(const Model& model, const Graph& graph, const EdgeAttributes* attributes) {
    if (!model.gisst) throw precondition_error("plain GCN has no edge probabilities");
    ad::Tape tape;
    auto vars = bind(tape, model, false);
    Var p = feature_probs(*vars.gisst);
    return edge_probs(*vars.gisst, p, tape.constant(graph.features), graph.edges, attributes).value().values;
}

// Checkpoints ----------------------------------------------------------------

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
    return {{"hidden_units", c.hidden_units}, {"num_layers", c.num_layers}, {"dropout", c.dropout},
            {"learning_rate", c.learning_rate}, {"l2_penalty", c.l2_penalty}, {"l1_edge", c.l1_edge},
            {"ent_edge", c.ent_edge}, {"l1_feat", c.l1_feat}, {"ent_feat", c.ent_feat},
            {"epochs", c.epochs}, {"gisst", c.gisst}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "hidden_units") c.hidden_units = value.get<std::size_t>();
        else if (key == "num_layers") c.num_layers = value.get<std::size_t>();
        else if (key == "dropout") c.dropout = value.get<double>();
        else if (key == "learning_rate") c.learning_rate = value.get<double>();
        else if (key == "l2_penalty") c.l2_penalty = value.get<double>();
        else if (key == "l1_edge") c.l1_edge = value.get<double>();
        else if (key == "ent_edge") c.ent_edge = value.get<double>();
        else if (key == "l1_feat") c.l1_feat = value.get<double>();
        else if (key == "ent_feat") c.ent_feat = value.get<double>();
        else if (key == "epochs") c.epochs = value.get<std::size_t>();
        else if (key == "gisst") c.gisst = value.get<bool>();
        else throw precondition_error("unknown model config key '" + key + "'");
    }
    return c;
}


std::string model_to_json(const Model& model) {
    json j;
    j["kind"] = model.gisst ? "gisst" : "gcn";
    j["config"] = config_to_json(model.config);
    j["seed"] = model.seed;
    j["num_features"] = model.num_features;
    j["num_classes"] = model.num_classes;
    json layers = json::array();
    for (const auto& l : model.stack.layers) layers.push_back({{"weight", tensor_to_json(l.weight)}, {"bias", tensor_to_json(l.bias)}});
    j["layers"] = layers;
    if (model.gisst) {
        const auto& p = *model.gisst;
        json g{{"m", tensor_to_json(p.m)}, {"b", tensor_to_json(p.b)}};
        if (p.a) g["a"] = tensor_to_json(*p.a);
        json typed = json::array();
        for (const auto& t : p.typed) {
            json e{{"b", tensor_to_json(t.b)}};
            if (t.a) e["a"] = tensor_to_json(*t.a);
            typed.push_back(e);
        }
        g["typed"] = typed;
        j["gisst"] = g;
    }
    return j.dump();
}

Model model_from_json(const std::string& text) {
    const json j = json::parse(text);
    Model m;
    m.config = config_from_json(j.at("config"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.num_features = j.at("num_features").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    for (const auto& l : j.at("layers")) {
        m.stack.layers.push_back({tensor_from_json(l.at("weight")), tensor_from_json(l.at("bias"))});
    }
    const bool is_gisst = j.at("kind").get<std::string>() == "gisst";
    if (is_gisst != m.config.gisst) throw precondition_error("checkpoint kind disagrees with its config");
    if (is_gisst) {
        const auto& g = j.at("gisst");
        GisstParams p;
        p.m = tensor_from_json(g.at("m"));
        p.b = tensor_from_json(g.at("b"));
        if (g.contains("a")) p.a = tensor_from_json(g.at("a"));
        for (const auto& t : g.at("typed")) {
            TypedEdgeParams tp{tensor_from_json(t.at("b")), std::nullopt};
            if (t.contains("a")) tp.a = tensor_from_json(t.at("a"));
            p.typed.push_back(std::move(tp));
        }
        m.gisst = std::move(p);
    }
    return m;
}

void save_model(const Model& model, const std::filesystem::path& path) { write_text_file(path, model_to_json(model)); }

Model load_model(const std::filesystem::path& path) { return model_from_json(read_text_file(path)); }

}  // namespace gisst
