#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <string>
#include <vector>

#include "gisst/autodiff.hpp"
#include "gisst/model.hpp"
#include "gisst/train.hpp"
#include "oracles.hpp"

namespace fixture {

using gisst::Tensor;
namespace ad = gisst::ad;

struct OpCase {
    std::string name;
    oracle::VarFn f;
    std::vector<Tensor> inputs;
};

inline const std::vector<ad::Edge>& small_edges() {
    static const std::vector<ad::Edge> edges{{0, 1}, {1, 0}, {1, 2}, {2, 1}, {3, 2}, {0, 3}};
    return edges;
}

/// One case per differentiable op, inputs kept away from kinks.
inline std::vector<OpCase> op_gradient_cases() {
    using oracle::random_tensor;
    const Tensor m34 = random_tensor({3, 4}, 1);
    const Tensor m34b = random_tensor({3, 4}, 2);
    const Tensor m42 = random_tensor({4, 2}, 3);
    const Tensor v4 = random_tensor({4}, 4);
    const Tensor v4b = random_tensor({4}, 15);
    const Tensor v3 = random_tensor({3}, 5);
    const Tensor pos = random_tensor({3, 4}, 6, 0.2, 2.0);
    const Tensor src = random_tensor({4, 3}, 7);
    const Tensor ew = random_tensor({small_edges().size()}, 8, 0.1, 1.0);
    Tensor away = random_tensor({3, 4}, 9);
    for (auto& v : away.values) v += v >= 0 ? 0.1 : -0.1;
    static const std::vector<std::size_t> idx{2, 0, 3, 3, 1};
    static const std::size_t rows[] = {0, 2};
    static const Tensor labels = ad::one_hot(std::vector<int>{1, 0, 1}, 4);

    return {
        {"matmul", [](ad::Tape&, const auto& x) { return ad::matmul(x[0], x[1]); }, {m34, m42}},
        {"add", [](ad::Tape&, const auto& x) { return ad::add(x[0], x[1]); }, {m34, m34b}},
        {"sub", [](ad::Tape&, const auto& x) { return ad::sub(x[0], x[1]); }, {m34, m34b}},
        {"hadamard", [](ad::Tape&, const auto& x) { return ad::hadamard(x[0], x[1]); }, {m34, m34b}},
        {"sigmoid", [](ad::Tape&, const auto& x) { return ad::sigmoid(x[0]); }, {m34}},
        {"relu", [](ad::Tape&, const auto& x) { return ad::relu(x[0]); }, {away}},
        {"log", [](ad::Tape&, const auto& x) { return ad::log(x[0]); }, {pos}},
        {"neg", [](ad::Tape&, const auto& x) { return ad::neg(x[0]); }, {m34}},
        {"scale", [](ad::Tape&, const auto& x) { return ad::scale(x[0], -2.5); }, {m34}},
        {"add_scalar", [](ad::Tape&, const auto& x) { return ad::add_scalar(x[0], 3.0); }, {m34}},
        {"pow", [](ad::Tape&, const auto& x) { return ad::pow(x[0], -0.5); }, {pos}},
        {"clamp", [](ad::Tape&, const auto& x) { return ad::clamp(x[0], -0.5, 0.5); }, {away}},
        {"concat_rows", [](ad::Tape&, const auto& x) { return ad::concat_rows(x[0], x[1]); }, {v4, v4b}},
        {"slice", [](ad::Tape&, const auto& x) { return ad::slice(x[0], 1, 2); }, {v4}},
        {"sum", [](ad::Tape&, const auto& x) { return ad::sum(x[0]); }, {m34}},
        {"mean", [](ad::Tape&, const auto& x) { return ad::mean(x[0]); }, {m34}},
        {"mul_cols", [](ad::Tape&, const auto& x) { return ad::mul_cols(x[0], x[1]); }, {m34, v4}},
        {"mul_rows", [](ad::Tape&, const auto& x) { return ad::mul_rows(x[0], x[1]); }, {m34, v3}},
        {"add_bias", [](ad::Tape&, const auto& x) { return ad::add_bias(x[0], x[1]); }, {m34, v4}},
        {"matvec", [](ad::Tape&, const auto& x) { return ad::matvec(x[0], x[1]); }, {m34, v4}},
        {"gather", [](ad::Tape&, const auto& x) { return ad::gather(x[0], idx); }, {v4}},
        {"scatter_add", [](ad::Tape&, const auto& x) { return ad::scatter_add(x[0], idx, 6); },
         {random_tensor({5}, 10)}},
        {"scatter_aggregate",
         [](ad::Tape&, const auto& x) { return ad::scatter_aggregate(x[0], x[1], small_edges()); }, {ew, src}},
        {"softmax_cross_entropy",
         [](ad::Tape&, const auto& x) { return ad::softmax_cross_entropy(x[0], labels, rows); }, {m34}},
        {"dropout",
         [](ad::Tape&, const auto& x) {
             auto r = gisst::make_rng(3, 3);
             return ad::dropout(x[0], 0.4, true, r);
         },
         {m34}},
        {"entropy_reg", [](ad::Tape&, const auto& x) { return gisst::entropy_reg(ad::sigmoid(x[0])); }, {v4}},
        {"l1_reg", [](ad::Tape&, const auto& x) { return gisst::l1_reg(ad::sigmoid(x[0])); }, {v4}},
    };
}

/// 10 nodes, 13 undirected edges, 6 features, 3 classes, every node in the train mask.
inline gisst::Graph ten_node_graph() {
    const Tensor x = oracle::random_tensor({10, 6}, 101, -1.0, 2.0);
    std::vector<gisst::UndirectedEdge> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {2, 5}, {5, 6},
                                             {6, 7}, {7, 8}, {8, 9}, {9, 5}, {1, 7}, {3, 8}};
    auto g = gisst::Graph::build(10, edges, x, {0, 1, 2, 0, 1, 2, 0, 1, 2, 0}, 3);
    for (std::size_t i = 0; i < 10; ++i) g.masks.train.push_back(i);
    return g;
}

/// Largest relative error between the analytic gradient of the full GISST objective (tape terms
/// plus the L2 term applied through weight decay) and central differences of its value.
inline double gisst_loss_fd_error(std::uint64_t seed, double h = 1e-6) {
    const gisst::Graph g = ten_node_graph();
    gisst::ModelConfig c;
    c.hidden_units = 5;
    c.num_layers = 2;
    c.dropout = 0.0;
    c.l1_edge = 0.05;
    c.ent_edge = 0.1;
    c.l1_feat = 0.05;
    c.ent_feat = 0.1;
    c.l2_penalty = 0.005;
    gisst::Model model = gisst::Model::init(c, 6, 3, seed);

    ad::Tape tape;
    auto vars = gisst::bind(tape, model, true);
    auto rng = gisst::make_rng(0, 0);
    auto terms = gisst::total_loss(tape, vars, model, g, g.masks.train, false, rng);
    tape.backward(terms.total);

    std::vector<std::pair<Tensor*, ad::Var>> params;
    for (std::size_t k = 0; k < model.stack.layers.size(); ++k) {
        params.emplace_back(&model.stack.layers[k].weight, vars.weights[k]);
        params.emplace_back(&model.stack.layers[k].bias, vars.biases[k]);
    }
    const std::size_t decayed = params.size();
    params.emplace_back(&model.gisst->m, vars.gisst->m);
    params.emplace_back(&model.gisst->b, vars.gisst->b);

    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = *params[p].first;
        const Tensor grad = *params[p].second.grad();
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const double analytic = grad.values[i] + (p < decayed ? c.l2_penalty * t.values[i] : 0.0);
            const double orig = t.values[i];
            t.values[i] = orig + h;
            const double up = gisst::total_loss(model, g).total;
            t.values[i] = orig - h;
            const double down = gisst::total_loss(model, g).total;
            t.values[i] = orig;
            worst = std::max(worst, oracle::rel_err(analytic, (up - down) / (2 * h)));
        }
    }
    return worst;
}

}  // namespace fixture
