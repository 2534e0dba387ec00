#include "gisst/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gisst::ad {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }
std::optional<Tensor> Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }
Var Tape::parameter(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

std::optional<Tensor> Tape::grad(std::size_t id) const {
    const auto& n = nodes_[id];
    if (!n.requires_grad) return std::nullopt;
    if (n.grad.empty()) return Tensor::zeros(n.value.shape);
    return Tensor(n.value.shape, n.grad);
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void Tape::accumulate(std::size_t id, std::span<const double> g) {
    if (!nodes_[id].requires_grad) return;
    auto& buf = grad_buffer(id);
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

void Tape::zero_grad() {
    for (auto& n : nodes_) n.grad.clear();
}

void Tape::backward(Var loss) {
    if (loss.value().size() != 1) {
        throw dimension_error("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    if (!requires_grad(loss.id())) return;
    grad_buffer(loss.id())[0] += 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
        // Rules only write to their inputs' buffers, so this view stays valid.
        n.backward(*this, std::span<const double>(n.grad));
    }
}

namespace {

void require_same_shape(const char* op, Var a, Var b) {
    if (a.shape() != b.shape()) {
        throw dimension_error(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                              shape_string(b.shape()));
    }
}

void require_rank(const char* op, Var a, std::size_t rank) {
    if (a.shape().size() != rank) {
        throw dimension_error(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                              shape_string(a.shape()));
    }
}

bool any_grad(Var a) { return a.requires_grad(); }
bool any_grad(Var a, Var b) { return a.requires_grad() || b.requires_grad(); }

}  // namespace

Var matmul(Var a, Var b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const auto& A = a.value();
    const auto& B = b.value();
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    if (B.rows() != k) {
        throw dimension_error("matmul: inner dimensions differ, " + shape_string(A.shape) + " vs " +
                              shape_string(B.shape));
    }
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A.values[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = &B.values[p * m];
            double* orow = &out.values[i * m];
            for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), any_grad(a, b), [ia, ib, n, k, m](Tape& t, std::span<const double> g) {
        const auto& A = t.value(ia).values;
        const auto& B = t.value(ib).values;
        if (t.requires_grad(ia)) {
            auto& ga = t.grad_buffer(ia);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * B[p * m + j];
                    ga[i * k + p] += s;
                }
        }
        if (t.requires_grad(ib)) {
            auto& gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = A[i * k + p];
                    if (aip == 0.0) continue;
                    for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += aip * g[i * m + j];
                }
        }
    });
}

Var add(Var a, Var b) {
    require_same_shape("add", a, b);
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += b.value().values[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), any_grad(a, b), [ia, ib](Tape& t, std::span<const double> g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var sub(Var a, Var b) {
    require_same_shape("sub", a, b);
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= b.value().values[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), any_grad(a, b), [ia, ib](Tape& t, std::span<const double> g) {
        t.accumulate(ia, g);
        if (t.requires_grad(ib)) {
            auto& gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var hadamard(Var a, Var b) {
    require_same_shape("hadamard", a, b);
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= b.value().values[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), any_grad(a, b), [ia, ib](Tape& t, std::span<const double> g) {
        const auto& A = t.value(ia).values;
        const auto& B = t.value(ib).values;
        if (t.requires_grad(ia)) {
            auto& ga = t.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
        }
        if (t.requires_grad(ib)) {
            auto& gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
        }
    });
}

Var sigmoid(Var a) {
    Tensor out = a.value();
    for (double& v : out.values) {
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    const auto ia = a.id();
    const auto io = a.tape().size();  // slot this node will occupy
    return a.tape().record(std::move(out), any_grad(a), [ia, io](Tape& t, std::span<const double> g) {
        const auto& s = t.value(io).values;
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
    });
}

Var relu(Var a) {
    Tensor out = a.value();
    for (double& v : out.values) v = v > 0.0 ? v : 0.0;
    const auto ia = a.id();
    return a.tape().record(std::move(out), any_grad(a), [ia](Tape& t, std::span<const double> g) {
        const auto& x = t.value(ia).values;
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) ga[i] += g[i];
    });
}

Var log(Var a) {
    Tensor out = a.value();
    for (double& v : out.values) {
        if (!(v > 0.0)) throw numeric_error("log: non-positive input " + std::to_string(v));
        v = std::log(v);
    }
    const auto ia = a.id();
    return a.tape().record(std::move(out), any_grad(a), [ia](Tape& t, std::span<const double> g) {
        const auto& x = t.value(ia).values;
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double factor) {
    Tensor out = a.value();
    for (double& v : out.values) v *= factor;
    const auto ia = a.id();
    return a.tape().record(std::move(out), any_grad(a), [ia, factor](Tape& t, std::span<const double> g) {
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
}

Var add_scalar(Var a, double c) {
    Tensor out = a.value();
    for (double& v : out.values) v += c;
    const auto ia = a.id();
    return a.tape().record(std::move(out), any_grad(a), [ia](Tape& t, std::span<const double> g) { t.accumulate(ia, g); });
}

Var pow(Var a, double exponent) {
    Tensor out = a.value();
    for (double& v : out.values) {
        if (!(v > 0.0)) throw numeric_error("pow: non-positive base " + std::to_string(v));
        v = std::pow(v, exponent);
    }
    const auto ia = a.id();
    return a.tape().record(std::move(out), any_grad(a), [ia, exponent](Tape& t, std::span<const double> g) {
        const auto& x = t.value(ia).values;
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * exponent * std::pow(x[i], exponent - 1.0);
    });
}

Var clamp(Var a, double lo, double hi) {
    Tensor out = a.value();
    for (double& v : out.values) v = std::clamp(v, lo, hi);
    const auto ia = a.id();
    return a.tape().record(std::move(out), any_grad(a), [ia, lo, hi](Tape& t, std::span<const double> g) {
        const auto& x = t.value(ia).values;
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > lo && x[i] < hi) ga[i] += g[i];
    });
}

Var concat_rows(Var a, Var b) {
    require_rank("concat_rows", a, 1);
    require_rank("concat_rows", b, 1);
    if (a.shape() != b.shape()) {
        throw dimension_error("concat_rows: length mismatch " + shape_string(a.shape()) + " vs " +
                              shape_string(b.shape()));
    }
    std::vector<double> v = a.value().values;
    v.insert(v.end(), b.value().values.begin(), b.value().values.end());
    const auto ia = a.id(), ib = b.id();
    const std::size_t d = a.value().size();
    return a.tape().record(Tensor::vector(std::move(v)), any_grad(a, b), [ia, ib, d](Tape& t, std::span<const double> g) {
        t.accumulate(ia, g.first(d));
        t.accumulate(ib, g.subspan(d));
    });
}

Var slice(Var a, std::size_t begin, std::size_t length) {
    require_rank("slice", a, 1);
    if (begin + length > a.value().size()) {
        throw dimension_error("slice: range [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                              ") exceeds " + shape_string(a.shape()));
    }
    const auto& src = a.value().values;
    std::vector<double> v(src.begin() + static_cast<std::ptrdiff_t>(begin),
                          src.begin() + static_cast<std::ptrdiff_t>(begin + length));
    const auto ia = a.id();
    return a.tape().record(Tensor::vector(std::move(v)), any_grad(a), [ia, begin](Tape& t, std::span<const double> g) {
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[begin + i] += g[i];
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values) s += v;
    const auto ia = a.id();
    return a.tape().record(Tensor::scalar(s), any_grad(a), [ia](Tape& t, std::span<const double> g) {
        auto& ga = t.grad_buffer(ia);
        for (double& x : ga) x += g[0];
    });
}

Var mean(Var a) {
    const auto n = a.value().size();
    if (n == 0) throw precondition_error("mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mul_cols(Var m, Var v) {
    require_rank("mul_cols", m, 2);
    require_rank("mul_cols", v, 1);
    const std::size_t n = m.value().rows(), d = m.value().cols();
    if (v.value().size() != d) {
        throw dimension_error("mul_cols: " + shape_string(m.shape()) + " vs " + shape_string(v.shape()));
    }
    Tensor out = m.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.values[i * d + j] *= v.value().values[j];
    const auto im = m.id(), iv = v.id();
    return m.tape().record(std::move(out), any_grad(m, v), [im, iv, n, d](Tape& t, std::span<const double> g) {
        const auto& M = t.value(im).values;
        const auto& V = t.value(iv).values;
        if (t.requires_grad(im)) {
            auto& gm = t.grad_buffer(im);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gm[i * d + j] += g[i * d + j] * V[j];
        }
        if (t.requires_grad(iv)) {
            auto& gv = t.grad_buffer(iv);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gv[j] += g[i * d + j] * M[i * d + j];
        }
    });
}

Var mul_rows(Var m, Var s) {
    require_rank("mul_rows", m, 2);
    require_rank("mul_rows", s, 1);
    const std::size_t n = m.value().rows(), h = m.value().cols();
    if (s.value().size() != n) {
        throw dimension_error("mul_rows: " + shape_string(m.shape()) + " vs " + shape_string(s.shape()));
    }
    Tensor out = m.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < h; ++j) out.values[i * h + j] *= s.value().values[i];
    const auto im = m.id(), is = s.id();
    return m.tape().record(std::move(out), any_grad(m, s), [im, is, n, h](Tape& t, std::span<const double> g) {
        const auto& M = t.value(im).values;
        const auto& S = t.value(is).values;
        if (t.requires_grad(im)) {
            auto& gm = t.grad_buffer(im);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < h; ++j) gm[i * h + j] += g[i * h + j] * S[i];
        }
        if (t.requires_grad(is)) {
            auto& gs = t.grad_buffer(is);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < h; ++j) gs[i] += g[i * h + j] * M[i * h + j];
        }
    });
}

Var add_bias(Var m, Var v) {
    require_rank("add_bias", m, 2);
    require_rank("add_bias", v, 1);
    const std::size_t n = m.value().rows(), h = m.value().cols();
    if (v.value().size() != h) {
        throw dimension_error("add_bias: " + shape_string(m.shape()) + " vs " + shape_string(v.shape()));
    }
    Tensor out = m.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < h; ++j) out.values[i * h + j] += v.value().values[j];
    const auto im = m.id(), iv = v.id();
    return m.tape().record(std::move(out), any_grad(m, v), [im, iv, n, h](Tape& t, std::span<const double> g) {
        t.accumulate(im, g);
        if (t.requires_grad(iv)) {
            auto& gv = t.grad_buffer(iv);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < h; ++j) gv[j] += g[i * h + j];
        }
    });
}

Var matvec(Var m, Var v) {
    require_rank("matvec", m, 2);
    require_rank("matvec", v, 1);
    const std::size_t e = m.value().rows(), k = m.value().cols();
    if (v.value().size() != k) {
        throw dimension_error("matvec: " + shape_string(m.shape()) + " vs " + shape_string(v.shape()));
    }
    Tensor out = Tensor::zeros({e});
    const auto& M = m.value().values;
    const auto& V = v.value().values;
    for (std::size_t i = 0; i < e; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += M[i * k + j] * V[j];
        out.values[i] = s;
    }
    const auto im = m.id(), iv = v.id();
    return m.tape().record(std::move(out), any_grad(m, v), [im, iv, e, k](Tape& t, std::span<const double> g) {
        const auto& M = t.value(im).values;
        const auto& V = t.value(iv).values;
        if (t.requires_grad(im)) {
            auto& gm = t.grad_buffer(im);
            for (std::size_t i = 0; i < e; ++i)
                for (std::size_t j = 0; j < k; ++j) gm[i * k + j] += g[i] * V[j];
        }
        if (t.requires_grad(iv)) {
            auto& gv = t.grad_buffer(iv);
            for (std::size_t i = 0; i < e; ++i)
                for (std::size_t j = 0; j < k; ++j) gv[j] += g[i] * M[i * k + j];
        }
    });
}

Var gather(Var v, std::span<const std::size_t> index) {
    require_rank("gather", v, 1);
    const auto n = v.value().size();
    std::vector<std::size_t> idx(index.begin(), index.end());
    std::vector<double> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= n) throw dimension_error("gather: index " + std::to_string(idx[k]) + " out of range " + std::to_string(n));
        out[k] = v.value().values[idx[k]];
    }
    const auto iv = v.id();
    return v.tape().record(Tensor::vector(std::move(out)), any_grad(v),
                           [iv, idx = std::move(idx)](Tape& t, std::span<const double> g) {
                               auto& gv = t.grad_buffer(iv);
                               for (std::size_t k = 0; k < idx.size(); ++k) gv[idx[k]] += g[k];
                           });
}

Var scatter_add(Var v, std::span<const std::size_t> index, std::size_t size) {
    require_rank("scatter_add", v, 1);
    if (index.size() != v.value().size()) {
        throw dimension_error("scatter_add: " + std::to_string(index.size()) + " indices for " + shape_string(v.shape()));
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    std::vector<double> out(size, 0.0);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= size) throw dimension_error("scatter_add: index " + std::to_string(idx[k]) + " out of range " + std::to_string(size));
        out[idx[k]] += v.value().values[k];
    }
    const auto iv = v.id();
    return v.tape().record(Tensor::vector(std::move(out)), any_grad(v),
                           [iv, idx = std::move(idx)](Tape& t, std::span<const double> g) {
                               auto& gv = t.grad_buffer(iv);
                               for (std::size_t k = 0; k < idx.size(); ++k) gv[k] += g[idx[k]];
                           });
}

Var scatter_aggregate(Var edge_weights, Var src_values, std::span<const Edge> edges) {
    require_rank("scatter_aggregate", edge_weights, 1);
    require_rank("scatter_aggregate", src_values, 2);
    const std::size_t n = src_values.value().rows(), h = src_values.value().cols();
    if (edge_weights.value().size() != edges.size()) {
        throw dimension_error("scatter_aggregate: " + std::to_string(edges.size()) + " edges but weights " +
                              shape_string(edge_weights.shape()));
    }
    std::vector<Edge> es(edges.begin(), edges.end());
    for (const auto& e : es) {
        if (e.source >= n || e.target >= n) {
            throw dimension_error("scatter_aggregate: edge " + std::to_string(e.source) + "->" + std::to_string(e.target) +
                                  " out of range for " + std::to_string(n) + " nodes");
        }
    }
    Tensor out = Tensor::zeros({n, h});
    const auto& W = edge_weights.value().values;
    const auto& S = src_values.value().values;
    for (std::size_t k = 0; k < es.size(); ++k) {
        const double w = W[k];
        const double* srow = &S[es[k].source * h];
        double* orow = &out.values[es[k].target * h];
        for (std::size_t j = 0; j < h; ++j) orow[j] += w * srow[j];
    }
    const auto iw = edge_weights.id(), is = src_values.id();
    return edge_weights.tape().record(
        std::move(out), any_grad(edge_weights, src_values),
        [iw, is, h, es = std::move(es)](Tape& t, std::span<const double> g) {
            const auto& W = t.value(iw).values;
            const auto& S = t.value(is).values;
            if (t.requires_grad(iw)) {
                auto& gw = t.grad_buffer(iw);
                for (std::size_t k = 0; k < es.size(); ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < h; ++j) s += g[es[k].target * h + j] * S[es[k].source * h + j];
                    gw[k] += s;
                }
            }
            if (t.requires_grad(is)) {
                auto& gs = t.grad_buffer(is);
                for (std::size_t k = 0; k < es.size(); ++k)
                    for (std::size_t j = 0; j < h; ++j) gs[es[k].source * h + j] += W[k] * g[es[k].target * h + j];
            }
        });
}

Var softmax_cross_entropy(Var logits, const Tensor& labels, std::span<const std::size_t> mask) {
    require_rank("softmax_cross_entropy", logits, 2);
    if (labels.shape != logits.shape()) {
        throw dimension_error("softmax_cross_entropy: logits " + shape_string(logits.shape()) + " vs labels " +
                              shape_string(labels.shape));
    }
    if (mask.empty()) throw precondition_error("softmax_cross_entropy: empty node mask");
    const std::size_t n = logits.value().rows(), c = logits.value().cols();
    if (c < 2) throw precondition_error("softmax_cross_entropy: need at least two classes");
    std::vector<std::size_t> rows(mask.begin(), mask.end());
    const auto& L = logits.value().values;
    // probs of masked rows, cached for backward
    std::vector<double> probs(rows.size() * c);
    double loss = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        if (i >= n) throw dimension_error("softmax_cross_entropy: mask row " + std::to_string(i) + " out of range");
        const double* li = &L[i * c];
        const double mx = *std::max_element(li, li + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(li[j] - mx);
        const double logz = std::log(z) + mx;
        double ysum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double y = labels.values[i * c + j];
            ysum += y;
            loss -= y * (li[j] - logz);
            probs[r * c + j] = std::exp(li[j] - logz);
        }
        if (std::abs(ysum - 1.0) > 1e-9) {
            throw precondition_error("softmax_cross_entropy: label row " + std::to_string(i) + " does not sum to 1");
        }
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    loss *= inv;
    std::vector<double> y_rows(rows.size() * c);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < c; ++j) y_rows[r * c + j] = labels.values[rows[r] * c + j];
    const auto il = logits.id();
    return logits.tape().record(
        Tensor::scalar(loss), any_grad(logits),
        [il, c, inv, rows = std::move(rows), probs = std::move(probs), y_rows = std::move(y_rows)](
            Tape& t, std::span<const double> g) {
            auto& gl = t.grad_buffer(il);
            for (std::size_t r = 0; r < rows.size(); ++r)
                for (std::size_t j = 0; j < c; ++j)
                    gl[rows[r] * c + j] += g[0] * inv * (probs[r * c + j] - y_rows[r * c + j]);
        });
}

Var dropout(Var a, double rate, bool training, std::mt19937_64& rng) {
    if (!training || rate <= 0.0) return a;
    if (rate >= 1.0) throw precondition_error("dropout rate must be in [0, 1)");
    std::bernoulli_distribution keep(1.0 - rate);
    const double s = 1.0 / (1.0 - rate);
    std::vector<double> mask(a.value().size());
    for (double& m : mask) m = keep(rng) ? s : 0.0;
    Var m = a.tape().constant(Tensor(a.shape(), std::move(mask)));
    return hadamard(a, m);
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
    Tensor out = Tensor::zeros({labels.size(), num_classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw precondition_error("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(num_classes) + ")");
        }
        out.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return out;
}

}  // namespace gisst::ad
