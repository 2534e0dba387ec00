#include "gisst/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "gisst/random.hpp"

namespace gisst {

namespace {

enum Stream : std::uint64_t { kStructure = 1, kFeatures = 2, kMasks = 3, kSecondCommunity = 4 };

// Edge list under construction; rejects duplicates and self-loops.
class EdgeBuilder {
public:
    bool add(std::size_t a, std::size_t b) {
        if (a == b) return false;
        UndirectedEdge e(a, b);
        if (!seen_.insert(e).second) return false;
        list_.push_back(e);
        return true;
    }
    bool contains(std::size_t a, std::size_t b) const { return seen_.count(UndirectedEdge(a, b)) > 0; }
    std::vector<UndirectedEdge>& list() { return list_; }

private:
    std::set<UndirectedEdge> seen_;
    std::vector<UndirectedEdge> list_;
};

// Preferential attachment: each new node links to m distinct existing nodes drawn
// proportionally to degree (repeated-node list), seeded with m isolated nodes.
void barabasi_albert(std::size_t n, std::size_t m, Rng& rng, EdgeBuilder& edges) {
    if (m < 1 || m >= n) throw precondition_error("BA growth parameter must satisfy 1 <= m < n");
    std::vector<std::size_t> targets(m);
    std::iota(targets.begin(), targets.end(), 0);
    std::vector<std::size_t> repeated;
    for (std::size_t source = m; source < n; ++source) {
        for (auto t : targets) edges.add(source, t);
        repeated.insert(repeated.end(), targets.begin(), targets.end());
        repeated.insert(repeated.end(), m, source);
        std::set<std::size_t> chosen;
        std::uniform_int_distribution<std::size_t> pick(0, repeated.size() - 1);
        while (chosen.size() < m) chosen.insert(repeated[pick(rng)]);
        targets.assign(chosen.begin(), chosen.end());
    }
}

void balanced_binary_tree(std::size_t n, EdgeBuilder& edges) {
    for (std::size_t i = 1; i < n; ++i) edges.add((i - 1) / 2, i);
}

struct Motif {
    std::size_t size = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // local ids
    std::vector<int> roles;                                  // class per local node
    std::size_t anchor = 0;                                  // local node that attaches to the base
};

// Local ids: 0 top, 1-2 middle, 3-4 bottom. Roof 0-1, 0-2; body cycle 1-2-4-3-1.
Motif house_motif() {
    return {5, {{0, 1}, {0, 2}, {1, 2}, {2, 4}, {4, 3}, {3, 1}}, {1, 2, 2, 3, 3}, 3};
}

Motif cycle_motif(std::size_t len) {
    Motif m{len, {}, std::vector<int>(len, 1), 0};
    for (std::size_t i = 0; i < len; ++i) m.edges.emplace_back(i, (i + 1) % len);
    return m;
}

Motif grid_motif(std::size_t side) {
    Motif m{side * side, {}, std::vector<int>(side * side, 1), 0};
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            const std::size_t i = r * side + c;
            if (c + 1 < side) m.edges.emplace_back(i, i + 1);
            if (r + 1 < side) m.edges.emplace_back(i, i + side);
        }
    return m;
}

struct Structure {
    std::size_t num_nodes = 0;
    EdgeBuilder edges;
    std::vector<int> labels;
    GroundTruth truth;
};

// Base graph, then motifs in attachment order, then perturbation edges.
void attach_motifs(Structure& s, const Motif& motif, std::size_t num_motifs, std::size_t base_nodes, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick_base(0, base_nodes - 1);
    s.truth.motif_size = motif.size;
    for (std::size_t k = 0; k < num_motifs; ++k) {
        const std::size_t offset = s.num_nodes;
        std::vector<std::size_t> members(motif.size);
        for (std::size_t i = 0; i < motif.size; ++i) {
            members[i] = offset + i;
            s.labels.push_back(motif.roles[i]);
        }
        s.num_nodes += motif.size;
        for (auto [a, b] : motif.edges) {
            s.edges.add(offset + a, offset + b);
            s.truth.important_edges.insert(UndirectedEdge(offset + a, offset + b));
        }
        s.edges.add(offset + motif.anchor, pick_base(rng));
        s.truth.motif_nodes.push_back(std::move(members));
    }
}

void perturb(Structure& s, double ratio, Rng& rng) {
    const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(s.num_nodes)));
    std::uniform_int_distribution<std::size_t> pick(0, s.num_nodes - 1);
    std::size_t added = 0;
    while (added < count) {
        if (s.edges.add(pick(rng), pick(rng))) ++added;
    }
}

Structure ba_house_structure(const DatasetSpec& spec, Rng& rng) {
    Structure s;
    s.num_nodes = spec.base_nodes;
    s.labels.assign(spec.base_nodes, 0);
    barabasi_albert(spec.base_nodes, spec.ba_edges_per_node, rng, s.edges);
    attach_motifs(s, house_motif(), spec.num_motifs, spec.base_nodes, rng);
    perturb(s, spec.perturbation_ratio, rng);
    return s;
}

Structure tree_structure(const DatasetSpec& spec, const Motif& motif, Rng& rng) {
    Structure s;
    s.num_nodes = spec.base_nodes;
    s.labels.assign(spec.base_nodes, 0);
    balanced_binary_tree(spec.base_nodes, s.edges);
    attach_motifs(s, motif, spec.num_motifs, spec.base_nodes, rng);
    perturb(s, spec.perturbation_ratio, rng);
    return s;
}

Structure ba_community_structure(const DatasetSpec& spec) {
    Rng first_rng = make_rng(spec.seed, kStructure);
    Rng second_rng = make_rng(spec.seed, kSecondCommunity);
    Structure a = ba_house_structure(spec, first_rng);
    Structure b = ba_house_structure(spec, second_rng);

    Structure s;
    s.num_nodes = a.num_nodes + b.num_nodes;
    s.truth.motif_size = a.truth.motif_size;
    s.labels = a.labels;
    for (int l : b.labels) s.labels.push_back(l + 4);
    for (const auto& e : a.edges.list()) s.edges.add(e.u, e.v);
    const std::size_t off = a.num_nodes;
    for (const auto& e : b.edges.list()) s.edges.add(e.u + off, e.v + off);
    s.truth.important_edges = a.truth.important_edges;
    for (const auto& e : b.truth.important_edges) s.truth.important_edges.insert(UndirectedEdge(e.u + off, e.v + off));
    s.truth.motif_nodes = a.truth.motif_nodes;
    for (auto members : b.truth.motif_nodes) {
        for (auto& v : members) v += off;
        s.truth.motif_nodes.push_back(std::move(members));
    }

    const auto joins = static_cast<std::size_t>(std::floor(spec.inter_community_ratio * static_cast<double>(s.num_nodes)));
    std::uniform_int_distribution<std::size_t> pick_a(0, off - 1), pick_b(off, s.num_nodes - 1);
    std::size_t added = 0;
    while (added < joins) {
        if (s.edges.add(pick_a(first_rng), pick_b(first_rng))) ++added;
    }
    return s;
}

Dataset finish(const DatasetSpec& spec, Structure s) {
    const std::size_t classes = static_cast<std::size_t>(*std::max_element(s.labels.begin(), s.labels.end())) + 1;
    Tensor x = generate_features(s.labels, spec.num_important, spec.num_unimportant, spec.sigma,
                                 spec.seed);
    Dataset d;
    d.spec = spec;
    d.graph = Graph::build(s.num_nodes, std::move(s.edges.list()), std::move(x), std::move(s.labels), classes);
    d.graph.masks = split_masks(d.graph, spec.seed);
    d.truth = std::move(s.truth);
    d.truth.important_features.resize(spec.num_important);
    std::iota(d.truth.important_features.begin(), d.truth.important_features.end(), 0);
    return d;
}

}  // namespace

Graph Graph::build(std::size_t num_nodes, std::vector<UndirectedEdge> undirected, Tensor features,
                   std::vector<int> labels, std::size_t num_classes) {
    if (features.rank() != 2 || features.rows() != num_nodes) {
        throw dimension_error("features " + shape_string(features.shape) + " for " + std::to_string(num_nodes) + " nodes");
    }
    if (labels.size() != num_nodes) throw dimension_error("one label per node required");
    Graph g;
    g.num_nodes = num_nodes;
    std::set<UndirectedEdge> seen;
    for (const auto& e : undirected) {
        if (e.u == e.v) throw precondition_error("self-loop at node " + std::to_string(e.u));
        if (e.v >= num_nodes) throw precondition_error("edge endpoint " + std::to_string(e.v) + " out of range");
        if (!seen.insert(e).second) {
            throw precondition_error("duplicate edge " + std::to_string(e.u) + "-" + std::to_string(e.v));
        }
        g.edges.push_back({e.u, e.v});
        g.edges.push_back({e.v, e.u});
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes) throw precondition_error("label out of range");
    }
    g.undirected = std::move(undirected);
    g.features = std::move(features);
    g.labels = std::move(labels);
    g.num_classes = num_classes;
    return g;
}

std::vector<std::vector<std::size_t>> Graph::adjacency() const {
    std::vector<std::vector<std::size_t>> adj(num_nodes);
    for (const auto& e : undirected) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
}

std::string_view kind_name(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::NoisyBAHouse: return "noisy-ba-house";
        case DatasetKind::NoisyBACommunity: return "noisy-ba-community";
        case DatasetKind::NoisyTreeCycle: return "noisy-tree-cycle";
        case DatasetKind::NoisyTreeGrid: return "noisy-tree-grid";
    }
    return "unknown";
}

DatasetKind parse_kind(std::string_view name) {
    for (auto k : {DatasetKind::NoisyBAHouse, DatasetKind::NoisyBACommunity, DatasetKind::NoisyTreeCycle,
                   DatasetKind::NoisyTreeGrid}) {
        if (kind_name(k) == name) return k;
    }
    throw precondition_error("unknown dataset kind '" + std::string(name) + "'");
}

DatasetSpec DatasetSpec::defaults(DatasetKind kind, std::uint64_t seed) {
    DatasetSpec s;
    s.kind = kind;
    s.seed = seed;
    switch (kind) {
        case DatasetKind::NoisyBAHouse:
        case DatasetKind::NoisyBACommunity:
            s.base_nodes = 300;
            s.sigma = 0.15;
            break;
        case DatasetKind::NoisyTreeCycle:
        case DatasetKind::NoisyTreeGrid:
            s.base_nodes = 255;  // 8 levels
            s.sigma = 0.5;
            break;
    }
    return s;
}

Dataset generate(const DatasetSpec& spec) {
    if (spec.num_motifs > 0 && spec.base_nodes == 0) throw precondition_error("motifs need a base graph");
    switch (spec.kind) {
        case DatasetKind::NoisyBAHouse: {
            Rng rng = make_rng(spec.seed, kStructure);
            return finish(spec, ba_house_structure(spec, rng));
        }
        case DatasetKind::NoisyBACommunity:
            return finish(spec, ba_community_structure(spec));
        case DatasetKind::NoisyTreeCycle: {
            Rng rng = make_rng(spec.seed, kStructure);
            return finish(spec, tree_structure(spec, cycle_motif(6), rng));
        }
        case DatasetKind::NoisyTreeGrid: {
            Rng rng = make_rng(spec.seed, kStructure);
            return finish(spec, tree_structure(spec, grid_motif(3), rng));
        }
    }
    throw precondition_error("unhandled dataset kind");
}

Dataset generate_ba_house(std::uint64_t seed) { return generate(DatasetSpec::defaults(DatasetKind::NoisyBAHouse, seed)); }
Dataset generate_ba_community(std::uint64_t seed) {
    return generate(DatasetSpec::defaults(DatasetKind::NoisyBACommunity, seed));
}
Dataset generate_tree_cycle(std::uint64_t seed) { return generate(DatasetSpec::defaults(DatasetKind::NoisyTreeCycle, seed)); }
Dataset generate_tree_grid(std::uint64_t seed) { return generate(DatasetSpec::defaults(DatasetKind::NoisyTreeGrid, seed)); }

Tensor generate_features(const std::vector<int>& labels, std::size_t num_important, std::size_t num_unimportant,
                         double sigma, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw precondition_error("feature sigma must be positive");
    Rng rng = make_rng(seed, kFeatures);
    std::normal_distribution<double> noise(0.0, sigma);
    const std::size_t d = num_important + num_unimportant;
    Tensor x = Tensor::zeros({labels.size(), d});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double mu = static_cast<double>(labels[i]);
        for (std::size_t l = 0; l < d; ++l) x.at(i, l) = (l < num_important ? mu : 0.0) + noise(rng);
    }
    return x;
}

Masks split_masks(std::size_t num_nodes, std::uint64_t seed) {
    if (num_nodes < 10) throw precondition_error("split_masks needs at least 10 nodes");
    Rng rng = make_rng(seed, kMasks);
    std::vector<std::size_t> perm(num_nodes);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t n_train = num_nodes * 8 / 10;
    const std::size_t n_val = num_nodes / 10;
    Masks m;
    m.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    m.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                 perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    m.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    for (auto* v : {&m.train, &m.val, &m.test}) std::sort(v->begin(), v->end());
    return m;
}

Masks split_masks(const Graph& graph, std::uint64_t seed) { return split_masks(graph.num_nodes, seed); }

std::size_t Subgraph::local_index(std::size_t original) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), original);
    if (it == nodes.end() || *it != original) return nodes.size();
    return static_cast<std::size_t>(it - nodes.begin());
}

Graph Subgraph::materialize(const Graph& parent) const {
    const std::size_t d = parent.num_features();
    Tensor x = Tensor::zeros({nodes.size(), d});
    std::vector<int> labels(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t l = 0; l < d; ++l) x.at(i, l) = parent.features.at(nodes[i], l);
        labels[i] = parent.labels[nodes[i]];
    }
    std::vector<UndirectedEdge> local;
    local.reserve(edge_indices.size());
    for (auto k : edge_indices) {
        const auto& e = parent.undirected[k];
        local.emplace_back(local_index(e.u), local_index(e.v));
    }
    return Graph::build(nodes.size(), std::move(local), std::move(x), std::move(labels), parent.num_classes);
}

Subgraph k_hop_subgraph(const Graph& graph, std::size_t node, std::size_t k) {
    if (node >= graph.num_nodes) {
        throw precondition_error("node " + std::to_string(node) + " out of range for " +
                                 std::to_string(graph.num_nodes) + " nodes");
    }
    if (k < 1) throw precondition_error("k_hop_subgraph needs k >= 1");
    const auto adj = graph.adjacency();
    constexpr auto unseen = static_cast<std::size_t>(-1);
    std::vector<std::size_t> dist(graph.num_nodes, unseen);
    std::deque<std::size_t> queue{node};
    dist[node] = 0;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        if (dist[u] == k) continue;
        for (auto v : adj[u]) {
            if (dist[v] == unseen) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    Subgraph s;
    s.center = node;
    for (std::size_t v = 0; v < graph.num_nodes; ++v) {
        if (dist[v] != unseen) {
            s.nodes.push_back(v);
            s.distance.push_back(dist[v]);
        }
    }
    for (std::size_t e = 0; e < graph.undirected.size(); ++e) {
        const auto& ue = graph.undirected[e];
        if (dist[ue.u] != unseen && dist[ue.v] != unseen) s.edge_indices.push_back(e);
    }
    return s;
}

}  // namespace gisst
