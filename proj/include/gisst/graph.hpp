#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gisst/autodiff.hpp"
#include "gisst/tensor.hpp"

namespace gisst {

/// Unordered node pair, normalised so that u < v.
struct UndirectedEdge {
    std::size_t u = 0;
    std::size_t v = 0;

    UndirectedEdge() = default;
    UndirectedEdge(std::size_t a, std::size_t b) : u(a < b ? a : b), v(a < b ? b : a) {}

    auto operator<=>(const UndirectedEdge&) const = default;
};

struct Masks {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    bool operator==(const Masks&) const = default;
};

/// Undirected simple graph with node features and labels.
///
/// Every undirected edge k is stored twice in `edges`: slot 2k is u -> v and
/// slot 2k + 1 is v -> u, with (u, v) = undirected[k]. Self-loops are not stored.
struct Graph {
    std::size_t num_nodes = 0;
    std::vector<UndirectedEdge> undirected;
    std::vector<ad::Edge> edges;
    Tensor features;  // [num_nodes x d]
    std::vector<int> labels;
    std::size_t num_classes = 0;
    Masks masks;

    static Graph build(std::size_t num_nodes, std::vector<UndirectedEdge> undirected, Tensor features,
                       std::vector<int> labels, std::size_t num_classes);

    std::size_t num_features() const { return features.cols(); }
    std::size_t num_directed() const { return edges.size(); }
    /// Neighbour lists, sorted ascending.
    std::vector<std::vector<std::size_t>> adjacency() const;

    bool operator==(const Graph&) const = default;
};

enum class DatasetKind { NoisyBAHouse, NoisyBACommunity, NoisyTreeCycle, NoisyTreeGrid };

std::string_view kind_name(DatasetKind kind);
DatasetKind parse_kind(std::string_view name);

/// Generation parameters. Defaults match the published benchmark sizes.
struct DatasetSpec {
    DatasetKind kind = DatasetKind::NoisyBAHouse;
    std::uint64_t seed = 0;
    std::size_t base_nodes = 300;       // BA nodes, or tree node count for the tree datasets
    std::size_t num_motifs = 80;
    std::size_t ba_edges_per_node = 5;  // BA growth parameter m
    double perturbation_ratio = 0.1;    // floor(ratio * N) random edges after motif attachment
    double inter_community_ratio = 0.01;
    double sigma = 0.15;
    std::size_t num_important = 40;
    std::size_t num_unimportant = 10;

    static DatasetSpec defaults(DatasetKind kind, std::uint64_t seed);
    bool operator==(const DatasetSpec&) const = default;
};

struct GroundTruth {
    std::set<UndirectedEdge> important_edges;
    std::vector<std::size_t> important_features;
    std::vector<std::vector<std::size_t>> motif_nodes;
    std::size_t motif_size = 0;

    bool operator==(const GroundTruth&) const = default;
};

struct Dataset {
    DatasetSpec spec;
    Graph graph;
    GroundTruth truth;

    bool operator==(const Dataset&) const = default;
};

Dataset generate_ba_house(std::uint64_t seed);
Dataset generate_ba_community(std::uint64_t seed);
Dataset generate_tree_cycle(std::uint64_t seed);
Dataset generate_tree_grid(std::uint64_t seed);
Dataset generate(const DatasetSpec& spec);

/// Important block columns [0, num_important) ~ N(label, sigma); the rest ~ N(0, sigma).
Tensor generate_features(const std::vector<int>& labels, std::size_t num_important, std::size_t num_unimportant,
                         double sigma, std::uint64_t seed);

/// Uniform random permutation split 80/10/10 (train gets floor(0.8 N), val floor(0.1 N), test the rest).
Masks split_masks(std::size_t num_nodes, std::uint64_t seed);
Masks split_masks(const Graph& graph, std::uint64_t seed);

/// Induced subgraph on every node within undirected distance <= k of `node`.
struct Subgraph {
    std::size_t center = 0;
    std::vector<std::size_t> nodes;          // original ids, ascending
    std::vector<std::size_t> edge_indices;   // indices into Graph::undirected, ascending
    std::vector<std::size_t> distance;       // hop distance, aligned with `nodes`

    /// Local position of an original node id, or nodes.size() when absent.
    std::size_t local_index(std::size_t original) const;
    bool contains_node(std::size_t original) const { return local_index(original) < nodes.size(); }
    /// Standalone copy with local node ids. Labels and features follow the nodes; masks are dropped.
    Graph materialize(const Graph& parent) const;
};

Subgraph k_hop_subgraph(const Graph& graph, std::size_t node, std::size_t k);

// JSON --------------------------------------------------------------------

std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const std::string& text);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace gisst
