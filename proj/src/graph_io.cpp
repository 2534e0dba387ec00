#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gisst/graph.hpp"
#include "gisst/json_util.hpp"

namespace gisst {

using nlohmann::json;

namespace {

json spec_to_json(const DatasetSpec& s) {
    return {{"kind", kind_name(s.kind)},
            {"seed", s.seed},
            {"params",
             {{"base_nodes", s.base_nodes},
              {"num_motifs", s.num_motifs},
              {"ba_edges_per_node", s.ba_edges_per_node},
              {"perturbation_ratio", s.perturbation_ratio},
              {"inter_community_ratio", s.inter_community_ratio},
              {"sigma", s.sigma},
              {"num_important", s.num_important},
              {"num_unimportant", s.num_unimportant}}}};
}

DatasetSpec spec_from_json(const json& j) {
    DatasetSpec s;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("params");
    s.base_nodes = p.at("base_nodes").get<std::size_t>();
    s.num_motifs = p.at("num_motifs").get<std::size_t>();
    s.ba_edges_per_node = p.at("ba_edges_per_node").get<std::size_t>();
    s.perturbation_ratio = p.at("perturbation_ratio").get<double>();
    s.inter_community_ratio = p.at("inter_community_ratio").get<double>();
    s.sigma = p.at("sigma").get<double>();
    s.num_important = p.at("num_important").get<std::size_t>();
    s.num_unimportant = p.at("num_unimportant").get<std::size_t>();
    return s;
}

json pairs_to_json(const auto& edges) {
    json out = json::array();
    for (const auto& e : edges) out.push_back({e.u, e.v});
    return out;
}

}  // namespace

std::string dataset_to_json(const Dataset& d) {
    const auto& g = d.graph;
    json j;
    j["num_nodes"] = g.num_nodes;
    j["num_classes"] = g.num_classes;
    j["edges"] = pairs_to_json(g.undirected);
    j["features"] = tensor_to_json(g.features);
    j["labels"] = g.labels;
    j["masks"] = {{"train", g.masks.train}, {"val", g.masks.val}, {"test", g.masks.test}};
    j["ground_truth"] = {{"important_edges", pairs_to_json(d.truth.important_edges)},
                         {"important_features", d.truth.important_features},
                         {"motif_nodes", d.truth.motif_nodes},
                         {"motif_size", d.truth.motif_size}};
    j["spec"] = spec_to_json(d.spec);
    return j.dump();
}

Dataset dataset_from_json(const std::string& text) {
    const json j = json::parse(text);
    std::vector<UndirectedEdge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    Dataset d;
    d.graph = Graph::build(j.at("num_nodes").get<std::size_t>(), std::move(edges), tensor_from_json(j.at("features")),
                           j.at("labels").get<std::vector<int>>(), j.at("num_classes").get<std::size_t>());
    const auto& m = j.at("masks");
    d.graph.masks.train = m.at("train").get<std::vector<std::size_t>>();
    d.graph.masks.val = m.at("val").get<std::vector<std::size_t>>();
    d.graph.masks.test = m.at("test").get<std::vector<std::size_t>>();
    const auto& gt = j.at("ground_truth");
    for (const auto& e : gt.at("important_edges")) {
        d.truth.important_edges.insert(UndirectedEdge(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()));
    }
    d.truth.important_features = gt.at("important_features").get<std::vector<std::size_t>>();
    d.truth.motif_nodes = gt.at("motif_nodes").get<std::vector<std::vector<std::size_t>>>();
    d.truth.motif_size = gt.at("motif_size").get<std::size_t>();
    d.spec = spec_from_json(j.at("spec"));
    return d;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    write_text_file(path, dataset_to_json(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_json(read_text_file(path)); }

}  // namespace gisst
