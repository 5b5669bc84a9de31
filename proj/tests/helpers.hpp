#pragma once

#include <random>
#include <string>
#include <vector>

#include "graphwalk/kg.hpp"

namespace graphwalk::testing {

inline std::string fixture_path(const std::string& name) {
    return std::string(GRAPHWALK_FIXTURE_DIR) + "/" + name;
}

inline KnowledgeGraph load_fixture(const std::string& name,
                                   KbFormat format = KbFormat::metaqa_pipe) {
    return KnowledgeGraph::load_file(fixture_path(name), format);
}

inline Triple find_triple(const KnowledgeGraph& g, const std::string& s,
                          const std::string& r, const std::string& o) {
    Triple t{*g.resolve_entity(s), *g.resolve_relation(r), *g.resolve_entity(o)};
    if (!g.contains(t)) throw std::runtime_error("fixture triple missing: " + s + "|" + r +
                                                 "|" + o);
    return t;
}

/// Random graph with zero-padded entity names (clean lexicographic order).
/// Some entities stay isolated so empty neighborhoods get exercised.
inline KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t max_entities = 50,
                                   std::size_t max_relations = 8) {
    std::uniform_int_distribution<std::size_t> n_dist(2, max_entities);
    std::uniform_int_distribution<std::size_t> r_dist(1, max_relations);
    const std::size_t n = n_dist(rng);
    const std::size_t r = r_dist(rng);

    KnowledgeGraphBuilder builder;
    std::vector<EntityId> entities;
    std::vector<RelationId> relations;
    for (std::size_t i = 0; i < n; ++i) {
        std::string name = "E" + std::to_string(i);
        name.insert(1, 3 - std::min<std::size_t>(3, std::to_string(i).size()), '0');
        entities.push_back(builder.add_entity(name));
    }
    for (std::size_t i = 0; i < r; ++i) {
        relations.push_back(builder.add_relation("rel" + std::to_string(i)));
    }

    std::uniform_int_distribution<std::size_t> edge_dist(0, 2 * n);
    const std::size_t edges = edge_dist(rng);
    std::uniform_int_distribution<std::size_t> e_pick(0, n - 1);
    std::uniform_int_distribution<std::size_t> r_pick(0, r - 1);
    for (std::size_t i = 0; i < edges; ++i) {
        builder.add_triple(entities[e_pick(rng)], relations[r_pick(rng)],
                           entities[e_pick(rng)]);
    }
    return builder.build();
}

/// Brute-force explore: scan every triple for the entity on either side.
inline std::vector<Triple> naive_explore(const KnowledgeGraph& g, EntityId x) {
    std::vector<Triple> out;
    for (const Triple& t : g.triples()) {
        if (t.subject == x || t.object == x) out.push_back(t);
    }
    return out;
}

inline constexpr std::uint32_t kUnreachable = 0xFFFFFFFFu;

/// All-pairs undirected distances by dense relaxation (Floyd-Warshall).
inline std::vector<std::vector<std::uint32_t>> all_pairs_distances(const KnowledgeGraph& g) {
    const std::size_t n = g.entity_count();
    std::vector<std::vector<std::uint32_t>> dist(n,
                                                 std::vector<std::uint32_t>(n, kUnreachable));
    for (std::size_t i = 0; i < n; ++i) dist[i][i] = 0;
    for (const Triple& t : g.triples()) {
        if (t.subject != t.object) {
            dist[t.subject.value][t.object.value] = 1;
            dist[t.object.value][t.subject.value] = 1;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i][k] == kUnreachable) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (dist[k][j] == kUnreachable) continue;
                dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);
            }
        }
    }
    return dist;
}

}  // namespace graphwalk::testing
