#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "graphwalk/kg.hpp"
#include "graphwalk/text.hpp"
#include "helpers.hpp"

using namespace graphwalk;
using namespace graphwalk::testing;

TEST_SUITE("kg") {

TEST_CASE("canonicalization trims and collapses whitespace") {
    CHECK(canonicalize_label("  Inception ") == "Inception");
    CHECK(canonicalize_label("Christopher   Nolan") == "Christopher Nolan");
    CHECK(canonicalize_label("\tThe  Prestige\n") == "The Prestige");
    CHECK(canonicalize_label("   ") == "");
}

TEST_CASE("load_kb counts the 3-line fixture") {
    std::istringstream in(
        "Inception|directed_by|Christopher Nolan\n"
        "Interstellar|directed_by|Christopher Nolan\n"
        "Inception|starred_actors|Leonardo DiCaprio\n");
    KnowledgeGraph g = KnowledgeGraph::load(in, KbFormat::metaqa_pipe);
    CHECK(g.entity_count() == 4);
    CHECK(g.relation_count() == 2);
    CHECK(g.triple_count() == 3);
}

TEST_CASE("load_kb deduplicates repeated lines") {
    std::istringstream in(
        "Inception|directed_by|Christopher Nolan\n"
        "Inception|directed_by|Christopher Nolan\n"
        "Interstellar|directed_by|Christopher Nolan\n"
        "Inception|starred_actors|Leonardo DiCaprio\n");
    KnowledgeGraph g = KnowledgeGraph::load(in, KbFormat::metaqa_pipe);
    CHECK(g.triple_count() == 3);
}

TEST_CASE("load_kb rejects malformed input with line numbers") {
    SUBCASE("wrong field count") {
        std::istringstream in("a|r|b\nx|r|y|extra\n");
        CHECK_THROWS_WITH_AS(KnowledgeGraph::load(in, KbFormat::metaqa_pipe),
                             doctest::Contains("line 2"), KbParseError);
    }
    SUBCASE("empty field") {
        std::istringstream in("a||b\n");
        CHECK_THROWS_WITH_AS(KnowledgeGraph::load(in, KbFormat::metaqa_pipe),
                             doctest::Contains("empty"), KbParseError);
    }
    SUBCASE("invalid UTF-8") {
        std::string bad = "a|r|b\nx|r|\xFF\xFE\n";
        std::istringstream in(bad);
        CHECK_THROWS_WITH_AS(KnowledgeGraph::load(in, KbFormat::metaqa_pipe),
                             doctest::Contains("UTF-8"), KbParseError);
    }
}

TEST_CASE("load_kb reads the tsv format") {
    std::istringstream in("Inception\tdirected_by\tChristopher Nolan\n");
    KnowledgeGraph g = KnowledgeGraph::load(in, KbFormat::tsv);
    CHECK(g.triple_count() == 1);
    CHECK(g.resolve_entity("Christopher Nolan").has_value());
}

TEST_CASE("load_kb is order-insensitive") {
    std::vector<std::string> lines = {
        "Inception|directed_by|Christopher Nolan",
        "Interstellar|directed_by|Christopher Nolan",
        "Inception|starred_actors|Leonardo DiCaprio",
        "Memento|release_year|2000",
    };
    std::string forward, backward;
    for (const auto& l : lines) forward += l + "\n";
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) backward += *it + "\n";
    std::istringstream a(forward), b(backward);
    KnowledgeGraph ga = KnowledgeGraph::load(a, KbFormat::metaqa_pipe);
    KnowledgeGraph gb = KnowledgeGraph::load(b, KbFormat::metaqa_pipe);
    CHECK(ga == gb);
}

TEST_CASE("explore returns both incident directions on the fixture") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    EntityId inception = *g.resolve_entity("Inception");

    auto triples = g.explore(inception);
    auto expected = naive_explore(g, inception);
    std::sort(triples.begin(), triples.end());
    std::sort(expected.begin(), expected.end());
    CHECK(triples == expected);
    CHECK(triples.size() == 7);

    // Reverse direction: an in-edge of Christopher Nolan keeps its stored
    // orientation.
    EntityId nolan = *g.resolve_entity("Christopher Nolan");
    Triple interstellar = find_triple(g, "Interstellar", "directed_by", "Christopher Nolan");
    auto nolan_triples = g.explore(nolan);
    CHECK(std::find(nolan_triples.begin(), nolan_triples.end(), interstellar) !=
          nolan_triples.end());
}

TEST_CASE("explore of an isolated entity is empty, unknown id is an error") {
    KnowledgeGraphBuilder builder;
    EntityId isolated = builder.add_entity("alone");
    builder.add_triple("a", "r", "b");
    KnowledgeGraph g = builder.build();
    CHECK(g.explore(isolated).empty());
    CHECK_THROWS_AS(g.explore(EntityId{99}), GraphError);
}

TEST_CASE("explore equals naive scan on random graphs") {
    std::mt19937_64 rng(20240811);
    for (int i = 0; i < 25; ++i) {
        KnowledgeGraph g = random_graph(rng);
        for (std::uint32_t e = 0; e < g.entity_count(); ++e) {
            auto fast = g.explore(EntityId{e});
            auto slow = naive_explore(g, EntityId{e});
            std::sort(fast.begin(), fast.end());
            std::sort(slow.begin(), slow.end());
            REQUIRE(fast == slow);
        }
    }
}

TEST_CASE("adjacency indexes stay consistent with the triple set") {
    std::mt19937_64 rng(7);
    KnowledgeGraph g = random_graph(rng);
    // Rebuild both directions from the triple list and compare via explore.
    for (std::uint32_t e = 0; e < g.entity_count(); ++e) {
        auto via_index = g.explore(EntityId{e});
        auto via_scan = naive_explore(g, EntityId{e});
        std::sort(via_index.begin(), via_index.end());
        std::sort(via_scan.begin(), via_scan.end());
        REQUIRE(via_index == via_scan);
    }
}

TEST_CASE("resolve_entity matching rules") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    CHECK(g.resolve_entity("christopher nolan") == g.resolve_entity("Christopher Nolan"));
    CHECK(g.resolve_entity("  Inception ") == g.resolve_entity("Inception"));
    CHECK_FALSE(g.resolve_entity("Incepshun").has_value());
}

TEST_CASE("resolve_entity prefers the exact canonical match") {
    KnowledgeGraphBuilder builder;
    EntityId upper = builder.add_entity("IT");
    EntityId lower = builder.add_entity("it");
    builder.add_triple("IT", "r", "it");
    KnowledgeGraph g = builder.build();
    CHECK(*g.resolve_entity("IT") == upper);
    CHECK(*g.resolve_entity("it") == lower);
}

TEST_CASE("shortest_paths on the fixture") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    EntityId inception = *g.resolve_entity("Inception");
    EntityId nolan = *g.resolve_entity("Christopher Nolan");
    EntityId interstellar = *g.resolve_entity("Interstellar");

    SUBCASE("length one") {
        auto paths = g.shortest_paths({inception}, {nolan});
        REQUIRE(paths.size() == 2);  // directed_by and written_by are parallel edges
        CHECK(paths[0].length() == 1);
        CHECK(paths[0].hops[0] ==
              find_triple(g, "Inception", "directed_by", "Christopher Nolan"));
        CHECK(paths[1].hops[0] ==
              find_triple(g, "Inception", "written_by", "Christopher Nolan"));
    }
    SUBCASE("length two through a shared neighbor") {
        auto paths = g.shortest_paths({inception}, {interstellar});
        REQUIRE(!paths.empty());
        for (const auto& p : paths) CHECK(p.length() == 2);
        // Lexicographically first intermediate: Christopher Nolan beats
        // Cillian Murphy, English, and Science Fiction.
        CHECK(paths[0].entities[1] == nolan);
        CHECK(paths[0].hops[0] ==
              find_triple(g, "Inception", "directed_by", "Christopher Nolan"));
    }
    SUBCASE("zero-length identity path") {
        auto paths = g.shortest_paths({inception}, {inception});
        REQUIRE(paths.size() == 1);
        CHECK(paths[0].length() == 0);
        CHECK(paths[0].entities == std::vector<EntityId>{inception});
    }
    SUBCASE("max_hops bounds the search") {
        auto paths = g.shortest_paths({inception}, {interstellar}, 1);
        CHECK(paths.empty());
    }
    SUBCASE("unknown ids are errors") {
        CHECK_THROWS_AS(g.shortest_paths({EntityId{9999}}, {nolan}), GraphError);
        CHECK_THROWS_AS(g.shortest_paths({}, {nolan}), GraphError);
    }
}

TEST_CASE("shortest_paths agrees with dense all-pairs relaxation") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 15; ++i) {
        KnowledgeGraph g = random_graph(rng, 25);
        auto oracle = all_pairs_distances(g);
        const std::size_t n = g.entity_count();
        for (std::uint32_t s = 0; s < n; ++s) {
            for (std::uint32_t t = 0; t < n; ++t) {
                auto paths = g.shortest_paths({EntityId{s}}, {EntityId{t}}, n);
                if (oracle[s][t] == kUnreachable) {
                    REQUIRE(paths.empty());
                } else {
                    REQUIRE(!paths.empty());
                    REQUIRE(paths.front().length() == oracle[s][t]);
                    for (const auto& p : paths) {
                        REQUIRE(p.length() == oracle[s][t]);
                        // Path is simple and every hop is a real triple
                        // incident to consecutive entities.
                        std::vector<EntityId> seen(p.entities);
                        std::sort(seen.begin(), seen.end());
                        REQUIRE(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
                        for (std::size_t h = 0; h < p.hops.size(); ++h) {
                            REQUIRE(g.contains(p.hops[h]));
                            bool forward = p.hops[h].subject == p.entities[h] &&
                                           p.hops[h].object == p.entities[h + 1];
                            bool backward = p.hops[h].object == p.entities[h] &&
                                            p.hops[h].subject == p.entities[h + 1];
                            REQUIRE((forward || backward));
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("shortest_paths result is sorted by entity name sequence") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    EntityId inception = *g.resolve_entity("Inception");
    EntityId dunkirk = *g.resolve_entity("Dunkirk");
    auto paths = g.shortest_paths({inception}, {dunkirk});
    REQUIRE(paths.size() >= 2);  // via Christopher Nolan and via Cillian Murphy
    std::vector<std::vector<std::string>> keys;
    for (const auto& p : paths) {
        std::vector<std::string> key;
        for (EntityId e : p.entities) key.push_back(g.entity_name(e));
        keys.push_back(std::move(key));
    }
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    CHECK(keys.front()[1] == "Christopher Nolan");
}

TEST_CASE("fixture KB loads with expected stats") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    CHECK(g.triple_count() == 30);
    CHECK(g.relation_count() == 6);
    CHECK(g.entity_count() == 24);
}

}  // TEST_SUITE
