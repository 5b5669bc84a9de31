#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace graphwalk {

struct EntityId {
    std::uint32_t value = 0;
    auto operator<=>(const EntityId&) const = default;
};

struct RelationId {
    std::uint32_t value = 0;
    auto operator<=>(const RelationId&) const = default;
};

/// Directed triple in stored orientation. Compares by value.
struct Triple {
    EntityId subject;
    RelationId relation;
    EntityId object;
    auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const {
        std::size_t h = t.subject.value;
        h = h * 1000003u + t.relation.value;
        h = h * 1000003u + t.object.value;
        return h;
    }
};

/// Undirected simple path: entities.size() == hops.size() + 1, each hop is
/// the connecting triple in its stored orientation.
struct EntityPath {
    std::vector<EntityId> entities;
    std::vector<Triple> hops;
    std::size_t length() const { return hops.size(); }
};

enum class KbFormat { metaqa_pipe, tsv };

class KbParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultMaxHops = 4;

class KnowledgeGraphBuilder;

/// Interned triple store with bidirectional adjacency. Immutable once built;
/// safe for unlimited concurrent readers.
class KnowledgeGraph {
public:
    static KnowledgeGraph load(std::istream& in, KbFormat format);
    static KnowledgeGraph load_file(const std::string& path, KbFormat format);

    std::size_t entity_count() const { return entity_names_.size(); }
    std::size_t relation_count() const { return relation_names_.size(); }
    std::size_t triple_count() const { return triples_.size(); }

    const std::string& entity_name(EntityId id) const;
    const std::string& relation_name(RelationId id) const;
    /// First-seen surface form (before canonicalization) of an entity.
    const std::string& entity_surface(EntityId id) const;

    bool valid(EntityId id) const { return id.value < entity_names_.size(); }
    bool valid(RelationId id) const { return id.value < relation_names_.size(); }

    /// Case-insensitive canonical-form match; an exact canonical match wins
    /// over a case-folded one. No fuzzy matching.
    std::optional<EntityId> resolve_entity(std::string_view surface) const;
    std::optional<RelationId> resolve_relation(std::string_view surface) const;

    /// All triples incident to x in either direction, stored orientation
    /// preserved: {(x,r,y)} ∪ {(y,r,x)}. Deterministic order (out-edges in
    /// load order, then in-edges), deduplicated.
    std::vector<Triple> explore(EntityId x) const;

    bool contains(const Triple& t) const { return triple_set_.count(t) != 0; }
    const std::vector<Triple>& triples() const { return triples_; }

    /// All minimum-length simple paths from any source to any target,
    /// traversing triples as undirected edges. Empty when no path exists
    /// within max_hops. Sorted lexicographically by the sequence of entity
    /// canonical names (hop renderings break ties between parallel edges).
    std::vector<EntityPath> shortest_paths(const std::vector<EntityId>& sources,
                                           const std::vector<EntityId>& targets,
                                           std::size_t max_hops = kDefaultMaxHops) const;

    /// "(subject | relation | object)"
    std::string render_triple(const Triple& t) const;

    /// Value equality over canonical names: same entity set, relation set,
    /// and name-level triple set, regardless of load order.
    bool operator==(const KnowledgeGraph& other) const;

private:
    friend class KnowledgeGraphBuilder;

    struct Edge {
        RelationId relation;
        EntityId other;
    };

    std::vector<std::string> entity_names_;
    std::vector<std::string> entity_surfaces_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, std::uint32_t> entity_by_name_;
    std::unordered_map<std::string, std::uint32_t> entity_by_folded_;  // smallest id wins
    std::unordered_map<std::string, std::uint32_t> relation_by_name_;
    std::vector<Triple> triples_;  // load order, deduplicated
    std::unordered_set<Triple, TripleHash> triple_set_;
    std::vector<std::vector<Edge>> out_index_;  // subject -> (relation, object)
    std::vector<std::vector<Edge>> in_index_;   // object  -> (relation, subject)
};

/// Incremental construction; load_kb and the test graph generators share it.
class KnowledgeGraphBuilder {
public:
    /// Interns a label (canonicalized); empty canonical form is an error.
    EntityId add_entity(std::string_view surface);
    RelationId add_relation(std::string_view surface);
    /// Set semantics: duplicate triples are absorbed.
    void add_triple(EntityId subject, RelationId relation, EntityId object);
    void add_triple(std::string_view subject, std::string_view relation,
                    std::string_view object);

    KnowledgeGraph build();

private:
    KnowledgeGraph g_;
};

}  // namespace graphwalk
