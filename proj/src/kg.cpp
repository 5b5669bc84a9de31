#include "graphwalk/kg.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <queue>
#include <sstream>

#include "graphwalk/text.hpp"

namespace graphwalk {

namespace {

constexpr std::uint32_t kNoDist = 0xFFFFFFFFu;

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

// ---------------------------------------------------------------------------
// Builder

EntityId KnowledgeGraphBuilder::add_entity(std::string_view surface) {
    std::string canon = canonicalize_label(surface);
    if (canon.empty()) throw KbParseError("empty entity label");
    auto it = g_.entity_by_name_.find(canon);
    if (it != g_.entity_by_name_.end()) return EntityId{it->second};
    std::uint32_t id = static_cast<std::uint32_t>(g_.entity_names_.size());
    g_.entity_by_name_.emplace(canon, id);
    std::string folded = fold_case(canon);
    g_.entity_by_folded_.emplace(folded, id);  // keeps the first (smallest) id
    g_.entity_names_.push_back(std::move(canon));
    g_.entity_surfaces_.emplace_back(surface);
    g_.out_index_.emplace_back();
    g_.in_index_.emplace_back();
    return EntityId{id};
}

RelationId KnowledgeGraphBuilder::add_relation(std::string_view surface) {
    std::string canon = canonicalize_label(surface);
    if (canon.empty()) throw KbParseError("empty relation label");
    auto it = g_.relation_by_name_.find(canon);
    if (it != g_.relation_by_name_.end()) return RelationId{it->second};
    std::uint32_t id = static_cast<std::uint32_t>(g_.relation_names_.size());
    g_.relation_by_name_.emplace(canon, id);
    g_.relation_names_.push_back(std::move(canon));
    return RelationId{id};
}

void KnowledgeGraphBuilder::add_triple(EntityId subject, RelationId relation,
                                       EntityId object) {
    Triple t{subject, relation, object};
    if (!g_.triple_set_.insert(t).second) return;
    g_.triples_.push_back(t);
    g_.out_index_[subject.value].push_back({relation, object});
    g_.in_index_[object.value].push_back({relation, subject});
}

void KnowledgeGraphBuilder::add_triple(std::string_view subject,
                                       std::string_view relation,
                                       std::string_view object) {
    EntityId s = add_entity(subject);
    RelationId r = add_relation(relation);
    EntityId o = add_entity(object);
    add_triple(s, r, o);
}

KnowledgeGraph KnowledgeGraphBuilder::build() {
    return std::move(g_);
}

// ---------------------------------------------------------------------------
// Load

KnowledgeGraph KnowledgeGraph::load(std::istream& in, KbFormat format) {
    const char delim = format == KbFormat::metaqa_pipe ? '|' : '\t';
    KnowledgeGraphBuilder builder;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!is_valid_utf8(line)) {
            throw KbParseError("line " + std::to_string(line_no) +
                               ": input is not valid UTF-8");
        }
        if (canonicalize_label(line).empty()) continue;  // blank line
        auto fields = split_fields(line, delim);
        if (fields.size() != 3) {
            throw KbParseError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                               std::to_string(fields.size()));
        }
        for (const auto& f : fields) {
            if (canonicalize_label(f).empty()) {
                throw KbParseError("line " + std::to_string(line_no) +
                                   ": empty entity or relation field");
            }
        }
        builder.add_triple(fields[0], fields[1], fields[2]);
    }
    return builder.build();
}

KnowledgeGraph KnowledgeGraph::load_file(const std::string& path, KbFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw KbParseError("cannot open " + path);
    return load(in, format);
}

// ---------------------------------------------------------------------------
// Lookup

const std::string& KnowledgeGraph::entity_name(EntityId id) const {
    if (!valid(id)) throw GraphError("unknown entity id " + std::to_string(id.value));
    return entity_names_[id.value];
}

const std::string& KnowledgeGraph::relation_name(RelationId id) const {
    if (!valid(id)) throw GraphError("unknown relation id " + std::to_string(id.value));
    return relation_names_[id.value];
}

const std::string& KnowledgeGraph::entity_surface(EntityId id) const {
    if (!valid(id)) throw GraphError("unknown entity id " + std::to_string(id.value));
    return entity_surfaces_[id.value];
}

std::optional<EntityId> KnowledgeGraph::resolve_entity(std::string_view surface) const {
    std::string canon = canonicalize_label(surface);
    auto it = entity_by_name_.find(canon);
    if (it != entity_by_name_.end()) return EntityId{it->second};
    auto folded = entity_by_folded_.find(fold_case(canon));
    if (folded != entity_by_folded_.end()) return EntityId{folded->second};
    return std::nullopt;
}

std::optional<RelationId> KnowledgeGraph::resolve_relation(std::string_view surface) const {
    auto it = relation_by_name_.find(canonicalize_label(surface));
    if (it != relation_by_name_.end()) return RelationId{it->second};
    return std::nullopt;
}

std::vector<Triple> KnowledgeGraph::explore(EntityId x) const {
    if (!valid(x)) throw GraphError("unknown entity id " + std::to_string(x.value));
    std::vector<Triple> result;
    std::unordered_set<Triple, TripleHash> seen;
    for (const Edge& e : out_index_[x.value]) {
        Triple t{x, e.relation, e.other};
        if (seen.insert(t).second) result.push_back(t);
    }
    for (const Edge& e : in_index_[x.value]) {
        Triple t{e.other, e.relation, x};
        if (seen.insert(t).second) result.push_back(t);
    }
    return result;
}

std::string KnowledgeGraph::render_triple(const Triple& t) const {
    return "(" + entity_name(t.subject) + " | " + relation_name(t.relation) + " | " +
           entity_name(t.object) + ")";
}

// ---------------------------------------------------------------------------
// Shortest paths

std::vector<EntityPath> KnowledgeGraph::shortest_paths(
    const std::vector<EntityId>& sources, const std::vector<EntityId>& targets,
    std::size_t max_hops) const {
    if (sources.empty() || targets.empty()) {
        throw GraphError("shortest_paths requires nonempty sources and targets");
    }
    for (EntityId s : sources) {
        if (!valid(s)) throw GraphError("unknown source entity id " + std::to_string(s.value));
    }
    for (EntityId t : targets) {
        if (!valid(t)) throw GraphError("unknown target entity id " + std::to_string(t.value));
    }

    auto path_key = [this](const EntityPath& p) {
        std::vector<std::string> key;
        key.reserve(p.entities.size() + p.hops.size());
        for (EntityId e : p.entities) key.push_back(entity_name(e));
        for (const Triple& h : p.hops) key.push_back(render_triple(h));
        return key;
    };
    auto sort_paths = [&](std::vector<EntityPath>& paths) {
        std::sort(paths.begin(), paths.end(), [&](const EntityPath& a, const EntityPath& b) {
            return path_key(a) < path_key(b);
        });
    };

    std::unordered_set<std::uint32_t> target_set;
    for (EntityId t : targets) target_set.insert(t.value);

    // Degenerate identity paths are minimal when the sets intersect.
    std::vector<EntityPath> zero_paths;
    std::unordered_set<std::uint32_t> used;
    for (EntityId s : sources) {
        if (target_set.count(s.value) && used.insert(s.value).second) {
            zero_paths.push_back(EntityPath{{s}, {}});
        }
    }
    if (!zero_paths.empty()) {
        sort_paths(zero_paths);
        return zero_paths;
    }

    const std::size_t n = entity_count();
    auto bfs = [&](const std::vector<EntityId>& seeds) {
        std::vector<std::uint32_t> dist(n, kNoDist);
        std::queue<std::uint32_t> q;
        for (EntityId s : seeds) {
            if (dist[s.value] == kNoDist) {
                dist[s.value] = 0;
                q.push(s.value);
            }
        }
        while (!q.empty()) {
            std::uint32_t u = q.front();
            q.pop();
            auto relax = [&](std::uint32_t v) {
                if (dist[v] == kNoDist) {
                    dist[v] = dist[u] + 1;
                    q.push(v);
                }
            };
            for (const Edge& e : out_index_[u]) relax(e.other.value);
            for (const Edge& e : in_index_[u]) relax(e.other.value);
        }
        return dist;
    };

    std::vector<std::uint32_t> dist_s = bfs(sources);
    std::vector<std::uint32_t> dist_t = bfs(targets);

    std::uint32_t best = kNoDist;
    for (EntityId t : targets) {
        best = std::min(best, dist_s[t.value]);
    }
    if (best == kNoDist || best > max_hops) return {};

    // Enumerate by walking the BFS layering: every step increases dist_s by
    // one and stays on a source-target geodesic, so paths come out simple.
    std::vector<EntityPath> result;
    EntityPath cur;
    std::function<void(std::uint32_t)> expand = [&](std::uint32_t u) {
        if (dist_s[u] == best) {
            if (target_set.count(u)) result.push_back(cur);
            return;
        }
        auto step = [&](std::uint32_t v, const Triple& t) {
            if (dist_s[v] != dist_s[u] + 1) return;
            if (dist_t[v] == kNoDist || dist_s[v] + dist_t[v] != best) return;
            cur.entities.push_back(EntityId{v});
            cur.hops.push_back(t);
            expand(v);
            cur.entities.pop_back();
            cur.hops.pop_back();
        };
        for (const Edge& e : out_index_[u]) {
            step(e.other.value, Triple{EntityId{u}, e.relation, e.other});
        }
        for (const Edge& e : in_index_[u]) {
            step(e.other.value, Triple{e.other, e.relation, EntityId{u}});
        }
    };

    std::unordered_set<std::uint32_t> started;
    for (EntityId s : sources) {
        if (!started.insert(s.value).second) continue;
        if (dist_t[s.value] == kNoDist || dist_t[s.value] != best) continue;
        cur.entities = {s};
        cur.hops.clear();
        expand(s.value);
    }

    sort_paths(result);
    return result;
}

// ---------------------------------------------------------------------------
// Equality

bool KnowledgeGraph::operator==(const KnowledgeGraph& other) const {
    auto sorted_names = [](const std::vector<std::string>& v) {
        std::vector<std::string> s(v);
        std::sort(s.begin(), s.end());
        return s;
    };
    if (sorted_names(entity_names_) != sorted_names(other.entity_names_)) return false;
    if (sorted_names(relation_names_) != sorted_names(other.relation_names_)) return false;

    auto name_triples = [](const KnowledgeGraph& g) {
        std::vector<std::array<std::string, 3>> out;
        out.reserve(g.triples_.size());
        for (const Triple& t : g.triples_) {
            out.push_back({g.entity_name(t.subject), g.relation_name(t.relation),
                           g.entity_name(t.object)});
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    return name_triples(*this) == name_triples(other);
}

}  // namespace graphwalk
