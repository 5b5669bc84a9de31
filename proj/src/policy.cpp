#include "graphwalk/policy.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "graphwalk/text.hpp"

namespace graphwalk {

namespace {

struct GrammarMatch {
    std::size_t position = 0;
    std::size_t end = 0;
    Action action;
};

std::vector<std::size_t> parse_index_list(const std::string& body) {
    std::vector<std::size_t> out;
    std::string cur;
    for (char c : body) {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        } else if (c == ',') {
            if (cur.empty()) throw ActionParseError("malformed CHOOSE index list");
            out.push_back(std::stoull(cur));
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            throw ActionParseError("malformed CHOOSE index list");
        }
    }
    if (!cur.empty()) out.push_back(std::stoull(cur));
    return out;
}

}  // namespace

Action parse_action(const std::string& text, std::span<const Triple> window,
                    const KnowledgeGraph& g) {
    static const std::regex explore_re("EXPLORE\\[\"([^\"]*)\"\\]");
    static const std::regex choose_re("CHOOSE\\[([0-9][0-9,\\s]*)\\]");
    static const std::regex finish_re("\\bFINISH\\b");

    std::optional<GrammarMatch> best;
    auto consider = [&](std::size_t pos, std::size_t end, Action action) {
        if (!best || end >= best->end) {
            best = GrammarMatch{pos, end, std::move(action)};
        }
    };

    auto scan = [&](const std::regex& re, auto&& make) {
        auto begin = std::sregex_iterator(text.begin(), text.end(), re);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            consider(static_cast<std::size_t>(it->position(0)),
                     static_cast<std::size_t>(it->position(0) + it->length(0)), make(*it));
        }
    };

    scan(explore_re, [&](const std::smatch& m) {
        std::string name = m[1].str();
        return Action::explore_surface(name, g.resolve_entity(name));
    });
    scan(finish_re, [&](const std::smatch&) { return Action::finish(); });

    // CHOOSE is validated lazily so a later FINISH/EXPLORE still wins over a
    // malformed earlier CHOOSE.
    std::vector<std::pair<std::size_t, std::string>> chooses;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), choose_re);
         it != std::sregex_iterator(); ++it) {
        chooses.emplace_back(static_cast<std::size_t>(it->position(0) + it->length(0)),
                             (*it)[1].str());
    }
    if (!chooses.empty() && (!best || chooses.back().first >= best->end)) {
        auto indices = parse_index_list(chooses.back().second);
        if (indices.empty()) throw ActionParseError("CHOOSE with no indices");
        std::vector<Triple> selection;
        for (std::size_t idx : indices) {
            if (idx == 0 || idx > window.size()) {
                throw ActionParseError("CHOOSE index " + std::to_string(idx) +
                                       " out of range (window has " +
                                       std::to_string(window.size()) + " triples)");
            }
            selection.push_back(window[idx - 1]);
        }
        std::sort(selection.begin(), selection.end());
        selection.erase(std::unique(selection.begin(), selection.end()), selection.end());
        return Action::choose(std::move(selection));
    }

    if (!best) throw ActionParseError("no action found in policy output");
    return best->action;
}

std::string serialize_action(const Action& action, std::span<const Triple> window,
                             const KnowledgeGraph& g) {
    switch (action.type) {
        case ActionType::explore_entity: {
            std::string name = action.target && g.valid(*action.target)
                                   ? g.entity_name(*action.target)
                                   : action.target_surface;
            return "EXPLORE[\"" + name + "\"]";
        }
        case ActionType::choose_triples: {
            std::vector<std::size_t> indices;
            for (const Triple& t : action.selection) {
                auto it = std::find(window.begin(), window.end(), t);
                if (it == window.end()) {
                    throw ActionParseError("cannot serialize CHOOSE: triple " +
                                           g.render_triple(t) + " is not in the window");
                }
                indices.push_back(static_cast<std::size_t>(it - window.begin()) + 1);
            }
            std::sort(indices.begin(), indices.end());
            indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
            std::string out = "CHOOSE[";
            for (std::size_t i = 0; i < indices.size(); ++i) {
                if (i) out += ",";
                out += std::to_string(indices[i]);
            }
            return out + "]";
        }
        case ActionType::finish:
            return "FINISH";
    }
    throw ActionParseError("unknown action type");
}

double overlap_score(const std::string& query_text, const std::string& triple_text) {
    auto q = content_tokens(query_text);
    auto t = content_tokens(triple_text);
    if (q.empty() || t.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& tok : q) {
        if (t.count(tok)) ++inter;
    }
    return static_cast<double>(inter) / static_cast<double>(q.size() + t.size());
}

std::vector<Triple> heuristic_choose_filter(const std::string& query_text,
                                            std::span<const Triple> window,
                                            double threshold, const KnowledgeGraph& g) {
    if (window.empty()) return {};
    std::vector<Triple> selected;
    double best_score = -1.0;
    std::string best_text;
    Triple best_triple{};
    for (const Triple& t : window) {
        std::string text = g.render_triple(t);
        double score = overlap_score(query_text, text);
        if (score >= threshold) selected.push_back(t);
        if (score > best_score || (score == best_score && text < best_text)) {
            best_score = score;
            best_text = text;
            best_triple = t;
        }
    }
    if (selected.empty()) selected.push_back(best_triple);
    return selected;
}

// ---------------------------------------------------------------------------
// Observation text parsing

ParsedObservation parse_observation_text(const std::string& text) {
    ParsedObservation parsed;
    std::istringstream in(text);
    std::string line;
    enum class Section { none, subgraph, window } section = Section::none;
    while (std::getline(in, line)) {
        if (line.rfind("Question: ", 0) == 0) {
            parsed.question = line.substr(10);
            section = Section::none;
        } else if (line.rfind("Topic entities: ", 0) == 0) {
            std::string rest = line.substr(16);
            std::size_t start = 0;
            while (start <= rest.size()) {
                std::size_t sep = rest.find(" | ", start);
                std::string name = sep == std::string::npos ? rest.substr(start)
                                                            : rest.substr(start, sep - start);
                if (!name.empty()) parsed.topic_entities.push_back(name);
                if (sep == std::string::npos) break;
                start = sep + 3;
            }
            section = Section::none;
        } else if (line.rfind("Subgraph: ", 0) == 0) {
            parsed.subgraph_total = std::stoull(line.substr(10));
            section = Section::subgraph;
        } else if (line.rfind("Window: ", 0) == 0) {
            parsed.window_total = std::stoull(line.substr(8));
            section = Section::window;
        } else if (line.rfind("Budget: ", 0) == 0 || line.rfind("Actions: ", 0) == 0) {
            section = Section::none;
        } else if (section == Section::subgraph && line.rfind("  - ", 0) == 0) {
            parsed.subgraph_lines.push_back(line.substr(4));
        } else if (section == Section::window && line.find(". (") != std::string::npos) {
            parsed.window_lines.push_back(line.substr(line.find(". (") + 2));
        }
    }
    return parsed;
}

namespace {

/// Endpoint names of a rendered "(s | r | o)" line.
std::pair<std::string, std::string> line_endpoints(const std::string& line) {
    if (line.size() < 2 || line.front() != '(' || line.back() != ')') return {};
    std::string body = line.substr(1, line.size() - 2);
    std::size_t first = body.find(" | ");
    if (first == std::string::npos) return {};
    std::size_t second = body.find(" | ", first + 3);
    if (second == std::string::npos) return {};
    return {body.substr(0, first), body.substr(second + 3)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Scripted

ScriptedPolicy::ScriptedPolicy(std::vector<Action> actions) : actions_(std::move(actions)) {}

ActionDecision ScriptedPolicy::decide(const Observation& obs, std::span<const Triple> window,
                                      const KnowledgeGraph& g) {
    (void)obs;
    if (cursor_ >= actions_.size()) {
        throw PolicyError("scripted policy exhausted after " +
                          std::to_string(actions_.size()) + " actions");
    }
    ActionDecision d;
    d.action = actions_[cursor_++];
    d.raw_response = serialize_action(d.action, window, g);
    return d;
}

// ---------------------------------------------------------------------------
// Heuristic

HeuristicPolicy::HeuristicPolicy(double overlap_threshold, std::uint64_t seed)
    : threshold_(overlap_threshold), seed_(seed) {}

std::string HeuristicPolicy::tag() const {
    std::ostringstream out;
    out << "heuristic(threshold=" << threshold_ << ")";
    return out.str();
}

ActionDecision HeuristicPolicy::decide(const Observation& obs, std::span<const Triple> window,
                                       const KnowledgeGraph& g) {
    ParsedObservation parsed = parse_observation_text(obs.text);
    ActionDecision d;

    if (!parsed.window_lines.empty()) {
        // Score the rendered lines; indices map 1:1 onto the window order.
        std::vector<std::size_t> picked;
        double best_score = -1.0;
        std::size_t best_index = 0;
        for (std::size_t i = 0; i < parsed.window_lines.size(); ++i) {
            double score = overlap_score(parsed.question, parsed.window_lines[i]);
            if (score >= threshold_) picked.push_back(i);
            if (score > best_score ||
                (score == best_score && parsed.window_lines[i] < parsed.window_lines[best_index])) {
                best_score = score;
                best_index = i;
            }
        }
        if (picked.empty()) picked.push_back(best_index);
        std::vector<Triple> selection;
        for (std::size_t i : picked) {
            if (i < window.size()) selection.push_back(window[i]);
        }
        d.reasoning = "Window triples scored by token overlap with the question.";
        d.action = Action::choose(std::move(selection));
        d.raw_response = serialize_action(d.action, window, g);
        return d;
    }

    // Endpoints already committed to the subgraph.
    std::set<std::string> committed;
    for (const auto& line : parsed.subgraph_lines) {
        auto [s, o] = line_endpoints(line);
        if (!s.empty()) committed.insert(s);
        if (!o.empty()) committed.insert(o);
    }
    for (const auto& topic : parsed.topic_entities) {
        if (!committed.count(topic)) {
            d.reasoning = "Topic entity \"" + topic + "\" has no chosen triples yet.";
            d.action = Action::explore_surface(topic, g.resolve_entity(topic));
            d.raw_response = serialize_action(d.action, window, g);
            return d;
        }
    }

    d.reasoning = parsed.subgraph_total > 0
                      ? "All topic entities are covered by the subgraph."
                      : "Nothing left to explore.";
    d.action = Action::finish();
    d.raw_response = "FINISH";
    return d;
}

// ---------------------------------------------------------------------------
// Random

RandomPolicy::RandomPolicy(std::uint64_t seed) : seed_(seed), rng_(seed) {}

std::string RandomPolicy::tag() const {
    return "random(seed=" + std::to_string(seed_) + ")";
}

ActionDecision RandomPolicy::decide(const Observation& obs, std::span<const Triple> window,
                                    const KnowledgeGraph& g) {
    ParsedObservation parsed = parse_observation_text(obs.text);
    ActionDecision d;
    d.reasoning = "Random walk.";

    // Candidate entity names visible in the observation.
    std::vector<std::string> entities = parsed.topic_entities;
    auto add_endpoints = [&](const std::vector<std::string>& lines) {
        for (const auto& line : lines) {
            auto [s, o] = line_endpoints(line);
            if (!s.empty()) entities.push_back(s);
            if (!o.empty()) entities.push_back(o);
        }
    };
    add_endpoints(parsed.subgraph_lines);
    add_endpoints(parsed.window_lines);
    std::sort(entities.begin(), entities.end());
    entities.erase(std::unique(entities.begin(), entities.end()), entities.end());

    auto explore_random = [&] {
        std::uniform_int_distribution<std::size_t> pick(0, entities.size() - 1);
        const std::string& name = entities[pick(rng_)];
        d.action = Action::explore_surface(name, g.resolve_entity(name));
    };

    std::uniform_real_distribution<double> roll(0.0, 1.0);
    const std::size_t visible = std::min(parsed.window_lines.size(), window.size());
    if (visible > 0) {
        double p = roll(rng_);
        if (p < 0.5) {
            std::vector<Triple> selection;
            for (std::size_t i = 0; i < visible; ++i) {
                if (roll(rng_) < 0.5) selection.push_back(window[i]);
            }
            if (selection.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, visible - 1);
                selection.push_back(window[pick(rng_)]);
            }
            d.action = Action::choose(std::move(selection));
        } else if (p < 0.85 || parsed.subgraph_total == 0) {
            explore_random();
        } else {
            d.action = Action::finish();
        }
    } else {
        if (parsed.subgraph_total > 0 && roll(rng_) < 0.25) {
            d.action = Action::finish();
        } else {
            explore_random();
        }
    }
    d.raw_response = serialize_action(d.action, window, g);
    return d;
}

// ---------------------------------------------------------------------------
// Remote

const std::string& policy_system_prompt() {
    static const std::string prompt =
        "You are a graph retrieval agent answering questions over a knowledge graph.\n"
        "Each turn shows the question, the triples you already kept (subgraph), and the\n"
        "triples currently visible (window). Reply with brief reasoning, then end with\n"
        "exactly one action on its own line:\n"
        "  EXPLORE[\"<entity name>\"]  list every triple incident to that entity\n"
        "  CHOOSE[i1,i2,...]          keep the numbered window triples and clear the window\n"
        "  FINISH                     stop when the subgraph answers the question\n";
    return prompt;
}

RemotePolicy::RemotePolicy(RemoteConfig config, std::unique_ptr<ChatTransport> transport)
    : client_(std::move(config), std::move(transport)) {}

std::string RemotePolicy::tag() const {
    return "remote(model=" + client_.config().model + ")";
}

ActionDecision RemotePolicy::decide(const Observation& obs, std::span<const Triple> window,
                                    const KnowledgeGraph& g) {
    std::vector<ChatMessage> messages = {
        {"system", policy_system_prompt()},
        {"user", obs.text},
    };

    const int attempts = client_.config().max_retries + 1;
    std::string last_error;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        std::string reply = client_.complete(messages);
        try {
            ActionDecision d;
            d.action = parse_action(reply, window, g);
            d.raw_response = reply;
            d.retries_used = static_cast<std::size_t>(attempt);
            // Everything before the final action line is treated as reasoning.
            std::string serialized = serialize_action(d.action, window, g);
            std::size_t pos = reply.rfind(d.action.type == ActionType::finish ? "FINISH"
                                                                              : serialized);
            d.reasoning = pos == std::string::npos ? "" : reply.substr(0, pos);
            return d;
        } catch (const ActionParseError& e) {
            last_error = e.what();
            messages.push_back({"assistant", reply});
            messages.push_back({"user", std::string("Parse error: ") + e.what() +
                                            ". Reply again with exactly one action. " +
                                            action_grammar_hint()});
        }
    }
    throw PolicyError("remote policy produced no parseable action after " +
                      std::to_string(attempts) + " attempts: " + last_error);
}

std::unique_ptr<Policy> make_policy(const PolicyConfig& config) {
    switch (config.kind) {
        case PolicyKind::heuristic:
            return std::make_unique<HeuristicPolicy>(config.overlap_threshold, config.seed);
        case PolicyKind::random:
            return std::make_unique<RandomPolicy>(config.seed);
        case PolicyKind::remote:
            if (config.remote.endpoint.empty() || config.remote.model.empty()) {
                throw PolicyError("remote policy requires an endpoint and a model");
            }
            return std::make_unique<RemotePolicy>(config.remote);
        case PolicyKind::scripted:
            throw PolicyError("scripted policies are built from an explicit action list");
    }
    throw PolicyError("unknown policy kind");
}

}  // namespace graphwalk
