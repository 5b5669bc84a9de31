#include "graphwalk/env.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace graphwalk {

namespace {

std::vector<Triple> sorted_selection(const std::vector<Triple>& sel) {
    std::vector<Triple> s(sel);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

}  // namespace

bool Action::operator==(const Action& other) const {
    if (type != other.type) return false;
    switch (type) {
        case ActionType::explore_entity:
            if (target && other.target) return *target == *other.target;
            return target_surface == other.target_surface && target == other.target;
        case ActionType::choose_triples:
            return sorted_selection(selection) == sorted_selection(other.selection);
        case ActionType::finish:
            return true;
    }
    return false;
}

std::string to_string(EpisodeStatus s) {
    switch (s) {
        case EpisodeStatus::running: return "running";
        case EpisodeStatus::finished: return "finished";
        case EpisodeStatus::truncated: return "truncated";
    }
    return "unknown";
}

const std::string& action_grammar_hint() {
    static const std::string hint =
        "Actions: EXPLORE[\"<entity name>\"] | CHOOSE[i1,i2,...] | FINISH";
    return hint;
}

EpisodeState init_episode(const KnowledgeGraph& g, const Query& q,
                          const EpisodeConfig& config) {
    if (q.text.empty()) throw EpisodeError("query text is empty");
    if (q.topic_entities.empty()) throw EpisodeError("query has no topic entities");

    EpisodeState state;
    state.query = q;
    state.config = config;
    std::vector<std::string> missing;
    for (const auto& surface : q.topic_entities) {
        if (auto id = g.resolve_entity(surface)) {
            state.topics.push_back(*id);
        } else {
            missing.push_back(surface);
        }
    }
    if (!missing.empty()) {
        std::string msg = "unresolvable topic entities:";
        for (const auto& m : missing) msg += " \"" + m + "\"";
        throw EpisodeError(msg);
    }
    return state;
}

Observation render_observation(const KnowledgeGraph& g, const EpisodeState& state,
                               const RenderLimits& limits) {
    Observation obs;
    obs.window_size = state.window.size();
    obs.subgraph_size = state.subgraph.size();
    obs.step = state.step;
    obs.budget_remaining =
        state.config.max_steps > state.step ? state.config.max_steps - state.step : 0;

    std::ostringstream out;
    out << "Question: " << state.query.text << "\n";
    out << "Topic entities: ";
    for (std::size_t i = 0; i < state.topics.size(); ++i) {
        if (i) out << " | ";
        out << g.entity_name(state.topics[i]);
    }
    out << "\n";

    out << "Subgraph: " << state.subgraph.size() << " triples in subgraph.\n";
    for (const Triple& t : state.subgraph) {
        out << "  - " << g.render_triple(t) << "\n";
    }

    out << "Window: " << state.window.size() << " triples in window.\n";
    std::size_t shown = std::min(state.window.size(), limits.max_window_lines);
    for (std::size_t i = 0; i < shown; ++i) {
        out << "  " << (i + 1) << ". " << g.render_triple(state.window[i]) << "\n";
    }
    if (shown < state.window.size()) {
        out << "  +" << (state.window.size() - shown) << " more\n";
        obs.truncated_render = true;
    }

    out << "Budget: " << obs.budget_remaining << " steps remaining of "
        << state.config.max_steps << ".\n";
    out << action_grammar_hint() << "\n";

    obs.text = out.str();
    return obs;
}

namespace {

StepResult reject(const KnowledgeGraph& g, const EpisodeState& state, std::string reason) {
    StepResult res;
    res.state = state;
    res.accepted = false;
    res.rejection = std::move(reason);
    res.state.consecutive_rejections++;
    if (res.state.consecutive_rejections >= state.config.max_consecutive_rejections) {
        res.state.status = EpisodeStatus::truncated;
    }
    res.observation = render_observation(g, res.state,
                                         RenderLimits{state.config.max_window_lines});
    return res;
}

void append_window(EpisodeState& s, const std::vector<Triple>& triples) {
    std::unordered_set<Triple, TripleHash> present(s.window.begin(), s.window.end());
    std::unordered_set<Triple, TripleHash> ever(s.ever_windowed.begin(), s.ever_windowed.end());
    for (const Triple& t : triples) {
        if (present.insert(t).second) {
            s.window.push_back(t);
            s.window_origin.push_back(s.step);
        }
        if (ever.insert(t).second) s.ever_windowed.push_back(t);
    }
}

}  // namespace

StepResult apply_action(const KnowledgeGraph& g, const EpisodeState& state,
                        const Action& action) {
    if (!state.running()) {
        throw EpisodeError("episode is " + to_string(state.status) +
                           "; no further actions accepted");
    }

    StepResult res;
    res.state = state;
    EpisodeState& s = res.state;

    std::string summary;
    switch (action.type) {
        case ActionType::explore_entity: {
            if (!action.target || !g.valid(*action.target)) {
                std::string name = action.target_surface.empty()
                                       ? "<unset>"
                                       : "\"" + action.target_surface + "\"";
                return reject(g, state, "unknown entity " + name);
            }
            auto found = g.explore(*action.target);
            std::size_t before = s.window.size();
            append_window(s, found);
            summary = "explored " + g.entity_name(*action.target) + ": +" +
                      std::to_string(s.window.size() - before) + " window triples";
            break;
        }
        case ActionType::choose_triples: {
            if (action.selection.empty()) {
                return reject(g, state, "empty selection");
            }
            std::unordered_set<Triple, TripleHash> window_set(state.window.begin(),
                                                              state.window.end());
            for (const Triple& t : action.selection) {
                if (!window_set.count(t)) {
                    return reject(g, state,
                                  "selection outside the window: " + g.render_triple(t));
                }
            }
            std::unordered_set<Triple, TripleHash> sub(s.subgraph.begin(), s.subgraph.end());
            std::size_t added = 0;
            for (const Triple& t : sorted_selection(action.selection)) {
                if (sub.insert(t).second) {
                    s.subgraph.push_back(t);
                    ++added;
                }
            }
            s.window.clear();
            s.window_origin.clear();
            summary = "chose " + std::to_string(action.selection.size()) + " triples (" +
                      std::to_string(added) + " new); window cleared";
            break;
        }
        case ActionType::finish: {
            s.status = EpisodeStatus::finished;
            summary = "finished";
            break;
        }
    }

    s.consecutive_rejections = 0;
    s.step++;
    s.history.push_back({action, summary});
    if (s.status == EpisodeStatus::running && s.step >= s.config.max_steps) {
        s.status = EpisodeStatus::truncated;
    }

    res.accepted = true;
    res.observation =
        render_observation(g, s, RenderLimits{state.config.max_window_lines});
    return res;
}

EpisodeState register_invalid_input(const EpisodeState& state) {
    EpisodeState s = state;
    if (!s.running()) return s;
    s.consecutive_rejections++;
    if (s.consecutive_rejections >= s.config.max_consecutive_rejections) {
        s.status = EpisodeStatus::truncated;
    }
    return s;
}

std::set<std::string> extractive_answer(const KnowledgeGraph& g, const EpisodeState& state) {
    // Locate the final ChooseTriples action.
    const std::vector<Triple>* last_selection = nullptr;
    std::size_t last_choose_index = 0;
    for (std::size_t i = 0; i < state.history.size(); ++i) {
        if (state.history[i].action.type == ActionType::choose_triples) {
            last_selection = &state.history[i].action.selection;
            last_choose_index = i;
        }
    }
    if (!last_selection || state.subgraph.empty()) return {};

    std::unordered_set<std::uint32_t> excluded;
    for (EntityId t : state.topics) excluded.insert(t.value);
    for (std::size_t i = 0; i < last_choose_index; ++i) {
        const Action& a = state.history[i].action;
        if (a.type != ActionType::choose_triples) continue;
        for (const Triple& t : a.selection) {
            excluded.insert(t.subject.value);
            excluded.insert(t.object.value);
        }
    }

    std::set<std::string> answers;
    for (const Triple& t : *last_selection) {
        for (EntityId e : {t.subject, t.object}) {
            if (!excluded.count(e.value)) answers.insert(g.entity_name(e));
        }
    }
    return answers;
}

std::set<std::string> finalize_answer(const KnowledgeGraph& g, const EpisodeState& state,
                                      const AnswerFn& answerer) {
    if (state.running()) {
        throw EpisodeError("finalize_answer requires a finished or truncated episode");
    }
    if (!answerer) return extractive_answer(g, state);

    std::vector<std::string> lines;
    lines.reserve(state.subgraph.size());
    for (const Triple& t : state.subgraph) lines.push_back(g.render_triple(t));
    return answerer(state.query.text, lines);  // failures propagate with their cause
}

}  // namespace graphwalk
