#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "graphwalk/kg.hpp"

namespace graphwalk {

class EpisodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Query {
    std::string id;
    std::string text;
    std::vector<std::string> topic_entities;  // surface forms
    std::set<std::string> gold_answers;       // optional, empty at pure inference
};

struct EpisodeConfig {
    std::size_t max_steps = 10;
    std::size_t max_consecutive_rejections = 5;
    std::size_t max_window_lines = 100;
};

struct RenderLimits {
    std::size_t max_window_lines = 100;
};

enum class ActionType { explore_entity, choose_triples, finish };

/// One of ExploreEntity / ChooseTriples / Finish. An explore parsed from
/// text keeps its surface form even when the name did not resolve, so the
/// environment can reject it with a useful message.
struct Action {
    ActionType type = ActionType::finish;
    std::optional<EntityId> target;     // explore
    std::string target_surface;         // explore, as written
    std::vector<Triple> selection;      // choose, set semantics

    static Action explore(EntityId id) {
        Action a;
        a.type = ActionType::explore_entity;
        a.target = id;
        return a;
    }
    static Action explore_surface(std::string surface, std::optional<EntityId> id) {
        Action a;
        a.type = ActionType::explore_entity;
        a.target = id;
        a.target_surface = std::move(surface);
        return a;
    }
    static Action choose(std::vector<Triple> triples) {
        Action a;
        a.type = ActionType::choose_triples;
        a.selection = std::move(triples);
        return a;
    }
    static Action finish() { return Action{}; }

    bool operator==(const Action& other) const;
};

enum class EpisodeStatus { running, finished, truncated };

std::string to_string(EpisodeStatus s);

struct HistoryEntry {
    Action action;
    std::string summary;
};

struct EpisodeState {
    Query query;
    std::vector<EntityId> topics;
    std::vector<Triple> window;                 // insertion order, no duplicates
    std::vector<std::size_t> window_origin;     // step at which window[i] entered
    std::vector<Triple> subgraph;               // insertion order, no duplicates
    std::vector<Triple> ever_windowed;          // unique triples ever shown
    std::size_t step = 0;
    std::vector<HistoryEntry> history;          // accepted actions only
    EpisodeStatus status = EpisodeStatus::running;
    std::size_t consecutive_rejections = 0;
    EpisodeConfig config;

    bool running() const { return status == EpisodeStatus::running; }
};

struct Observation {
    std::string text;
    std::size_t window_size = 0;
    std::size_t subgraph_size = 0;
    std::size_t step = 0;
    std::size_t budget_remaining = 0;
    bool truncated_render = false;
};

struct StepResult {
    EpisodeState state;
    Observation observation;
    bool accepted = false;
    std::string rejection;  // set when !accepted
};

/// Start an episode. Throws EpisodeError listing any topic entity surface
/// forms that do not resolve in the graph.
EpisodeState init_episode(const KnowledgeGraph& g, const Query& q,
                          const EpisodeConfig& config = {});

/// Pure transition: same graph, state, and action always produce the same
/// result. Rejected actions leave everything unchanged except the
/// consecutive-rejection counter (the cap forces truncation). Throws
/// EpisodeError when the episode is not running.
StepResult apply_action(const KnowledgeGraph& g, const EpisodeState& state,
                        const Action& action);

/// Bookkeeping for inputs that never became an Action (e.g. unparseable
/// text): counts toward the rejection cap so episodes always terminate.
EpisodeState register_invalid_input(const EpisodeState& state);

/// Deterministic text: query, subgraph triples, window triples (insertion
/// order, capped with a "+N more" marker), remaining budget, action grammar.
Observation render_observation(const KnowledgeGraph& g, const EpisodeState& state,
                               const RenderLimits& limits = {});

/// Pluggable answer function: (question text, rendered subgraph lines) ->
/// answer strings.
using AnswerFn =
    std::function<std::set<std::string>(const std::string&, const std::vector<std::string>&)>;

/// Answers from a terminal episode. With no answerer, applies the extractive
/// rule: canonical names of entities introduced by the final ChooseTriples
/// action, minus topic entities and entities already seen as endpoints of
/// earlier-chosen triples. Throws EpisodeError on a running episode;
/// answerer failures propagate.
std::set<std::string> finalize_answer(const KnowledgeGraph& g, const EpisodeState& state,
                                      const AnswerFn& answerer = {});

/// The extractive rule itself, usable on any state.
std::set<std::string> extractive_answer(const KnowledgeGraph& g, const EpisodeState& state);

/// The action-grammar reminder line included in every observation.
const std::string& action_grammar_hint();

}  // namespace graphwalk
