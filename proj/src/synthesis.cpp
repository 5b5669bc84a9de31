#include "graphwalk/synthesis.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "graphwalk/text.hpp"

namespace graphwalk {

namespace {

using nlohmann::json;

std::string post_summary(const EpisodeState& s) {
    std::ostringstream out;
    out << "step=" << s.step << " status=" << to_string(s.status)
        << " window=" << s.window.size() << " subgraph=" << s.subgraph.size();
    return out.str();
}

Query make_query(const QAInstance& qa) {
    Query q;
    q.id = qa.id;
    q.text = qa.question;
    q.topic_entities = qa.topic_entities;
    q.gold_answers.insert(qa.gold_answers.begin(), qa.gold_answers.end());
    return q;
}

std::vector<std::string> sorted_unique(std::set<std::string> values) {
    return {values.begin(), values.end()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Episode running

Trajectory run_episode(const KnowledgeGraph& g, const QAInstance& qa, Policy& policy,
                       const SynthesisConfig& config) {
    Trajectory t;
    t.qa = qa;
    t.policy_tag = policy.tag();
    t.max_steps = config.episode.max_steps;

    EpisodeState state = init_episode(g, make_query(qa), config.episode);
    const RenderLimits limits{config.episode.max_window_lines};

    while (state.running()) {
        Observation obs = render_observation(g, state, limits);
        ActionDecision decision = policy.decide(obs, state.window, g);
        StepResult res = apply_action(g, state, decision.action);
        if (res.accepted) {
            TrajectoryStep step;
            step.observation = obs.text;
            step.reasoning = decision.reasoning;
            step.action = serialize_action(decision.action, state.window, g);
            step.post_summary = post_summary(res.state);
            t.steps.push_back(std::move(step));
        }
        state = std::move(res.state);
    }

    t.final_answer = sorted_unique(finalize_answer(g, state));
    t.final_status = to_string(state.status);
    t.triples_retrieved = state.ever_windowed.size();
    t.correct = config.matcher.matches(t.final_answer, qa.gold_answers);
    return t;
}

SynthesisResult generate_trajectories(const KnowledgeGraph& g,
                                      const std::vector<QAInstance>& qa_set,
                                      const PolicyFactory& make_policy,
                                      const SynthesisConfig& config) {
    SynthesisResult result;
    for (const QAInstance& qa : qa_set) {
        bool failed = false;
        for (std::size_t sample = 0; sample < config.samples_per_question; ++sample) {
            std::unique_ptr<Policy> policy = make_policy(qa, sample);
            Trajectory t;
            try {
                t = run_episode(g, qa, *policy, config);
            } catch (const std::exception& e) {
                result.failures.push_back(qa.id + ": " + e.what());
                failed = true;
                break;
            }
            result.attempted++;
            if (!config.keep_only_correct || t.correct) {
                result.kept.push_back(std::move(t));
            }
        }
        if (failed) result.failed_questions++;
    }
    if (!qa_set.empty() && result.failed_questions == qa_set.size()) {
        throw SynthesisError("every question failed; first failure: " +
                             (result.failures.empty() ? std::string("?") : result.failures[0]));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Replay

namespace {

struct ReplayedStep {
    Observation observation;
    Action action;
};

struct Replayed {
    std::vector<ReplayedStep> steps;
    EpisodeState final_state;
};

Replayed replay_detail(const KnowledgeGraph& g, const Trajectory& t,
                       bool validate_observations) {
    EpisodeConfig config;
    config.max_steps = t.max_steps;
    Replayed replayed;
    EpisodeState state = init_episode(g, make_query(t.qa), config);
    const RenderLimits limits{config.max_window_lines};

    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        if (!state.running()) {
            throw ReplayError("step " + std::to_string(i) +
                              ": episode already terminal during replay");
        }
        Observation obs = render_observation(g, state, limits);
        if (validate_observations && obs.text != t.steps[i].observation) {
            throw ReplayError("step " + std::to_string(i) +
                              ": stored observation does not match replay");
        }
        Action action;
        try {
            action = parse_action(t.steps[i].action, state.window, g);
        } catch (const ActionParseError& e) {
            throw ReplayError("step " + std::to_string(i) + ": " + e.what());
        }
        StepResult res = apply_action(g, state, action);
        if (!res.accepted) {
            throw ReplayError("step " + std::to_string(i) + ": action rejected (" +
                              res.rejection + ")");
        }
        replayed.steps.push_back({std::move(obs), std::move(action)});
        state = std::move(res.state);
    }
    replayed.final_state = std::move(state);
    return replayed;
}

}  // namespace

EpisodeState replay_trajectory(const KnowledgeGraph& g, const Trajectory& t,
                               bool validate_observations) {
    return replay_detail(g, t, validate_observations).final_state;
}

// ---------------------------------------------------------------------------
// Refinement

namespace {

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    return out;
}

Trajectory annotated(Trajectory t, const std::string& note) {
    t.annotation = t.annotation.empty() ? note : t.annotation + "; " + note;
    return t;
}

bool touches_any(const Triple& t, const std::unordered_set<std::uint32_t>& entities) {
    return entities.count(t.subject.value) != 0 || entities.count(t.object.value) != 0;
}

}  // namespace

Trajectory refine_trajectory(const KnowledgeGraph& g, const Trajectory& t,
                             std::size_t max_hops) {
    if (!t.correct) {
        throw SynthesisError("refine_trajectory requires a correct trajectory (qa " +
                             t.qa.id + ")");
    }

    std::vector<EntityId> topics;
    for (const auto& surface : t.qa.topic_entities) {
        auto id = g.resolve_entity(surface);
        if (!id) return annotated(t, "no-path: topic \"" + surface + "\" unresolvable");
        topics.push_back(*id);
    }
    std::unordered_set<std::uint32_t> topic_set;
    for (EntityId e : topics) topic_set.insert(e.value);

    // Resolve the answer strings to entities; paths are computed per answer
    // so multi-answer questions merge into one trajectory.
    std::map<std::string, EntityId> targets;  // canonical name -> id, sorted
    std::vector<std::string> skipped;
    for (const auto& answer : t.final_answer) {
        auto id = g.resolve_entity(answer);
        if (!id) {
            skipped.push_back(answer);
            continue;
        }
        targets.emplace(g.entity_name(*id), *id);
    }
    if (targets.empty()) {
        return annotated(t, "no-path: no final answer resolves to a graph entity");
    }

    std::unordered_set<std::uint32_t> answer_set;
    for (const auto& [name, id] : targets) answer_set.insert(id.value);

    // All minimal paths per answer. Answers sharing a penultimate entity can
    // merge into one explore, so the final path choice happens below.
    std::vector<std::pair<std::string, std::vector<EntityPath>>> candidates;
    for (const auto& [name, id] : targets) {
        auto found = g.shortest_paths(topics, {id}, max_hops);
        if (found.empty() || found.front().length() == 0) {
            // Unreachable, or the answer is itself a topic entity; the
            // extractive rule cannot introduce either.
            skipped.push_back(name);
            continue;
        }
        candidates.emplace_back(name, std::move(found));
    }
    if (candidates.empty()) {
        return annotated(t, "no-path: no answer entity is reachable from the topics");
    }
    if (!skipped.empty()) {
        // A partial reconstruction would change the final answer set.
        return annotated(t, "no-path: unreachable answers: " + join_names(skipped));
    }

    // Greedy cover over penultimate entities: the parent reaching the most
    // answers wins (ties by lexicographic path order), so multi-answer
    // questions collapse onto shared intermediates and a single-answer
    // question keeps its lexicographically-first minimal path.
    auto path_key = [&](const EntityPath& p) {
        std::vector<std::string> key;
        for (EntityId e : p.entities) key.push_back(g.entity_name(e));
        for (const Triple& h : p.hops) key.push_back(g.render_triple(h));
        return key;
    };
    std::vector<EntityPath> paths;
    std::vector<bool> assigned(candidates.size(), false);
    while (std::find(assigned.begin(), assigned.end(), false) != assigned.end()) {
        // parent entity -> indices of still-unassigned answers it can serve.
        std::map<std::uint32_t, std::vector<std::size_t>> by_parent;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (assigned[i]) continue;
            std::unordered_set<std::uint32_t> seen;
            for (const EntityPath& p : candidates[i].second) {
                std::uint32_t parent = p.entities[p.length() - 1].value;
                if (seen.insert(parent).second) by_parent[parent].push_back(i);
            }
        }
        std::size_t best_cover = 0;
        std::uint32_t best_parent = 0;
        std::vector<std::string> best_key;
        for (const auto& [parent, covered] : by_parent) {
            // Representative: the first candidate path through this parent.
            std::vector<std::string> key;
            for (const EntityPath& p : candidates[covered.front()].second) {
                if (p.entities[p.length() - 1].value == parent) {
                    key = path_key(p);
                    break;
                }
            }
            if (covered.size() > best_cover ||
                (covered.size() == best_cover && key < best_key)) {
                best_cover = covered.size();
                best_parent = parent;
                best_key = key;
            }
        }
        for (std::size_t i : by_parent.at(best_parent)) {
            for (const EntityPath& p : candidates[i].second) {
                if (p.entities[p.length() - 1].value == best_parent) {
                    paths.push_back(p);  // first match = lexicographically first
                    break;
                }
            }
            assigned[i] = true;
        }
    }
    std::sort(paths.begin(), paths.end(),
              [&](const EntityPath& a, const EntityPath& b) {
                  return path_key(a) < path_key(b);
              });

    std::size_t depth = 0;
    for (const auto& p : paths) depth = std::max(depth, p.length());

    // Level-grouped merge. Non-final path edges are chosen at their own hop
    // level; every final edge is deferred to the last Choose so the
    // extractive rule reads off exactly the answer entities. Edges touching
    // an answer entity must not be chosen early for the same reason.
    std::vector<Action> actions;
    for (std::size_t level = 1; level <= depth; ++level) {
        std::vector<EntityId> explores;
        std::vector<Triple> chosen;
        auto add = [&](EntityId parent, const Triple& edge) {
            if (std::find(explores.begin(), explores.end(), parent) == explores.end()) {
                explores.push_back(parent);
            }
            if (std::find(chosen.begin(), chosen.end(), edge) == chosen.end()) {
                chosen.push_back(edge);
            }
        };
        for (const auto& p : paths) {
            if (level < depth && p.length() > level &&
                !touches_any(p.hops[level - 1], answer_set)) {
                add(p.entities[level - 1], p.hops[level - 1]);
            }
            if (level == depth) {
                add(p.entities[p.length() - 1], p.hops[p.length() - 1]);
            }
        }
        if (chosen.empty()) continue;
        for (EntityId e : explores) actions.push_back(Action::explore(e));
        actions.push_back(Action::choose(std::move(chosen)));
    }
    actions.push_back(Action::finish());

    if (actions.size() > t.steps.size()) {
        return annotated(t, "refinement-longer: canonical sequence (" +
                                std::to_string(actions.size()) + ") exceeds the original (" +
                                std::to_string(t.steps.size()) + ")");
    }

    // Replay the canonical sequence and require the exact same answer set;
    // anything else keeps the original trajectory.
    Trajectory refined;
    refined.qa = t.qa;
    refined.policy_tag = t.policy_tag;
    refined.refined = true;
    refined.max_steps = t.max_steps;

    EpisodeConfig config;
    config.max_steps = t.max_steps;
    EpisodeState state;
    try {
        state = init_episode(g, make_query(t.qa), config);
    } catch (const EpisodeError& e) {
        return annotated(t, std::string("refinement-replay-failed: ") + e.what());
    }
    const RenderLimits limits{config.max_window_lines};
    std::set<std::string> target_names;
    for (const auto& [name, id] : targets) target_names.insert(name);
    const std::string answer_names = join_names(sorted_unique(std::move(target_names)));

    for (const Action& action : actions) {
        if (!state.running()) {
            return annotated(t, "refinement-replay-failed: episode ended early");
        }
        Observation obs = render_observation(g, state, limits);
        std::string serialized;
        try {
            serialized = serialize_action(action, state.window, g);
        } catch (const ActionParseError& e) {
            return annotated(t, std::string("refinement-replay-failed: ") + e.what());
        }
        StepResult res = apply_action(g, state, action);
        if (!res.accepted) {
            return annotated(t, "refinement-replay-failed: " + res.rejection);
        }
        TrajectoryStep step;
        step.observation = obs.text;
        step.action = serialized;
        switch (action.type) {
            case ActionType::explore_entity:
                step.reasoning = "Explore \"" + g.entity_name(*action.target) +
                                 "\" to surface triples on a shortest path to: " +
                                 answer_names + ".";
                break;
            case ActionType::choose_triples:
                step.reasoning = "Keep " + std::to_string(action.selection.size()) +
                                 " shortest-path triple(s) leading to: " + answer_names + ".";
                break;
            case ActionType::finish:
                step.reasoning =
                    "The subgraph covers the shortest path(s) to: " + answer_names + ".";
                break;
        }
        step.post_summary = post_summary(res.state);
        refined.steps.push_back(std::move(step));
        state = std::move(res.state);
    }

    auto extracted = sorted_unique(finalize_answer(g, state));
    if (normalized_set(extracted) != normalized_set(t.final_answer)) {
        return annotated(t, "refinement-replay-failed: reconstructed answers differ");
    }

    refined.final_answer = extracted;
    refined.final_status = to_string(state.status);
    refined.triples_retrieved = state.ever_windowed.size();
    refined.correct = true;  // same answer set as the correct original
    return refined;
}

// ---------------------------------------------------------------------------
// Decomposition

std::vector<DecisionRecord> decompose(const KnowledgeGraph& g, const Trajectory& t) {
    if (t.steps.empty()) {
        throw SynthesisError("cannot decompose a trajectory with no steps (qa " + t.qa.id +
                             ")");
    }
    replay_detail(g, t, /*validate_observations=*/true);

    std::vector<DecisionRecord> records;
    records.reserve(t.steps.size());
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        DecisionRecord r;
        r.qa_id = t.qa.id;
        r.step_index = i;
        r.observation_text = t.steps[i].observation;
        r.target_action = t.steps[i].action;
        r.reasoning = t.steps[i].reasoning;
        r.reference_flag = t.refined ? "from_refinement" : "from_policy";
        records.push_back(std::move(r));
    }
    return records;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

void write_line(std::ostream& sink, const json& j, std::size_t written) {
    sink << j.dump() << "\n";
    if (!sink.good()) {
        throw SynthesisError("sink write failure after " + std::to_string(written) +
                             " records");
    }
}

}  // namespace

std::size_t emit_sft(const std::vector<DecisionRecord>& records, std::ostream& sink) {
    std::size_t written = 0;
    for (const DecisionRecord& r : records) {
        json j;
        j["qa_id"] = r.qa_id;
        j["step"] = r.step_index;
        j["system"] = policy_system_prompt();
        j["observation"] = r.observation_text;
        j["reasoning"] = r.reasoning;
        j["action"] = r.target_action;
        write_line(sink, j, written);
        ++written;
    }
    sink.flush();
    return written;
}

std::size_t emit_rl(const std::vector<RlRecord>& records, std::ostream& sink) {
    std::size_t written = 0;
    for (const RlRecord& r : records) {
        json j;
        j["qa_id"] = r.qa_id;
        j["step"] = r.step;
        j["observation"] = r.observation;
        j["action"] = r.action;
        j["process_reward"] = r.process_reward;
        j["outcome_reward"] = r.outcome_reward;
        j["reference_action"] = r.reference_action;
        write_line(sink, j, written);
        ++written;
    }
    sink.flush();
    return written;
}

std::vector<DecisionRecord> parse_sft_jsonl(std::istream& in) {
    std::vector<DecisionRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        DecisionRecord r;
        r.qa_id = j.at("qa_id").get<std::string>();
        r.step_index = j.at("step").get<std::size_t>();
        r.observation_text = j.at("observation").get<std::string>();
        r.reasoning = j.at("reasoning").get<std::string>();
        r.target_action = j.at("action").get<std::string>();
        r.reference_flag = "from_policy";
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<RlRecord> parse_rl_jsonl(std::istream& in) {
    std::vector<RlRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        RlRecord r;
        r.qa_id = j.at("qa_id").get<std::string>();
        r.step = j.at("step").get<std::size_t>();
        r.observation = j.at("observation").get<std::string>();
        r.action = j.at("action").get<std::string>();
        r.process_reward = j.at("process_reward").get<double>();
        r.outcome_reward = j.at("outcome_reward").get<int>();
        r.reference_action = j.at("reference_action").get<std::string>();
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<QAInstance> load_qa_jsonl(std::istream& in) {
    std::vector<QAInstance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw SynthesisError("QA line " + std::to_string(line_no) + ": invalid JSON");
        }
        QAInstance qa;
        try {
            qa.id = j.at("id").get<std::string>();
            qa.question = j.at("question").get<std::string>();
            qa.topic_entities = j.at("topic_entities").get<std::vector<std::string>>();
            if (j.contains("answers")) {
                qa.gold_answers = j["answers"].get<std::vector<std::string>>();
            }
            if (j.contains("hop") && j["hop"].is_number_integer()) {
                qa.hop_hint = j["hop"].get<int>();
            }
        } catch (const json::exception& e) {
            throw SynthesisError("QA line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(qa));
    }
    return out;
}

std::vector<QAInstance> load_qa_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SynthesisError("cannot open " + path);
    return load_qa_jsonl(in);
}

namespace {

json trajectory_to_json(const Trajectory& t) {
    json j;
    j["id"] = t.qa.id;
    j["question"] = t.qa.question;
    j["topic_entities"] = t.qa.topic_entities;
    j["gold_answers"] = t.qa.gold_answers;
    if (t.qa.hop_hint) j["hop"] = *t.qa.hop_hint;
    j["policy"] = t.policy_tag;
    j["max_steps"] = t.max_steps;
    j["steps"] = json::array();
    for (const auto& s : t.steps) {
        j["steps"].push_back({{"observation", s.observation},
                              {"reasoning", s.reasoning},
                              {"action", s.action},
                              {"post", s.post_summary}});
    }
    j["final_answer"] = t.final_answer;
    j["final_status"] = t.final_status;
    j["correct"] = t.correct;
    j["refined"] = t.refined;
    j["annotation"] = t.annotation;
    j["triples_retrieved"] = t.triples_retrieved;
    return j;
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.qa.id = j.at("id").get<std::string>();
    t.qa.question = j.at("question").get<std::string>();
    t.qa.topic_entities = j.at("topic_entities").get<std::vector<std::string>>();
    t.qa.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
    if (j.contains("hop") && j["hop"].is_number_integer()) t.qa.hop_hint = j["hop"].get<int>();
    t.policy_tag = j.at("policy").get<std::string>();
    t.max_steps = j.at("max_steps").get<std::size_t>();
    for (const auto& s : j.at("steps")) {
        TrajectoryStep step;
        step.observation = s.at("observation").get<std::string>();
        step.reasoning = s.at("reasoning").get<std::string>();
        step.action = s.at("action").get<std::string>();
        step.post_summary = s.at("post").get<std::string>();
        t.steps.push_back(std::move(step));
    }
    t.final_answer = j.at("final_answer").get<std::vector<std::string>>();
    t.final_status = j.at("final_status").get<std::string>();
    t.correct = j.at("correct").get<bool>();
    t.refined = j.at("refined").get<bool>();
    t.annotation = j.at("annotation").get<std::string>();
    t.triples_retrieved = j.at("triples_retrieved").get<std::size_t>();
    return t;
}

}  // namespace

std::size_t dump_trajectories(const std::vector<Trajectory>& trajectories,
                              std::ostream& sink) {
    std::size_t written = 0;
    for (const Trajectory& t : trajectories) {
        write_line(sink, trajectory_to_json(t), written);
        ++written;
    }
    sink.flush();
    return written;
}

std::vector<Trajectory> load_trajectories(std::istream& in) {
    std::vector<Trajectory> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw SynthesisError("trajectory line " + std::to_string(line_no) +
                                 ": invalid JSON");
        }
        try {
            out.push_back(trajectory_from_json(j));
        } catch (const json::exception& e) {
            throw SynthesisError("trajectory line " + std::to_string(line_no) + ": " +
                                 e.what());
        }
    }
    return out;
}

std::vector<Trajectory> load_trajectories_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SynthesisError("cannot open " + path);
    return load_trajectories(in);
}

}  // namespace graphwalk
