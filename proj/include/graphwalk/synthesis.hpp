#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "graphwalk/env.hpp"
#include "graphwalk/eval.hpp"
#include "graphwalk/kg.hpp"
#include "graphwalk/policy.hpp"

namespace graphwalk {

class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ReplayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QAInstance {
    std::string id;
    std::string question;
    std::vector<std::string> topic_entities;
    std::vector<std::string> gold_answers;
    std::optional<int> hop_hint;
};

struct TrajectoryStep {
    std::string observation;  // rendered state BEFORE the action
    std::string reasoning;
    std::string action;       // grammar serialization, window-relative
    std::string post_summary;
};

struct Trajectory {
    QAInstance qa;
    std::vector<TrajectoryStep> steps;
    std::vector<std::string> final_answer;  // sorted
    std::string final_status;               // "finished" | "truncated"
    bool correct = false;
    bool refined = false;
    std::string policy_tag;
    std::string annotation;
    std::size_t triples_retrieved = 0;
    std::size_t max_steps = EpisodeConfig{}.max_steps;
};

/// One training sample: the observation shown to the policy and the action
/// it should produce.
struct DecisionRecord {
    std::string qa_id;
    std::size_t step_index = 0;
    std::string observation_text;
    std::string target_action;
    std::string reasoning;
    std::string reference_flag;  // "from_policy" | "from_refinement"
};

struct SynthesisConfig {
    std::size_t samples_per_question = 1;
    bool keep_only_correct = true;
    EpisodeConfig episode;
    std::size_t refine_max_hops = kDefaultMaxHops;
    AnswerMatcher matcher;
};

struct SynthesisResult {
    std::vector<Trajectory> kept;
    std::size_t attempted = 0;
    std::size_t failed_questions = 0;
    std::vector<std::string> failures;  // "<qa id>: <reason>"
};

/// Builds the policy used for one (question, sample) episode.
using PolicyFactory =
    std::function<std::unique_ptr<Policy>(const QAInstance&, std::size_t sample_index)>;

/// Runs episodes for every question, marks correctness via config.matcher,
/// and filters when keep_only_correct is set. A policy failure marks the
/// question failed and the run continues; every question failing is an
/// error.
SynthesisResult generate_trajectories(const KnowledgeGraph& g,
                                      const std::vector<QAInstance>& qa_set,
                                      const PolicyFactory& make_policy,
                                      const SynthesisConfig& config);

/// Runs a single episode with the given policy and returns its trajectory.
Trajectory run_episode(const KnowledgeGraph& g, const QAInstance& qa, Policy& policy,
                       const SynthesisConfig& config);

/// Replays a trajectory's actions from the initial state. When
/// `validate_observations` is set, each stored observation must match the
/// replay byte for byte. Throws ReplayError naming the diverging step.
EpisodeState replay_trajectory(const KnowledgeGraph& g, const Trajectory& t,
                               bool validate_observations = false);

/// Shortest-trajectory refinement: rebuilds the action sequence from graph
/// shortest paths to the trajectory's answer entities, preserving the final
/// answer set exactly and never exceeding the original accepted-action
/// count. When no usable path exists the trajectory is returned unchanged
/// with an explanatory annotation. Requires t.correct.
Trajectory refine_trajectory(const KnowledgeGraph& g, const Trajectory& t,
                             std::size_t max_hops = kDefaultMaxHops);

/// One DecisionRecord per accepted action, pairing the observation before
/// the action with the action itself. Replays to validate.
std::vector<DecisionRecord> decompose(const KnowledgeGraph& g, const Trajectory& t);

/// Line-delimited JSON emitters; bytes are deterministic for equal inputs.
std::size_t emit_sft(const std::vector<DecisionRecord>& records, std::ostream& sink);

struct RlRecord {
    std::string qa_id;
    std::size_t step = 0;
    std::string observation;
    std::string action;
    double process_reward = 0.0;
    int outcome_reward = 0;
    std::string reference_action;
};

std::size_t emit_rl(const std::vector<RlRecord>& records, std::ostream& sink);

/// JSONL round-trips for QA inputs and trajectory dumps.
std::vector<QAInstance> load_qa_jsonl(std::istream& in);
std::vector<QAInstance> load_qa_file(const std::string& path);
std::size_t dump_trajectories(const std::vector<Trajectory>& trajectories, std::ostream& sink);
std::vector<Trajectory> load_trajectories(std::istream& in);
std::vector<Trajectory> load_trajectories_file(const std::string& path);

std::vector<DecisionRecord> parse_sft_jsonl(std::istream& in);
std::vector<RlRecord> parse_rl_jsonl(std::istream& in);

}  // namespace graphwalk
