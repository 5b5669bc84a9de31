#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "graphwalk/chat_client.hpp"
#include "graphwalk/env.hpp"
#include "graphwalk/kg.hpp"

namespace graphwalk {

class ActionParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PolicyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A policy's decision for one step: free-form reasoning, the action, and
/// the verbatim policy output it was parsed from.
struct ActionDecision {
    std::string reasoning;
    Action action;
    std::string raw_response;
    std::size_t retries_used = 0;
};

enum class PolicyKind { scripted, heuristic, random, remote };

struct PolicyConfig {
    PolicyKind kind = PolicyKind::heuristic;
    std::uint64_t seed = 0;
    double overlap_threshold = 0.25;  // heuristic relevance cutoff
    RemoteConfig remote;              // remote kind only
};

/// Parses the last grammar match in `text` against the given window order:
///   EXPLORE["<entity name>"]   name resolved via resolve_entity
///   CHOOSE[i1,i2,...]          1-based indices into the window listing
///   FINISH
/// Surrounding prose is tolerated. Throws ActionParseError when nothing
/// matches or an index is out of range.
Action parse_action(const std::string& text, std::span<const Triple> window,
                    const KnowledgeGraph& g);

/// Inverse of parse_action for actions whose CHOOSE triples are present in
/// the window. Throws ActionParseError otherwise.
std::string serialize_action(const Action& action, std::span<const Triple> window,
                             const KnowledgeGraph& g);

/// Token-overlap relevance filter over the window. Each triple is scored
/// by |Q ∩ T| / (|Q| + |T|) where Q are the query's content tokens and T
/// the tokens of the rendered triple; triples scoring >= threshold are
/// selected, and when none clears it the single top-scoring triple wins
/// (ties broken by rendered triple text).
std::vector<Triple> heuristic_choose_filter(const std::string& query_text,
                                            std::span<const Triple> window,
                                            double threshold, const KnowledgeGraph& g);

/// Overlap score described above, exposed for tests.
double overlap_score(const std::string& query_text, const std::string& triple_text);

class Policy {
public:
    virtual ~Policy() = default;

    /// Decide the next action for a running episode. `window` mirrors the
    /// observation's window order so CHOOSE decisions can carry real
    /// triples; deterministic policies consult only the observation text
    /// (plus their seed).
    virtual ActionDecision decide(const Observation& obs, std::span<const Triple> window,
                                  const KnowledgeGraph& g) = 0;

    virtual std::string tag() const = 0;
};

/// Replays a fixed action list; errors when exhausted.
class ScriptedPolicy : public Policy {
public:
    explicit ScriptedPolicy(std::vector<Action> actions);
    ActionDecision decide(const Observation& obs, std::span<const Triple> window,
                          const KnowledgeGraph& g) override;
    std::string tag() const override { return "scripted"; }

private:
    std::vector<Action> actions_;
    std::size_t cursor_ = 0;
};

/// Deterministic rule policy: choose relevant window triples, otherwise
/// explore the first topic entity that is not yet a subgraph endpoint,
/// otherwise finish.
class HeuristicPolicy : public Policy {
public:
    explicit HeuristicPolicy(double overlap_threshold = 0.25, std::uint64_t seed = 0);
    ActionDecision decide(const Observation& obs, std::span<const Triple> window,
                          const KnowledgeGraph& g) override;
    std::string tag() const override;

private:
    double threshold_;
    std::uint64_t seed_;
};

/// Seeded random walker used for synthesis diversity.
class RandomPolicy : public Policy {
public:
    explicit RandomPolicy(std::uint64_t seed);
    ActionDecision decide(const Observation& obs, std::span<const Triple> window,
                          const KnowledgeGraph& g) override;
    std::string tag() const override;

private:
    std::uint64_t seed_;
    std::mt19937_64 rng_;
};

/// Remote LLM policy over the chat wire protocol. Parse failures are
/// re-prompted with the parse error appended, up to max_retries.
class RemotePolicy : public Policy {
public:
    explicit RemotePolicy(RemoteConfig config, std::unique_ptr<ChatTransport> transport = nullptr);
    ActionDecision decide(const Observation& obs, std::span<const Triple> window,
                          const KnowledgeGraph& g) override;
    std::string tag() const override;

private:
    ChatClient client_;
};

std::unique_ptr<Policy> make_policy(const PolicyConfig& config);

/// The shipped system instruction for remote decision making.
const std::string& policy_system_prompt();

/// Observation fields the deterministic policies recover from the rendered
/// text. Parsing the render (rather than peeking at the state) keeps them
/// pure functions of the observation.
struct ParsedObservation {
    std::string question;
    std::vector<std::string> topic_entities;
    std::vector<std::string> subgraph_lines;   // rendered "(s | r | o)" forms
    std::vector<std::string> window_lines;
    std::size_t window_total = 0;
    std::size_t subgraph_total = 0;
};

ParsedObservation parse_observation_text(const std::string& text);

}  // namespace graphwalk
