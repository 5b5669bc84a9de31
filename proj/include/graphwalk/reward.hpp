#pragma once

#include <map>
#include <string>
#include <vector>

#include "graphwalk/env.hpp"
#include "graphwalk/eval.hpp"
#include "graphwalk/synthesis.hpp"

namespace graphwalk {

class RewardError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RewardedStep {
    std::size_t step_index = 0;
    double process_reward = 0.0;
    std::map<std::string, double> components;
    std::string reference_action;  // empty beyond the reference length
};

/// Per-step process reward in [0,1]: 0 on action-type mismatch; explores
/// score 1 only on the same entity; chooses score the set-F1 of the two
/// selections; matching finishes score 1.
double process_reward(const Action& taken, const Action& reference);

/// 1 iff the matcher accepts the prediction; matcher failures propagate.
int outcome_reward(const std::vector<std::string>& final_answer,
                   const std::vector<std::string>& gold, const AnswerMatcher& matcher);

/// Scores every step of t against the refined reference by index; steps
/// beyond the reference score 0. The outcome reward rides on the final
/// step's components. Throws RewardError when the qa ids differ.
std::vector<RewardedStep> label_trajectory(const KnowledgeGraph& g, const Trajectory& t,
                                           const Trajectory& reference,
                                           const AnswerMatcher& matcher);

}  // namespace graphwalk
