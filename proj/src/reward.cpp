#include "graphwalk/reward.hpp"

#include <algorithm>

namespace graphwalk {

namespace {

double choose_f1(const std::vector<Triple>& a, const std::vector<Triple>& b) {
    std::vector<Triple> sa(a), sb(b);
    std::sort(sa.begin(), sa.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    std::sort(sb.begin(), sb.end());
    sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    if (sa.empty() || sb.empty()) return 0.0;
    std::vector<Triple> inter;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::back_inserter(inter));
    // 2PR/(P+R) reduces to 2|∩|/(|A|+|B|).
    return 2.0 * static_cast<double>(inter.size()) /
           static_cast<double>(sa.size() + sb.size());
}

}  // namespace

double process_reward(const Action& taken, const Action& reference) {
    if (taken.type != reference.type) return 0.0;
    switch (taken.type) {
        case ActionType::explore_entity:
            if (taken.target && reference.target) {
                return *taken.target == *reference.target ? 1.0 : 0.0;
            }
            return 0.0;
        case ActionType::choose_triples:
            return choose_f1(taken.selection, reference.selection);
        case ActionType::finish:
            return 1.0;
    }
    return 0.0;
}

int outcome_reward(const std::vector<std::string>& final_answer,
                   const std::vector<std::string>& gold, const AnswerMatcher& matcher) {
    if (gold.empty()) throw RewardError("outcome_reward requires nonempty gold answers");
    return matcher.matches(final_answer, gold) ? 1 : 0;
}

std::vector<RewardedStep> label_trajectory(const KnowledgeGraph& g, const Trajectory& t,
                                           const Trajectory& reference,
                                           const AnswerMatcher& matcher) {
    if (t.qa.id != reference.qa.id) {
        throw RewardError("trajectory qa id \"" + t.qa.id +
                          "\" does not match reference qa id \"" + reference.qa.id + "\"");
    }

    // Materialize both action sequences; CHOOSE indices are window-relative
    // so the raw strings cannot be compared directly.
    auto taken_state = replay_trajectory(g, t);
    auto ref_state = replay_trajectory(g, reference);
    const auto& taken_actions = taken_state.history;
    const auto& ref_actions = ref_state.history;

    std::vector<RewardedStep> out;
    out.reserve(taken_actions.size());
    for (std::size_t i = 0; i < taken_actions.size(); ++i) {
        RewardedStep step;
        step.step_index = i;
        if (i < ref_actions.size()) {
            const Action& taken = taken_actions[i].action;
            const Action& ref = ref_actions[i].action;
            step.process_reward = process_reward(taken, ref);
            step.components["type_match"] = taken.type == ref.type ? 1.0 : 0.0;
            if (taken.type == ActionType::choose_triples &&
                ref.type == ActionType::choose_triples) {
                step.components["choose_f1"] = step.process_reward;
            }
            step.reference_action = i < reference.steps.size() ? reference.steps[i].action : "";
        } else {
            step.process_reward = 0.0;  // redundancy beyond the reference
            step.components["overflow"] = 1.0;
        }
        if (i + 1 == taken_actions.size()) {
            step.components["outcome_reward"] = static_cast<double>(
                outcome_reward(t.final_answer, t.qa.gold_answers, matcher));
        }
        out.push_back(std::move(step));
    }
    return out;
}

}  // namespace graphwalk
