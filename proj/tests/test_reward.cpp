#include <doctest.h>

#include <random>

#include "graphwalk/reward.hpp"
#include "graphwalk/synthesis.hpp"
#include "helpers.hpp"

using namespace graphwalk;
using namespace graphwalk::testing;

namespace {

QAInstance qa_m1() {
    QAInstance qa;
    qa.id = "m1";
    qa.question = "who directed Inception";
    qa.topic_entities = {"Inception"};
    qa.gold_answers = {"Christopher Nolan"};
    return qa;
}

Trajectory run_script(const KnowledgeGraph& g, const QAInstance& qa,
                      std::vector<Action> actions) {
    ScriptedPolicy policy(std::move(actions));
    SynthesisConfig config;
    return run_episode(g, qa, policy, config);
}

}  // namespace

TEST_SUITE("reward") {

TEST_CASE("process_reward per action type") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    EntityId inception = *g.resolve_entity("Inception");
    EntityId nolan = *g.resolve_entity("Christopher Nolan");
    Triple t1 = find_triple(g, "Inception", "directed_by", "Christopher Nolan");
    Triple t2 = find_triple(g, "Inception", "release_year", "2010");

    SUBCASE("matching explores score one") {
        CHECK(process_reward(Action::explore(inception), Action::explore(inception)) == 1.0);
        CHECK(process_reward(Action::explore(inception), Action::explore(nolan)) == 0.0);
    }
    SUBCASE("choose scores the selection F1") {
        CHECK(process_reward(Action::choose({t1, t2}), Action::choose({t1})) ==
              doctest::Approx(2.0 / 3.0));
        CHECK(process_reward(Action::choose({t1}), Action::choose({t1})) == 1.0);
        CHECK(process_reward(Action::choose({t2}), Action::choose({t1})) == 0.0);
    }
    SUBCASE("type mismatches score zero") {
        CHECK(process_reward(Action::finish(), Action::explore(inception)) == 0.0);
        CHECK(process_reward(Action::explore(inception), Action::choose({t1})) == 0.0);
        CHECK(process_reward(Action::finish(), Action::finish()) == 1.0);
    }
    SUBCASE("choose F1 is symmetric") {
        std::mt19937_64 rng(5);
        std::vector<Triple> all = g.triples();
        for (int i = 0; i < 50; ++i) {
            std::vector<Triple> a, b;
            for (const Triple& t : all) {
                if (rng() % 3 == 0) a.push_back(t);
                if (rng() % 3 == 0) b.push_back(t);
            }
            if (a.empty()) a.push_back(all[0]);
            if (b.empty()) b.push_back(all[1]);
            CHECK(process_reward(Action::choose(a), Action::choose(b)) ==
                  process_reward(Action::choose(b), Action::choose(a)));
        }
    }
    SUBCASE("rewards stay in the unit interval under fuzzing") {
        std::mt19937_64 rng(6);
        std::vector<Triple> all = g.triples();
        auto random_action = [&]() -> Action {
            switch (rng() % 3) {
                case 0:
                    return Action::explore(EntityId{static_cast<std::uint32_t>(
                        rng() % g.entity_count())});
                case 1: {
                    std::vector<Triple> sel;
                    for (const Triple& t : all) {
                        if (rng() % 4 == 0) sel.push_back(t);
                    }
                    if (sel.empty()) sel.push_back(all[rng() % all.size()]);
                    return Action::choose(sel);
                }
                default:
                    return Action::finish();
            }
        };
        for (int i = 0; i < 2000; ++i) {
            double r = process_reward(random_action(), random_action());
            REQUIRE(r >= 0.0);
            REQUIRE(r <= 1.0);
        }
    }
}

TEST_CASE("outcome_reward follows the shared matcher") {
    AnswerMatcher matcher;
    CHECK(outcome_reward({"Christopher Nolan"}, {"Christopher Nolan"}, matcher) == 1);
    CHECK(outcome_reward({"christopher nolan"}, {"Christopher Nolan"}, matcher) == 1);
    CHECK(outcome_reward({}, {"Christopher Nolan"}, matcher) == 0);
    CHECK_THROWS_AS(outcome_reward({"x"}, {}, matcher), RewardError);

    AnswerMatcher strict;
    strict.mode = AnswerMatcher::Mode::strict_equality;
    CHECK(outcome_reward({"Christopher Nolan", "Extra"}, {"Christopher Nolan"}, matcher) ==
          1);
    CHECK(outcome_reward({"Christopher Nolan", "Extra"}, {"Christopher Nolan"}, strict) == 0);
}

TEST_CASE("label_trajectory aligns steps by index") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    Triple inc_cn = find_triple(g, "Inception", "directed_by", "Christopher Nolan");
    AnswerMatcher matcher;

    Trajectory reference = run_script(
        g, qa_m1(),
        {Action::explore(*g.resolve_entity("Inception")), Action::choose({inc_cn}),
         Action::finish()});
    REQUIRE(reference.correct);

    SUBCASE("the reference against itself scores all ones") {
        auto steps = label_trajectory(g, reference, reference, matcher);
        REQUIRE(steps.size() == 3);
        for (const auto& s : steps) CHECK(s.process_reward == 1.0);
        CHECK(steps.back().components.at("outcome_reward") == 1.0);
        CHECK(steps[0].reference_action == "EXPLORE[\"Inception\"]");
    }
    SUBCASE("a wandering prefix shifts every aligned step to zero") {
        Trajectory wandering = run_script(
            g, qa_m1(),
            {Action::explore(*g.resolve_entity("Interstellar")),
             Action::explore(*g.resolve_entity("Inception")), Action::choose({inc_cn}),
             Action::finish()});
        REQUIRE(wandering.correct);
        auto steps = label_trajectory(g, wandering, reference, matcher);
        REQUIRE(steps.size() == 4);
        CHECK(steps[0].process_reward == 0.0);  // explored the wrong entity
        CHECK(steps[1].process_reward == 0.0);  // explore vs choose
        CHECK(steps[2].process_reward == 0.0);  // choose vs finish
        CHECK(steps[3].process_reward == 0.0);  // overflow
        CHECK(steps[3].components.count("overflow") == 1);
        CHECK(steps[3].components.at("outcome_reward") == 1.0);
        CHECK(steps[3].reference_action.empty());
    }
    SUBCASE("shorter trajectories emit exactly their own length") {
        Trajectory brief = run_script(g, qa_m1(),
                                      {Action::explore(*g.resolve_entity("Inception")),
                                       Action::finish()});
        auto steps = label_trajectory(g, brief, reference, matcher);
        REQUIRE(steps.size() == 2);
        CHECK(steps[0].process_reward == 1.0);
        CHECK(steps[1].process_reward == 0.0);  // finish vs choose
        CHECK(steps[1].components.at("outcome_reward") == 0.0);
    }
    SUBCASE("mismatched qa ids are an error") {
        Trajectory other = reference;
        other.qa.id = "zzz";
        CHECK_THROWS_AS(label_trajectory(g, other, reference, matcher), RewardError);
    }
}

TEST_CASE("labeling a refined reference against itself is all ones") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    Triple mem_gp = find_triple(g, "Memento", "starred_actors", "Guy Pearce");
    Triple mem_cn = find_triple(g, "Memento", "directed_by", "Christopher Nolan");
    QAInstance qa;
    qa.id = "m6";
    qa.question = "who directed the movie starring Guy Pearce";
    qa.topic_entities = {"Guy Pearce"};
    qa.gold_answers = {"Christopher Nolan"};

    Trajectory t = run_script(g, qa,
                              {Action::explore(*g.resolve_entity("Guy Pearce")),
                               Action::choose({mem_gp}),
                               Action::explore(*g.resolve_entity("Memento")),
                               Action::choose({mem_cn}), Action::finish()});
    Trajectory refined = refine_trajectory(g, t);
    AnswerMatcher matcher;
    auto steps = label_trajectory(g, refined, refined, matcher);
    REQUIRE(steps.size() == 5);
    for (const auto& s : steps) CHECK(s.process_reward == 1.0);
}

}  // TEST_SUITE
