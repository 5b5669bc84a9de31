#include <fstream>
#include <iostream>
#include <unordered_map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "graphwalk/env.hpp"
#include "graphwalk/eval.hpp"
#include "graphwalk/kg.hpp"
#include "graphwalk/policy.hpp"
#include "graphwalk/reward.hpp"
#include "graphwalk/service.hpp"
#include "graphwalk/synthesis.hpp"

namespace {

using namespace graphwalk;
using nlohmann::json;

KbFormat parse_format(const std::string& name) {
    if (name == "metaqa-pipe") return KbFormat::metaqa_pipe;
    if (name == "tsv") return KbFormat::tsv;
    throw std::runtime_error("unknown KB format: " + name + " (metaqa-pipe or tsv)");
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& qa_id, std::size_t sample) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the qa id
    for (unsigned char c : qa_id) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return seed ^ h ^ (0x9e3779b97f4a7c15ull * (sample + 1));
}

struct GlobalFlags {
    std::string kb;
    std::string format = "metaqa-pipe";
    std::uint64_t seed = 0;
    std::size_t max_steps = EpisodeConfig{}.max_steps;
    std::size_t max_rejections = EpisodeConfig{}.max_consecutive_rejections;
    std::size_t max_window_lines = EpisodeConfig{}.max_window_lines;
    std::string out;
    std::string endpoint;
    std::string model;
    std::string auth_env;
    double temperature = 0.0;
    int max_retries = 2;
    double threshold = 0.25;
};

KnowledgeGraph load_graph(const GlobalFlags& flags) {
    if (flags.kb.empty()) throw std::runtime_error("--kb is required");
    return KnowledgeGraph::load_file(flags.kb, parse_format(flags.format));
}

PolicyFactory make_policy_factory(const std::string& kind, const GlobalFlags& flags) {
    if (kind == "heuristic") {
        return [&flags](const QAInstance&, std::size_t) {
            return std::make_unique<HeuristicPolicy>(flags.threshold, flags.seed);
        };
    }
    if (kind == "random") {
        return [&flags](const QAInstance& qa, std::size_t sample) {
            return std::make_unique<RandomPolicy>(mix_seed(flags.seed, qa.id, sample));
        };
    }
    if (kind == "remote") {
        if (flags.endpoint.empty() || flags.model.empty()) {
            throw std::runtime_error("remote policy requires --endpoint and --model");
        }
        RemoteConfig remote;
        remote.endpoint = flags.endpoint;
        remote.model = flags.model;
        remote.auth_env = flags.auth_env;
        remote.temperature = flags.temperature;
        remote.max_retries = flags.max_retries;
        return [remote](const QAInstance&, std::size_t) {
            return std::make_unique<RemotePolicy>(remote);
        };
    }
    throw std::runtime_error("unknown policy kind: " + kind +
                             " (heuristic, random, or remote)");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    return out;
}

void write_trajectories(const std::vector<Trajectory>& trajectories,
                        const std::string& path) {
    std::ofstream out = open_out(path);
    std::size_t n = dump_trajectories(trajectories, out);
    std::cout << "wrote " << n << " trajectories to " << path << "\n";
}

int cmd_load_kb(const GlobalFlags& flags) {
    KnowledgeGraph g = load_graph(flags);
    std::cout << "entities: " << g.entity_count() << "\n"
              << "relations: " << g.relation_count() << "\n"
              << "triples: " << g.triple_count() << "\n";
    return 0;
}

int cmd_run(const GlobalFlags& flags, const std::string& questions,
            const std::string& policy_kind, std::size_t samples, bool keep_only_correct,
            bool refine, const std::string& sft_out) {
    KnowledgeGraph g = load_graph(flags);
    auto qa_set = load_qa_file(questions);

    SynthesisConfig config;
    config.samples_per_question = samples;
    config.keep_only_correct = keep_only_correct;
    config.episode.max_steps = flags.max_steps;
    config.episode.max_consecutive_rejections = flags.max_rejections;
    config.episode.max_window_lines = flags.max_window_lines;

    SynthesisResult result =
        generate_trajectories(g, qa_set, make_policy_factory(policy_kind, flags), config);
    std::cerr << "attempted " << result.attempted << " episodes, kept "
              << result.kept.size() << ", failed questions " << result.failed_questions
              << "\n";
    for (const auto& f : result.failures) std::cerr << "  failure: " << f << "\n";

    std::vector<Trajectory> output = std::move(result.kept);
    if (refine) {
        std::vector<Trajectory> refined;
        for (const Trajectory& t : output) {
            refined.push_back(t.correct ? refine_trajectory(g, t) : t);
        }
        output = std::move(refined);
    }
    if (!sft_out.empty()) {
        std::vector<DecisionRecord> records;
        for (const Trajectory& t : output) {
            auto r = decompose(g, t);
            records.insert(records.end(), r.begin(), r.end());
        }
        std::ofstream out = open_out(sft_out);
        std::cout << "wrote " << emit_sft(records, out) << " SFT records to " << sft_out
                  << "\n";
    }
    if (flags.out.empty()) throw std::runtime_error("--out is required");
    write_trajectories(output, flags.out);
    return 0;
}

int cmd_refine(const GlobalFlags& flags, const std::string& in_path) {
    KnowledgeGraph g = load_graph(flags);
    auto trajectories = load_trajectories_file(in_path);
    std::vector<Trajectory> refined;
    std::size_t skipped = 0;
    for (const Trajectory& t : trajectories) {
        if (!t.correct) {
            ++skipped;
            continue;
        }
        refined.push_back(refine_trajectory(g, t));
    }
    if (skipped) std::cerr << "skipped " << skipped << " incorrect trajectories\n";
    if (flags.out.empty()) throw std::runtime_error("--out is required");
    write_trajectories(refined, flags.out);
    return 0;
}

int cmd_rewards(const GlobalFlags& flags, const std::string& traj_path,
                const std::string& refs_path, bool strict) {
    KnowledgeGraph g = load_graph(flags);
    auto trajectories = load_trajectories_file(traj_path);
    auto refs = load_trajectories_file(refs_path);

    std::unordered_map<std::string, const Trajectory*> ref_by_id;
    for (const Trajectory& r : refs) ref_by_id.emplace(r.qa.id, &r);

    AnswerMatcher matcher;
    matcher.mode = strict ? AnswerMatcher::Mode::strict_equality
                          : AnswerMatcher::Mode::normalized_intersection;

    std::vector<RlRecord> records;
    std::size_t unmatched = 0;
    for (const Trajectory& t : trajectories) {
        auto it = ref_by_id.find(t.qa.id);
        if (it == ref_by_id.end()) {
            ++unmatched;
            continue;
        }
        auto rewarded = label_trajectory(g, t, *it->second, matcher);
        int outcome = static_cast<int>(rewarded.empty() ? 0
                                       : rewarded.back().components.count("outcome_reward")
                                           ? rewarded.back().components.at("outcome_reward")
                                           : 0);
        for (std::size_t i = 0; i < rewarded.size(); ++i) {
            RlRecord r;
            r.qa_id = t.qa.id;
            r.step = i;
            r.observation = t.steps[i].observation;
            r.action = t.steps[i].action;
            r.process_reward = rewarded[i].process_reward;
            r.outcome_reward = outcome;
            r.reference_action = rewarded[i].reference_action;
            records.push_back(std::move(r));
        }
    }
    if (unmatched) std::cerr << unmatched << " trajectories had no reference\n";
    if (flags.out.empty()) throw std::runtime_error("--out is required");
    std::ofstream out = open_out(flags.out);
    std::cout << "wrote " << emit_rl(records, out) << " RL records to " << flags.out << "\n";
    return 0;
}

int cmd_eval(const GlobalFlags& flags, const std::string& pred_path,
             const std::string& gold_path, const std::string& traj_path, bool strict,
             const std::string& judge) {
    std::vector<EvalRecord> records;

    std::unordered_map<std::string, QAInstance> gold_by_id;
    std::vector<std::string> gold_order;
    if (!gold_path.empty()) {
        for (auto& qa : load_qa_file(gold_path)) {
            gold_order.push_back(qa.id);
            gold_by_id.emplace(qa.id, std::move(qa));
        }
    }

    if (!traj_path.empty()) {
        for (const Trajectory& t : load_trajectories_file(traj_path)) {
            EvalRecord r;
            r.qa_id = t.qa.id;
            r.pred = t.final_answer;
            auto it = gold_by_id.find(t.qa.id);
            r.gold = it != gold_by_id.end() ? it->second.gold_answers : t.qa.gold_answers;
            r.hop_hint = it != gold_by_id.end() ? it->second.hop_hint : t.qa.hop_hint;
            r.triples_retrieved = t.triples_retrieved;
            records.push_back(std::move(r));
        }
    } else if (!pred_path.empty()) {
        if (gold_by_id.empty()) throw std::runtime_error("--pred requires --gold");
        std::ifstream in(pred_path);
        if (!in) throw std::runtime_error("cannot open " + pred_path);
        std::unordered_map<std::string, std::vector<std::string>> preds;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            preds[j.at("id").get<std::string>()] =
                j.at("answers").get<std::vector<std::string>>();
        }
        for (const auto& id : gold_order) {
            const QAInstance& qa = gold_by_id.at(id);
            EvalRecord r;
            r.qa_id = id;
            auto it = preds.find(id);
            if (it != preds.end()) r.pred = it->second;
            r.gold = qa.gold_answers;
            r.hop_hint = qa.hop_hint;
            records.push_back(std::move(r));
        }
    } else {
        throw std::runtime_error("eval requires --traj or --pred");
    }

    AnswerMatcher matcher;
    if (strict) matcher.mode = AnswerMatcher::Mode::strict_equality;
    std::unique_ptr<ChatClient> judge_client;
    if (judge == "remote") {
        if (flags.endpoint.empty() || flags.model.empty()) {
            throw std::runtime_error("--judge remote requires --endpoint and --model");
        }
        RemoteConfig remote;
        remote.endpoint = flags.endpoint;
        remote.model = flags.model;
        remote.auth_env = flags.auth_env;
        remote.max_retries = flags.max_retries;
        judge_client = std::make_unique<ChatClient>(remote);
        matcher.mode = AnswerMatcher::Mode::remote_judge;
        matcher.judge = judge_client.get();
    } else if (judge != "normalized") {
        throw std::runtime_error("--judge must be normalized or remote");
    }

    EvalSummary summary = summarize(records, matcher);
    std::cout << render_report(summary);
    if (!flags.out.empty()) {
        std::ofstream out = open_out(flags.out);
        out << report_json(summary) << "\n";
    }
    return 0;
}

int cmd_serve(const GlobalFlags& flags, int port, const std::string& refs_path,
              std::size_t idle_timeout_seconds) {
    KnowledgeGraph g = load_graph(flags);
    ServiceConfig config;
    config.port = port;
    config.episode.max_steps = flags.max_steps;
    config.episode.max_consecutive_rejections = flags.max_rejections;
    config.episode.max_window_lines = flags.max_window_lines;
    config.idle_timeout = std::chrono::seconds(idle_timeout_seconds);
    EpisodeService service(g, config);
    if (!refs_path.empty()) {
        service.load_references(load_trajectories_file(refs_path));
    }
    std::cerr << "serving on port " << port << "\n";
    if (!service.run()) {
        throw std::runtime_error("failed to bind port " + std::to_string(port));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive knowledge-graph retrieval engine"};
    app.require_subcommand(1);
    // Global flags may appear after the subcommand (run --kb ... --seed ...).
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--kb", flags.kb, "knowledge base file");
    app.add_option("--format", flags.format, "KB format: metaqa-pipe or tsv");
    app.add_option("--seed", flags.seed, "RNG seed");
    app.add_option("--max-steps", flags.max_steps, "episode step budget");
    app.add_option("--max-rejections", flags.max_rejections,
                   "consecutive rejections before truncation");
    app.add_option("--max-window-lines", flags.max_window_lines,
                   "window lines rendered per observation");
    app.add_option("--out", flags.out, "output file");
    app.add_option("--endpoint", flags.endpoint, "remote chat endpoint URL");
    app.add_option("--model", flags.model, "remote model name");
    app.add_option("--auth-env", flags.auth_env,
                   "environment variable holding the bearer token");
    app.add_option("--temperature", flags.temperature, "remote sampling temperature");
    app.add_option("--max-retries", flags.max_retries, "remote retry budget");
    app.add_option("--threshold", flags.threshold, "heuristic overlap threshold");

    auto* load_cmd = app.add_subcommand("load-kb", "validate a KB file and print stats");

    std::string questions, policy_kind = "heuristic", sft_out;
    std::size_t samples = 1;
    bool do_refine = false, keep_incorrect = false;
    auto* run_cmd = app.add_subcommand("run", "run episodes over a question file");
    run_cmd->add_option("--questions", questions, "QA JSONL file")->required();
    run_cmd->add_option("--policy", policy_kind, "heuristic, random, or remote");
    run_cmd->add_option("--samples", samples, "episodes per question");

    auto* synth_cmd =
        app.add_subcommand("synthesize", "generate trajectories and keep correct ones");
    synth_cmd->add_option("--questions", questions, "QA JSONL file")->required();
    synth_cmd->add_option("--policy", policy_kind, "heuristic, random, or remote");
    synth_cmd->add_option("--samples", samples, "episodes per question");
    synth_cmd->add_flag("--keep-incorrect", keep_incorrect, "keep incorrect trajectories too");
    synth_cmd->add_flag("--refine", do_refine, "refine kept trajectories to shortest form");
    synth_cmd->add_option("--sft", sft_out, "also emit SFT records to this file");

    std::string in_path;
    auto* refine_cmd = app.add_subcommand("refine", "shortest-path refinement of a dump");
    refine_cmd->add_option("--in", in_path, "trajectory dump")->required();

    std::string traj_path, refs_path;
    bool strict = false;
    auto* rewards_cmd = app.add_subcommand("rewards", "label RL data against references");
    rewards_cmd->add_option("--traj", traj_path, "trajectory dump")->required();
    rewards_cmd->add_option("--refs", refs_path, "refined reference dump")->required();
    rewards_cmd->add_flag("--strict-equality", strict, "strict answer-set equality");

    std::string pred_path, gold_path, eval_traj, judge = "normalized";
    auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold answers");
    eval_cmd->add_option("--pred", pred_path, "prediction JSONL ({id, answers})");
    eval_cmd->add_option("--gold", gold_path, "gold QA JSONL");
    eval_cmd->add_option("--traj", eval_traj, "trajectory dump to score");
    eval_cmd->add_flag("--strict-equality", strict, "strict answer-set equality");
    eval_cmd->add_option("--judge", judge, "normalized or remote");

    int port = 8080;
    std::size_t idle_timeout = 30 * 60;
    std::string serve_refs;
    auto* serve_cmd = app.add_subcommand("serve", "start the HTTP episode service");
    serve_cmd->add_option("--port", port, "listen port");
    serve_cmd->add_option("--refs", serve_refs, "refined references for per-step rewards");
    serve_cmd->add_option("--idle-timeout", idle_timeout, "episode eviction timeout, seconds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (load_cmd->parsed()) return cmd_load_kb(flags);
        if (run_cmd->parsed()) {
            return cmd_run(flags, questions, policy_kind, samples,
                           /*keep_only_correct=*/false, /*refine=*/false, "");
        }
        if (synth_cmd->parsed()) {
            return cmd_run(flags, questions, policy_kind, samples, !keep_incorrect,
                           do_refine, sft_out);
        }
        if (refine_cmd->parsed()) return cmd_refine(flags, in_path);
        if (rewards_cmd->parsed()) return cmd_rewards(flags, traj_path, refs_path, strict);
        if (eval_cmd->parsed()) {
            return cmd_eval(flags, pred_path, gold_path, eval_traj, strict, judge);
        }
        if (serve_cmd->parsed()) return cmd_serve(flags, port, serve_refs, idle_timeout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
