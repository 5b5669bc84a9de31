#include "graphwalk/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "graphwalk/text.hpp"

namespace graphwalk {

namespace {

using nlohmann::json;

std::string join(const std::set<std::string>& values, const char* sep) {
    std::string out;
    bool first = true;
    for (const auto& v : values) {
        if (!first) out += sep;
        out += v;
        first = false;
    }
    return out;
}

}  // namespace

std::set<std::string> normalized_set(const std::vector<std::string>& values) {
    std::set<std::string> out;
    for (const auto& v : values) {
        std::string n = normalize_answer(v);
        if (!n.empty()) out.insert(std::move(n));
    }
    return out;
}

std::set<std::string> normalized_set(const std::set<std::string>& values) {
    return normalized_set(std::vector<std::string>(values.begin(), values.end()));
}

bool AnswerMatcher::matches(const std::set<std::string>& pred,
                            const std::set<std::string>& gold) const {
    return matches(std::vector<std::string>(pred.begin(), pred.end()),
                   std::vector<std::string>(gold.begin(), gold.end()));
}

bool AnswerMatcher::matches(const std::vector<std::string>& pred,
                            const std::vector<std::string>& gold) const {
    switch (mode) {
        case Mode::normalized_intersection: {
            auto p = normalized_set(pred);
            auto g = normalized_set(gold);
            return std::any_of(p.begin(), p.end(),
                               [&](const std::string& v) { return g.count(v) != 0; });
        }
        case Mode::strict_equality: {
            auto p = normalized_set(pred);
            auto g = normalized_set(gold);
            return !p.empty() && p == g;
        }
        case Mode::remote_judge: {
            if (!judge) throw EvalError("remote judge requested but no client configured");
            std::string prompt =
                "Gold answers: " + join(normalized_set(gold), "; ") +
                "\nPredicted answers: " + join(normalized_set(pred), "; ") +
                "\nDo the predicted answers name at least one gold answer? "
                "Reply with exactly CORRECT or INCORRECT.";
            std::string reply = judge->complete({{"system",
                                                  "You judge whether a predicted answer set "
                                                  "matches the gold answers."},
                                                 {"user", prompt}});
            std::string folded = fold_case(canonicalize_label(reply));
            if (folded == "correct") return true;
            if (folded == "incorrect") return false;
            throw EvalError("judge reply is neither CORRECT nor INCORRECT: " + reply);
        }
    }
    throw EvalError("unknown matcher mode");
}

double answer_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    auto p = normalized_set(pred);
    auto g = normalized_set(gold);
    if (g.empty()) throw EvalError("answer_f1 requires nonempty gold answers");
    if (p.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& v : p) {
        if (g.count(v)) ++inter;
    }
    double precision = static_cast<double>(inter) / static_cast<double>(p.size());
    double recall = static_cast<double>(inter) / static_cast<double>(g.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double accuracy(std::span<const EvalRecord> records, const AnswerMatcher& matcher) {
    if (records.empty()) throw EvalError("accuracy requires at least one record");
    std::size_t hits = 0;
    for (const auto& r : records) {
        if (matcher.matches(r.pred, r.gold)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

EvalSummary summarize(std::vector<EvalRecord>& records, const AnswerMatcher& matcher) {
    if (records.empty()) throw EvalError("summarize requires at least one record");
    EvalSummary summary;
    summary.n = records.size();

    double f1_sum = 0.0;
    std::size_t hits = 0;
    double correct_triples = 0.0;
    std::size_t correct_count = 0;
    std::map<int, std::pair<std::size_t, double>> hop_hits_f1;  // hop -> (hits, f1 sum)
    std::map<int, std::size_t> hop_n;

    for (auto& r : records) {
        r.correct = matcher.matches(r.pred, r.gold);
        r.f1 = answer_f1(r.pred, r.gold);
        f1_sum += r.f1;
        if (r.correct) {
            ++hits;
            correct_triples += static_cast<double>(r.triples_retrieved);
            ++correct_count;
        }
        if (r.hop_hint) {
            hop_n[*r.hop_hint]++;
            auto& [h, f] = hop_hits_f1[*r.hop_hint];
            if (r.correct) ++h;
            f += r.f1;
        }
    }

    summary.accuracy = static_cast<double>(hits) / static_cast<double>(records.size());
    summary.macro_f1 = f1_sum / static_cast<double>(records.size());
    if (correct_count > 0) {
        summary.mean_triples_on_correct = correct_triples / static_cast<double>(correct_count);
    }
    for (const auto& [hop, n] : hop_n) {
        const auto& [h, f] = hop_hits_f1[hop];
        HopStats stats;
        stats.n = n;
        stats.accuracy = static_cast<double>(h) / static_cast<double>(n);
        stats.macro_f1 = f / static_cast<double>(n);
        summary.per_hop[hop] = stats;
    }
    return summary;
}

std::optional<double> efficiency(const std::vector<std::size_t>& triples_retrieved,
                                 const std::vector<bool>& correct) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < triples_retrieved.size() && i < correct.size(); ++i) {
        if (correct[i]) {
            sum += static_cast<double>(triples_retrieved[i]);
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::string render_report(const EvalSummary& summary) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "n                        " << summary.n << "\n";
    out << "accuracy                 " << summary.accuracy << "\n";
    out << "macro_f1                 " << summary.macro_f1 << "\n";
    out << "mean_triples_on_correct  ";
    if (summary.mean_triples_on_correct) {
        out << *summary.mean_triples_on_correct << "\n";
    } else {
        out << "n/a\n";
    }
    for (const auto& [hop, stats] : summary.per_hop) {
        out << "hop " << hop << "  n=" << stats.n << "  accuracy=" << stats.accuracy
            << "  macro_f1=" << stats.macro_f1 << "\n";
    }
    return out.str();
}

std::string report_json(const EvalSummary& summary) {
    json j;
    j["n"] = summary.n;
    j["accuracy"] = summary.accuracy;
    j["macro_f1"] = summary.macro_f1;
    if (summary.mean_triples_on_correct) {
        j["mean_triples_on_correct"] = *summary.mean_triples_on_correct;
    } else {
        j["mean_triples_on_correct"] = nullptr;
    }
    j["per_hop"] = json::object();
    for (const auto& [hop, stats] : summary.per_hop) {
        j["per_hop"][std::to_string(hop)] = {
            {"n", stats.n}, {"accuracy", stats.accuracy}, {"macro_f1", stats.macro_f1}};
    }
    return j.dump(2);
}

}  // namespace graphwalk
