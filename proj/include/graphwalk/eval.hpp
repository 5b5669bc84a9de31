#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "graphwalk/chat_client.hpp"

namespace graphwalk {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The single equivalence used by synthesis filtering, outcome rewards, and
/// accuracy. The default mode counts a prediction correct when its
/// normalized set intersects the normalized gold set; strict mode requires
/// set equality; the remote judge defers to an LLM and errors on any
/// non-conforming reply.
struct AnswerMatcher {
    enum class Mode { normalized_intersection, strict_equality, remote_judge };
    Mode mode = Mode::normalized_intersection;
    ChatClient* judge = nullptr;  // required for remote_judge

    bool matches(const std::set<std::string>& pred, const std::set<std::string>& gold) const;
    bool matches(const std::vector<std::string>& pred,
                 const std::vector<std::string>& gold) const;
};

std::set<std::string> normalized_set(const std::vector<std::string>& values);
std::set<std::string> normalized_set(const std::set<std::string>& values);

struct EvalRecord {
    std::string qa_id;
    std::vector<std::string> pred;
    std::vector<std::string> gold;
    bool correct = false;
    double f1 = 0.0;
    std::size_t triples_retrieved = 0;
    std::optional<int> hop_hint;
};

struct HopStats {
    std::size_t n = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

struct EvalSummary {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t n = 0;
    std::optional<double> mean_triples_on_correct;
    std::map<int, HopStats> per_hop;
};

/// Answer-set F1: P = |pred ∩ gold| / |pred|, R = |pred ∩ gold| / |gold|,
/// harmonic mean, all over normalized sets. Empty pred scores 0.
double answer_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold);

/// Fraction of records whose prediction the matcher accepts. Errors on an
/// empty record list.
double accuracy(std::span<const EvalRecord> records, const AnswerMatcher& matcher);

/// Fills correct/f1 on each record and aggregates. Macro-F1 averages
/// per-question F1 in record order.
EvalSummary summarize(std::vector<EvalRecord>& records, const AnswerMatcher& matcher);

/// Mean unique triples ever windowed across correct episodes; absent when
/// none is correct.
std::optional<double> efficiency(const std::vector<std::size_t>& triples_retrieved,
                                 const std::vector<bool>& correct);

std::string render_report(const EvalSummary& summary);
std::string report_json(const EvalSummary& summary);

}  // namespace graphwalk
