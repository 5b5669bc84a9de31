#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace graphwalk {

/// Canonical label form: outer whitespace trimmed, inner whitespace runs
/// collapsed to a single space. Bytes other than ASCII whitespace pass
/// through untouched.
std::string canonicalize_label(std::string_view s);

/// ASCII lowercase copy. Non-ASCII bytes pass through untouched.
std::string fold_case(std::string_view s);

/// Answer normalization used by the default equivalence: trim, collapse
/// whitespace, case-fold, strip trailing punctuation (.,!?;:).
std::string normalize_answer(std::string_view s);

/// Lowercased alphanumeric tokens with the shipped stop-word list removed
/// and duplicates dropped. Splits on every non-alphanumeric byte, so
/// "directed_by" yields {"directed"} ("by" is a stop word).
std::set<std::string> content_tokens(std::string_view s);

/// The fixed stop-word list, sorted. Shipped verbatim so token-overlap
/// scores are reproducible.
const std::vector<std::string>& stop_words();

/// True when the byte range is well-formed UTF-8.
bool is_valid_utf8(std::string_view s);

}  // namespace graphwalk
