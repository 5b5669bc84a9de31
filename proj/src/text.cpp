#include "graphwalk/text.hpp"

#include <algorithm>
#include <cctype>

namespace graphwalk {

namespace {

bool is_space(unsigned char c) {
    return std::isspace(c) != 0;
}

}  // namespace

std::string canonicalize_label(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    bool seen_char = false;
    for (unsigned char c : s) {
        if (is_space(c)) {
            if (seen_char) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(c));
        seen_char = true;
    }
    return out;
}

std::string fold_case(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

std::string normalize_answer(std::string_view s) {
    std::string out = fold_case(canonicalize_label(s));
    while (!out.empty()) {
        char c = out.back();
        if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':') {
            out.pop_back();
        } else {
            break;
        }
    }
    // Trailing punctuation may expose trailing whitespace ("Nolan ." -> "Nolan ").
    while (!out.empty() && is_space(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out;
}

const std::vector<std::string>& stop_words() {
    static const std::vector<std::string> words = {
        "a",    "an",   "and",  "are",  "at",    "by",   "did",  "do",
        "does", "for",  "how",  "in",   "is",    "it",   "of",   "on",
        "or",   "the",  "to",   "was",  "were",  "what", "when", "where",
        "which", "who", "whom", "whose", "why",  "with",
    };
    return words;
}

std::set<std::string> content_tokens(std::string_view s) {
    const auto& stops = stop_words();
    std::set<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        if (!std::binary_search(stops.begin(), stops.end(), cur)) tokens.insert(cur);
        cur.clear();
    };
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        if (c < 0x80) {
            len = 1;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            if (c < 0xC2) return false;  // overlong
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            if (c > 0xF4) return false;  // beyond U+10FFFF
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        }
        if (len == 3) {
            unsigned char c1 = static_cast<unsigned char>(s[i + 1]);
            if (c == 0xE0 && c1 < 0xA0) return false;           // overlong
            if (c == 0xED && c1 > 0x9F) return false;           // surrogate
        }
        if (len == 4) {
            unsigned char c1 = static_cast<unsigned char>(s[i + 1]);
            if (c == 0xF0 && c1 < 0x90) return false;           // overlong
            if (c == 0xF4 && c1 > 0x8F) return false;           // beyond U+10FFFF
        }
        i += len;
    }
    return true;
}

}  // namespace graphwalk
