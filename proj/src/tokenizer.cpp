#include "vulneval/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>

#include "vulneval/error.hpp"

namespace vulneval::promptgen {

namespace {

bool is_word_byte(char c) noexcept {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u) != 0;
}

bool is_space(char c) noexcept { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Calls on_word(run) for each word run and on_other() for each other
// non-whitespace byte.
template <typename Word, typename Other>
void pretokenize(std::string_view text, Word on_word, Other on_other) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_space(text[i])) {
            ++i;
        } else if (is_word_byte(text[i])) {
            const auto start = i;
            while (i < text.size() && is_word_byte(text[i])) ++i;
            on_word(text.substr(start, i - start));
        } else {
            on_other();
            ++i;
        }
    }
}

}  // namespace

std::size_t ApproxTokenizer::count(std::string_view text) const {
    std::size_t n = 0;
    pretokenize(
        text, [&](std::string_view word) { n += (word.size() + 5) / 6; }, [&] { ++n; });
    return n;
}

VocabTokenizer::VocabTokenizer(const std::vector<std::string>& pieces) {
    for (const auto& p : pieces) {
        if (p.empty()) continue;
        pieces_.insert(p);
        max_piece_ = std::max(max_piece_, p.size());
    }
}

VocabTokenizer VocabTokenizer::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open vocabulary " + file.string());
    std::vector<std::string> pieces;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) pieces.push_back(line);
    }
    return VocabTokenizer(pieces);
}

std::size_t VocabTokenizer::segment(std::string_view word) const {
    constexpr auto kInf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> best(word.size() + 1, kInf);
    best[0] = 0;
    std::string piece;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (best[i] == kInf) continue;
        best[i + 1] = std::min(best[i + 1], best[i] + 1);  // single-byte fallback
        const auto limit = std::min(max_piece_, word.size() - i);
        for (std::size_t len = 2; len <= limit; ++len) {
            piece.assign(word.substr(i, len));
            if (pieces_.contains(piece)) best[i + len] = std::min(best[i + len], best[i] + 1);
        }
    }
    return best[word.size()];
}

std::size_t VocabTokenizer::count(std::string_view text) const {
    std::size_t n = 0;
    pretokenize(
        text, [&](std::string_view word) { n += segment(word); }, [&] { ++n; });
    return n;
}

std::unique_ptr<Tokenizer> make_default_tokenizer() { return std::make_unique<ApproxTokenizer>(); }

}  // namespace vulneval::promptgen
