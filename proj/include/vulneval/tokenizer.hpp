#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace vulneval::promptgen {

// Counts tokens for the corpus length filter and batch planning. Every
// implementation is deterministic and satisfies
// count(a + b) <= count(a) + count(b) + 1.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::size_t count(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

// Whitespace-piece approximation: each run of word bytes (ASCII alphanumerics
// and any non-ASCII byte) costs ceil(len / 6) tokens, every other
// non-whitespace byte costs one.
class ApproxTokenizer final : public Tokenizer {
public:
    std::size_t count(std::string_view text) const override;
    std::string name() const override { return "approx"; }
};

// Vocabulary-file tokenizer: word runs are segmented into the fewest
// vocabulary pieces (single bytes always allowed as a fallback), every other
// non-whitespace byte costs one.
class VocabTokenizer final : public Tokenizer {
public:
    explicit VocabTokenizer(const std::vector<std::string>& pieces);
    // One piece per line; blank lines ignored. Throws Error("IoError").
    static VocabTokenizer load(const std::filesystem::path& file);

    std::size_t count(std::string_view text) const override;
    std::string name() const override { return "vocab"; }
    std::size_t vocabulary_size() const noexcept { return pieces_.size(); }

private:
    std::size_t segment(std::string_view word) const;

    std::unordered_set<std::string> pieces_;
    std::size_t max_piece_ = 1;
};

std::unique_ptr<Tokenizer> make_default_tokenizer();

}  // namespace vulneval::promptgen
