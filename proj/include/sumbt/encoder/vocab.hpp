#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace sumbt::encoder {

// Closed word-level vocabulary. Reserved tokens sit at fixed ids 0-4;
// everything else is added in first-seen order. Tokenization lowercases,
// splits words on non-alphanumeric characters, and keeps each punctuation
// character as its own token (the slot-phrase separator "-" must survive).
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;

    Vocabulary();

    static std::vector<std::string> split_words(const std::string& text);

    // Adds every word of `text` that is not yet known.
    void add_text(const std::string& text);

    int id(const std::string& token) const;  // kUnk if unknown
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }

    std::vector<int> tokenize(const std::string& text) const;

    // Non-reserved tokens in id order (for checkpoints).
    std::vector<std::string> entries() const;
    static Vocabulary from_entries(std::span<const std::string> entries);

    bool operator==(const Vocabulary& other) const {
        return tokens_ == other.tokens_;
    }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

}  // namespace sumbt::encoder
