#include "sumbt/encoder/vocab.hpp"

#include <cctype>

#include "sumbt/errors.hpp"

namespace sumbt::encoder {

Vocabulary::Vocabulary() {
    for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) {
        ids_[t] = static_cast<int>(tokens_.size());
        tokens_.emplace_back(t);
    }
}

std::vector<std::string> Vocabulary::split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
            if (!std::isspace(c)) words.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

void Vocabulary::add_text(const std::string& text) {
    for (const auto& w : split_words(text)) {
        if (!ids_.count(w)) {
            ids_[w] = static_cast<int>(tokens_.size());
            tokens_.push_back(w);
        }
    }
}

int Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int tid) const {
    if (tid < 0 || tid >= size())
        throw DataError("token id out of range: " + std::to_string(tid));
    return tokens_[static_cast<std::size_t>(tid)];
}

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& w : split_words(text)) ids.push_back(id(w));
    return ids;
}

std::vector<std::string> Vocabulary::entries() const {
    return std::vector<std::string>(tokens_.begin() + 5, tokens_.end());
}

Vocabulary Vocabulary::from_entries(std::span<const std::string> entries) {
    Vocabulary v;
    for (const auto& e : entries) {
        if (v.ids_.count(e)) throw DataError("duplicate vocab entry: " + e);
        v.ids_[e] = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back(e);
    }
    return v;
}

}  // namespace sumbt::encoder
