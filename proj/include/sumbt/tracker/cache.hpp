#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "sumbt/corpus/corpus.hpp"
#include "sumbt/encoder/encoder.hpp"
#include "sumbt/errors.hpp"

// Frozen slot-query and candidate-value vectors. Everything here is produced
// by pure encoding with the frozen twin, so growing the ontology never
// touches a trainable parameter and never rewrites an existing entry.
namespace sumbt::tracker {

using encoder::EncoderWeights;
using encoder::Vocabulary;
using numcore::Tensor;

template <typename T>
struct SlotEmbeddings {
    std::string name;    // "restaurant-price range"
    std::string phrase;  // "restaurant - price range"
    Tensor<T> query;     // [1, d]
    std::vector<std::string> values;
    Tensor<T> value_matrix;  // [|values|, d], row i belongs to values[i]
};

template <typename T>
class OntologyEmbeddings {
  public:
    static OntologyEmbeddings build(const corpus::Ontology& ont,
                                    const EncoderWeights<T>& frozen,
                                    const Vocabulary& vocab) {
        OntologyEmbeddings out;
        for (const auto& def : ont.slots) out.append_slot(def, frozen, vocab);
        return out;
    }

    const std::vector<SlotEmbeddings<T>>& slots() const { return slots_; }

    bool has_slot(const std::string& name) const {
        return index_.count(name) > 0;
    }

    const SlotEmbeddings<T>& slot(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw DataError("unknown slot: " + name);
        return slots_[it->second];
    }

    int value_index(const std::string& slot_name,
                    const std::string& value) const {
        const auto& s = slot(slot_name);
        for (std::size_t i = 0; i < s.values.size(); ++i)
            if (s.values[i] == value) return static_cast<int>(i);
        return -1;
    }

    // Append candidate values to an existing slot. Existing rows are copied
    // bit-for-bit; only the new rows are encoded.
    void add_values(const std::string& slot_name,
                    std::span<const std::string> new_values,
                    const EncoderWeights<T>& frozen, const Vocabulary& vocab) {
        auto it = index_.find(slot_name);
        if (it == index_.end()) throw DataError("unknown slot: " + slot_name);
        auto& s = slots_[it->second];
        for (const auto& v : new_values)
            if (value_index(slot_name, v) >= 0)
                throw DataError("duplicate value '" + v + "' for slot " +
                                slot_name);
        const int d = s.value_matrix.cols();
        const int old_n = s.value_matrix.rows();
        const int n = old_n + static_cast<int>(new_values.size());
        auto grown = Tensor<T>::zeros({n, d});
        std::copy_n(s.value_matrix.data().data(),
                    static_cast<std::size_t>(old_n) * d, grown.data().data());
        for (std::size_t i = 0; i < new_values.size(); ++i) {
            auto vec = encoder::encode_text(frozen, vocab.tokenize(new_values[i]));
            std::copy_n(vec.data().data(), d,
                        grown.data().data() +
                            (static_cast<std::size_t>(old_n) + i) * d);
            s.values.push_back(new_values[i]);
        }
        s.value_matrix = grown;
    }

    void add_slot(const corpus::SlotDef& def, const EncoderWeights<T>& frozen,
                  const Vocabulary& vocab) {
        if (has_slot(def.name))
            throw DataError("slot already present: " + def.name);
        append_slot(def, frozen, vocab);
    }

    // Align the cache with a grown ontology: new slots and appended values
    // are encoded; removing anything is rejected.
    void expand_to(const corpus::Ontology& ont, const EncoderWeights<T>& frozen,
                   const Vocabulary& vocab) {
        for (const auto& s : slots_)
            if (!ont.has_slot(s.name))
                throw DataError("ontology expansion cannot remove slot " +
                                s.name);
        for (const auto& def : ont.slots) {
            if (!has_slot(def.name)) {
                append_slot(def, frozen, vocab);
                continue;
            }
            const auto& existing = slot(def.name);
            std::vector<std::string> fresh;
            for (const auto& v : def.values) {
                bool known = false;
                for (const auto& old : existing.values)
                    if (old == v) known = true;
                if (!known) fresh.push_back(v);
            }
            for (const auto& old : existing.values)
                if (ont.value_index(def.name, old) < 0)
                    throw DataError("ontology expansion cannot remove value '" +
                                    old + "' of slot " + def.name);
            if (!fresh.empty()) add_values(def.name, fresh, frozen, vocab);
        }
    }

    // The ontology as this cache sees it (cache value order).
    corpus::Ontology to_ontology() const {
        corpus::Ontology ont;
        for (const auto& s : slots_) {
            corpus::SlotDef def;
            def.name = s.name;
            const auto dash = s.name.find('-');
            def.domain = s.name.substr(0, dash);
            def.slot = s.name.substr(dash + 1);
            def.values = s.values;
            ont.slots.push_back(std::move(def));
        }
        return ont;
    }

  private:
    void append_slot(const corpus::SlotDef& def,
                     const EncoderWeights<T>& frozen, const Vocabulary& vocab) {
        SlotEmbeddings<T> s;
        s.name = def.name;
        s.phrase = def.phrase();
        s.query = encoder::encode_text(frozen, vocab.tokenize(s.phrase));
        const int d = s.query.cols();
        s.value_matrix =
            Tensor<T>::zeros({static_cast<int>(def.values.size()), d});
        for (std::size_t i = 0; i < def.values.size(); ++i) {
            auto vec =
                encoder::encode_text(frozen, vocab.tokenize(def.values[i]));
            std::copy_n(vec.data().data(), d,
                        s.value_matrix.data().data() + i * d);
            s.values.push_back(def.values[i]);
        }
        index_[s.name] = slots_.size();
        slots_.push_back(std::move(s));
    }

    std::vector<SlotEmbeddings<T>> slots_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace sumbt::tracker
