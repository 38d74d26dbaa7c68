#pragma once

#include <memory>
#include <set>

#include "sumbt/model/model.hpp"
#include "sumbt/tracker/forward.hpp"

namespace sumbt::model {

using encoder::EncoderConfig;
using encoder::EncoderWeights;
using encoder::Vocabulary;
using numcore::Tensor;
using tracker::OntologyEmbeddings;
using tracker::TrackerConfig;
using tracker::TrackerWeights;

// The slot-independent tracker: trainable utterance encoder + one shared
// matching/recurrent head, classifying against the frozen value cache. An
// optional slot filter restricts it to a subset of slots (used by the
// slot-dependent baseline, which instantiates one of these per slot).
template <typename T>
class SumbtNet : public BeliefModel<T> {
  public:
    SumbtNet(std::shared_ptr<const Vocabulary> vocab,
             EncoderWeights<T> utterance_encoder,
             std::shared_ptr<const EncoderWeights<T>> frozen,
             std::shared_ptr<const OntologyEmbeddings<T>> cache,
             TrackerWeights<T> trk, std::set<std::string> slot_filter = {},
             std::string param_prefix = "")
        : vocab_(std::move(vocab)),
          utt_(std::move(utterance_encoder)),
          frozen_(std::move(frozen)),
          cache_(std::move(cache)),
          trk_(std::move(trk)),
          slot_filter_(std::move(slot_filter)),
          prefix_(std::move(param_prefix)) {}

    ModelKind kind() const override { return ModelKind::Sumbt; }
    const Vocabulary& vocab() const override { return *vocab_; }
    EncoderConfig encoder_config() const override { return utt_.cfg; }
    TrackerConfig tracker_config() const override { return trk_.cfg; }

    corpus::Ontology current_ontology() const override {
        return cache_->to_ontology();
    }

    std::vector<std::string> slot_names() const override {
        std::vector<std::string> names;
        for (const auto& s : cache_->slots())
            if (tracked(s.name)) names.push_back(s.name);
        return names;
    }

    const std::vector<std::string>& value_names(
        const std::string& slot) const override {
        return cache_->slot(slot).values;
    }

    DialogEval evaluate(const corpus::Dialog& dialog) const override {
        auto turns = forward(dialog);
        DialogEval ev;
        ev.dialog_id = dialog.id;
        ev.loss = static_cast<double>(
            tracker::dialog_loss(turns, dialog, *cache_).item());
        for (const auto& turn : turns) {
            TurnPrediction tp;
            for (const auto& so : turn.slots) {
                SlotPrediction sp;
                sp.slot = so.slot;
                sp.value_index = so.argmax;
                sp.special_mass = special_mass(so.attention, turn.token_ids);
                tp.slots.push_back(std::move(sp));
            }
            ev.turns.push_back(std::move(tp));
        }
        return ev;
    }

    Tensor<T> loss(const corpus::Dialog& dialog) override {
        return tracker::dialog_loss(forward(dialog), dialog, *cache_);
    }

    void visit_trainable(
        const typename BeliefModel<T>::ParamVisitor& f) override {
        utt_.visit([&](const std::string& name, Tensor<T>& t) {
            f(prefix_ + name, t);
        });
        trk_.visit([&](const std::string& name, Tensor<T>& t) {
            f(prefix_ + name, t);
        });
    }

    void visit_frozen(
        const typename BeliefModel<T>::ParamVisitor& f) override {
        // Checkpoint read access; the snapshot itself stays immutable.
        const_cast<EncoderWeights<T>&>(*frozen_).visit(
            [&](const std::string& name, Tensor<T>& t) {
                f("frozen." + name, t);
            });
    }

    std::unique_ptr<BeliefModel<T>> clone() const override {
        return std::make_unique<SumbtNet<T>>(vocab_, utt_.deep_copy(), frozen_,
                                             cache_, trk_.deep_copy(),
                                             slot_filter_, prefix_);
    }

    void expand_ontology(const corpus::Ontology& grown) override {
        if (!slot_filter_.empty()) {
            for (const auto& def : grown.slots)
                if (!cache_->has_slot(def.name))
                    throw IncompatibleModelError(
                        "slot-dependent model has no tracker for new slot " +
                        def.name);
        }
        auto grown_cache = std::make_shared<OntologyEmbeddings<T>>(*cache_);
        grown_cache->expand_to(grown, *frozen_, *vocab_);
        cache_ = std::move(grown_cache);
    }

    std::vector<AttentionRecord> attention_records(
        const corpus::Dialog& dialog) const override {
        auto turns = forward(dialog);
        std::vector<AttentionRecord> records;
        for (std::size_t t = 0; t < turns.size(); ++t) {
            std::vector<std::string> tokens;
            for (int id : turns[t].token_ids)
                tokens.push_back(vocab_->token(id));
            for (const auto& so : turns[t].slots) {
                for (std::size_t h = 0; h < so.attention.size(); ++h) {
                    AttentionRecord rec;
                    rec.dialog_id = dialog.id;
                    rec.turn = static_cast<int>(t);
                    rec.slot = so.slot;
                    rec.head = static_cast<int>(h);
                    rec.tokens = tokens;
                    rec.weights.assign(so.attention[h].begin(),
                                       so.attention[h].end());
                    records.push_back(std::move(rec));
                }
            }
        }
        return records;
    }

    // Shared-cache accessors for the slot-dependent wrapper and tests.
    const OntologyEmbeddings<T>& cache() const { return *cache_; }
    std::shared_ptr<const OntologyEmbeddings<T>> cache_ptr() const {
        return cache_;
    }
    void set_cache(std::shared_ptr<const OntologyEmbeddings<T>> cache) {
        cache_ = std::move(cache);
    }
    const EncoderWeights<T>& frozen_encoder() const { return *frozen_; }
    EncoderWeights<T>& utterance_encoder() { return utt_; }
    TrackerWeights<T>& tracker_weights() { return trk_; }

  private:
    bool tracked(const std::string& slot) const {
        return slot_filter_.empty() || slot_filter_.count(slot) > 0;
    }

    std::vector<tracker::BeliefTurnOutput<T>> forward(
        const corpus::Dialog& dialog) const {
        return tracker::forward_dialog(dialog, *vocab_, utt_, *cache_, trk_,
                                       slot_filter_.empty() ? nullptr
                                                            : &slot_filter_);
    }

    static double special_mass(const std::vector<std::vector<T>>& attention,
                               const std::vector<int>& token_ids) {
        if (attention.empty()) return 0.0;
        double total = 0.0;
        for (const auto& head : attention)
            for (std::size_t i = 0; i < head.size(); ++i)
                if (token_ids[i] == Vocabulary::kCls ||
                    token_ids[i] == Vocabulary::kSep)
                    total += static_cast<double>(head[i]);
        return total / static_cast<double>(attention.size());
    }

    std::shared_ptr<const Vocabulary> vocab_;
    EncoderWeights<T> utt_;
    std::shared_ptr<const EncoderWeights<T>> frozen_;
    std::shared_ptr<const OntologyEmbeddings<T>> cache_;
    TrackerWeights<T> trk_;
    std::set<std::string> slot_filter_;
    std::string prefix_;
};

}  // namespace sumbt::model
