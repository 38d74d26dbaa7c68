#pragma once

#include <algorithm>
#include <cmath>
#include <memory>

#include "sumbt/model/sumbt_net.hpp"

// The three reference heads trained for A/B comparison against the tracker:
// a pooled-utterance RNN with per-slot linear classifiers, the same with an
// elementwise ontology-utterance product in front of the RNN, and a
// slot-dependent variant of the tracker (one full model per slot). The two
// linear-head models are parametric in the ontology and refuse expansion.
namespace sumbt::baselines {

using model::AttentionRecord;
using model::BeliefModel;
using model::DialogEval;
using model::ModelKind;
using model::SlotPrediction;
using model::SumbtNet;
using model::TurnPrediction;
using encoder::EncoderWeights;
using encoder::Vocabulary;
using numcore::Rng;
using numcore::Tensor;
using tracker::OntologyEmbeddings;
using tracker::RnnCellKind;
using tracker::RnnState;

template <typename T>
struct BaselineWeights {
    int dim = 0;
    RnnCellKind cell = RnnCellKind::Gru;
    Tensor<T> rnn_w_ih, rnn_w_hh, rnn_b_ih, rnn_b_hh;
    struct Head {
        std::string slot;
        Tensor<T> w;  // [d, |C_s|]
        Tensor<T> b;  // [|C_s|]
    };
    std::vector<Head> heads;

    void init(int d, RnnCellKind kind, const corpus::Ontology& ont, Rng& rng) {
        dim = d;
        cell = kind;
        const double bound = 1.0 / std::sqrt(static_cast<double>(d));
        auto uniform = [&rng, bound](std::vector<int> shape) {
            std::size_t n = 1;
            for (int s : shape) n *= static_cast<std::size_t>(s);
            std::vector<T> data(n);
            for (auto& x : data) x = static_cast<T>(rng.uniform(-bound, bound));
            return Tensor<T>::param(std::move(shape), std::move(data));
        };
        auto normal = [&rng](std::vector<int> shape) {
            std::size_t n = 1;
            for (int s : shape) n *= static_cast<std::size_t>(s);
            std::vector<T> data(n);
            for (auto& x : data) x = static_cast<T>(rng.normal(0.0, 0.02));
            return Tensor<T>::param(std::move(shape), std::move(data));
        };
        const int gates = kind == RnnCellKind::Gru ? 3 : 4;
        // The input side sees raw pooled vectors (norm ~ sqrt(d) and up), so
        // it starts small to keep the gates out of saturation.
        rnn_w_ih = normal({d, gates * d});
        rnn_w_hh = uniform({d, gates * d});
        rnn_b_ih = Tensor<T>::param({gates * d});
        rnn_b_hh = uniform({gates * d});
        heads.clear();
        for (const auto& slot : ont.slots) {
            Head h;
            h.slot = slot.name;
            h.w = normal({d, static_cast<int>(slot.values.size())});
            h.b = Tensor<T>::param({static_cast<int>(slot.values.size())});
            heads.push_back(std::move(h));
        }
    }

    template <typename F>
    void visit(F&& f) {
        f("rnn.w_ih", rnn_w_ih);
        f("rnn.w_hh", rnn_w_hh);
        f("rnn.b_ih", rnn_b_ih);
        f("rnn.b_hh", rnn_b_hh);
        for (auto& h : heads) {
            f("head." + h.slot + ".w", h.w);
            f("head." + h.slot + ".b", h.b);
        }
    }

    BaselineWeights deep_copy() const {
        BaselineWeights out = *this;
        out.visit([](const std::string&, Tensor<T>& t) { t = t.deep_copy(); });
        return out;
    }
};

// BERT+RNN (`use_ontology = false`) and BERT+RNN+Ontology
// (`use_ontology = true`). The first tracks one shared recurrent state from
// the pooled utterance vector; the second keeps one state per slot whose
// input is the elementwise product of the frozen slot vector with the pooled
// utterance vector.
template <typename T>
class BertRnnNet : public BeliefModel<T> {
  public:
    BertRnnNet(std::shared_ptr<const Vocabulary> vocab,
               EncoderWeights<T> utterance_encoder,
               std::shared_ptr<const EncoderWeights<T>> frozen,
               std::shared_ptr<const OntologyEmbeddings<T>> cache,
               BaselineWeights<T> weights, corpus::Ontology ontology,
               bool use_ontology)
        : vocab_(std::move(vocab)),
          utt_(std::move(utterance_encoder)),
          frozen_(std::move(frozen)),
          cache_(std::move(cache)),
          w_(std::move(weights)),
          ontology_(std::move(ontology)),
          use_ontology_(use_ontology) {}

    ModelKind kind() const override {
        return use_ontology_ ? ModelKind::BertRnnOntology : ModelKind::BertRnn;
    }
    const Vocabulary& vocab() const override { return *vocab_; }
    encoder::EncoderConfig encoder_config() const override { return utt_.cfg; }
    tracker::TrackerConfig tracker_config() const override {
        tracker::TrackerConfig cfg;
        cfg.cell = w_.cell;
        return cfg;
    }
    corpus::Ontology current_ontology() const override { return ontology_; }

    std::vector<std::string> slot_names() const override {
        std::vector<std::string> names;
        for (const auto& h : w_.heads) names.push_back(h.slot);
        return names;
    }

    const std::vector<std::string>& value_names(
        const std::string& slot) const override {
        return ontology_.slot(slot).values;
    }

    DialogEval evaluate(const corpus::Dialog& dialog) const override {
        DialogEval ev;
        ev.dialog_id = dialog.id;
        auto outputs = forward(dialog);
        for (std::size_t t = 0; t < outputs.size(); ++t) {
            TurnPrediction tp;
            for (std::size_t si = 0; si < outputs[t].size(); ++si) {
                const auto& logp = outputs[t][si];
                SlotPrediction sp;
                sp.slot = w_.heads[si].slot;
                int best = 0;
                for (std::size_t i = 1; i < logp.numel(); ++i)
                    if (logp.data()[i] > logp.data()[best])
                        best = static_cast<int>(i);
                sp.value_index = best;
                tp.slots.push_back(std::move(sp));
                const int gold = gold_index(dialog, t, w_.heads[si].slot);
                ev.loss -= static_cast<double>(logp.data()[gold]);
            }
            ev.turns.push_back(std::move(tp));
        }
        return ev;
    }

    Tensor<T> loss(const corpus::Dialog& dialog) override {
        namespace nc = sumbt::numcore;
        auto outputs = forward(dialog);
        std::vector<Tensor<T>> terms;
        for (std::size_t t = 0; t < outputs.size(); ++t)
            for (std::size_t si = 0; si < outputs[t].size(); ++si)
                terms.push_back(nc::pick(
                    outputs[t][si], gold_index(dialog, t, w_.heads[si].slot)));
        return nc::scale(nc::sum_scalars(std::span<const Tensor<T>>(terms)),
                         T(-1));
    }

    void visit_trainable(
        const typename BeliefModel<T>::ParamVisitor& f) override {
        utt_.visit(f);
        w_.visit(f);
    }

    void visit_frozen(
        const typename BeliefModel<T>::ParamVisitor& f) override {
        const_cast<EncoderWeights<T>&>(*frozen_).visit(
            [&](const std::string& name, Tensor<T>& t) {
                f("frozen." + name, t);
            });
    }

    std::unique_ptr<BeliefModel<T>> clone() const override {
        return std::make_unique<BertRnnNet<T>>(vocab_, utt_.deep_copy(),
                                               frozen_, cache_, w_.deep_copy(),
                                               ontology_, use_ontology_);
    }

    void expand_ontology(const corpus::Ontology&) override {
        throw IncompatibleModelError(
            "model kind '" + model::to_string(kind()) +
            "' has parametric per-slot output layers sized to the training "
            "ontology; changing the ontology requires retraining");
    }

  private:
    int gold_index(const corpus::Dialog& dialog, std::size_t t,
                   const std::string& slot) const {
        const std::string& label =
            tracker::label_or_none(dialog.turns[t], slot);
        const int idx = ontology_.value_index(slot, label);
        if (idx < 0)
            throw DataError("label '" + label +
                            "' not in candidate set of slot '" + slot + "'");
        return idx;
    }

    // Per turn, per head slot: log-probabilities over that slot's candidates.
    std::vector<std::vector<Tensor<T>>> forward(
        const corpus::Dialog& dialog) const {
        namespace nc = sumbt::numcore;
        const std::size_t n_states = use_ontology_ ? w_.heads.size() : 1;
        std::vector<RnnState<T>> states;
        for (std::size_t i = 0; i < n_states; ++i) {
            RnnState<T> s;
            s.hidden = Tensor<T>::zeros({1, w_.dim});
            if (w_.cell == RnnCellKind::Lstm)
                s.cell = Tensor<T>::zeros({1, w_.dim});
            states.push_back(std::move(s));
        }
        std::vector<std::vector<Tensor<T>>> out;
        for (const auto& turn : dialog.turns) {
            auto enc = encoder::encode_pair(utt_, vocab_->tokenize(turn.system),
                                            vocab_->tokenize(turn.user));
            std::vector<Tensor<T>> slot_logp;
            for (std::size_t si = 0; si < w_.heads.size(); ++si) {
                const std::size_t state_i = use_ontology_ ? si : 0;
                if (use_ontology_ || si == 0) {
                    auto input = use_ontology_
                                     ? nc::mul(cache_->slot(w_.heads[si].slot)
                                                   .query,
                                               enc.pooled)
                                     : enc.pooled;
                    states[state_i] = tracker::rnn_cell_step(
                        states[state_i], input, w_.rnn_w_ih, w_.rnn_w_hh,
                        w_.rnn_b_ih, w_.rnn_b_hh, w_.cell);
                }
                auto logits = nc::add_rowvec(
                    nc::matmul(states[state_i].hidden, w_.heads[si].w),
                    w_.heads[si].b);
                slot_logp.push_back(nc::log_softmax(logits));
            }
            out.push_back(std::move(slot_logp));
        }
        return out;
    }

    std::shared_ptr<const Vocabulary> vocab_;
    EncoderWeights<T> utt_;
    std::shared_ptr<const EncoderWeights<T>> frozen_;
    std::shared_ptr<const OntologyEmbeddings<T>> cache_;
    BaselineWeights<T> w_;
    corpus::Ontology ontology_;
    bool use_ontology_;
};

// Baseline 3: the same architecture as the tracker, but one complete model
// per slot, each trained on its own slot's loss terms only.
template <typename T>
class SlotDependentNet : public BeliefModel<T> {
  public:
    SlotDependentNet(std::vector<std::unique_ptr<SumbtNet<T>>> subs,
                     std::vector<std::string> slot_order)
        : subs_(std::move(subs)), slot_order_(std::move(slot_order)) {}

    ModelKind kind() const override { return ModelKind::SlotDependentSumbt; }
    const Vocabulary& vocab() const override { return subs_.front()->vocab(); }
    encoder::EncoderConfig encoder_config() const override {
        return subs_.front()->encoder_config();
    }
    tracker::TrackerConfig tracker_config() const override {
        return subs_.front()->tracker_config();
    }

    corpus::Ontology current_ontology() const override {
        return subs_.front()->current_ontology();
    }

    std::vector<std::string> slot_names() const override { return slot_order_; }

    const std::vector<std::string>& value_names(
        const std::string& slot) const override {
        return subs_.front()->value_names(slot);
    }

    std::size_t model_count() const { return subs_.size(); }
    SumbtNet<T>& sub(std::size_t i) { return *subs_[i]; }

    DialogEval evaluate(const corpus::Dialog& dialog) const override {
        DialogEval ev;
        ev.dialog_id = dialog.id;
        ev.turns.resize(dialog.turns.size());
        for (const auto& sub : subs_) {
            auto sub_ev = sub->evaluate(dialog);
            ev.loss += sub_ev.loss;
            for (std::size_t t = 0; t < sub_ev.turns.size(); ++t)
                for (auto& sp : sub_ev.turns[t].slots)
                    ev.turns[t].slots.push_back(std::move(sp));
        }
        return ev;
    }

    Tensor<T> loss(const corpus::Dialog& dialog) override {
        namespace nc = sumbt::numcore;
        std::vector<Tensor<T>> terms;
        for (auto& sub : subs_) terms.push_back(sub->loss(dialog));
        return nc::sum_scalars(std::span<const Tensor<T>>(terms));
    }

    void visit_trainable(
        const typename BeliefModel<T>::ParamVisitor& f) override {
        for (auto& sub : subs_) sub->visit_trainable(f);
    }

    void visit_frozen(
        const typename BeliefModel<T>::ParamVisitor& f) override {
        subs_.front()->visit_frozen(f);  // snapshot is shared between subs
    }

    std::unique_ptr<BeliefModel<T>> clone() const override {
        std::vector<std::unique_ptr<SumbtNet<T>>> subs;
        for (const auto& sub : subs_) {
            auto cloned = sub->clone();
            subs.emplace_back(static_cast<SumbtNet<T>*>(cloned.release()));
        }
        return std::make_unique<SlotDependentNet<T>>(std::move(subs),
                                                     slot_order_);
    }

    // Value-only expansion is fine (the per-slot heads are non-parametric);
    // a whole new slot has no trained model and is rejected.
    void expand_ontology(const corpus::Ontology& grown) override {
        for (const auto& def : grown.slots)
            if (std::find(slot_order_.begin(), slot_order_.end(), def.name) ==
                slot_order_.end())
                throw IncompatibleModelError(
                    "slot-dependent model has no tracker for new slot " +
                    def.name);
        auto grown_cache = std::make_shared<OntologyEmbeddings<T>>(
            subs_.front()->cache());
        grown_cache->expand_to(grown, subs_.front()->frozen_encoder(),
                               subs_.front()->vocab());
        for (auto& sub : subs_) sub->set_cache(grown_cache);
    }

    std::vector<AttentionRecord> attention_records(
        const corpus::Dialog& dialog) const override {
        std::vector<AttentionRecord> records;
        for (const auto& sub : subs_)
            for (auto& r : sub->attention_records(dialog))
                records.push_back(std::move(r));
        return records;
    }

  private:
    std::vector<std::unique_ptr<SumbtNet<T>>> subs_;
    std::vector<std::string> slot_order_;
};

}  // namespace sumbt::baselines
