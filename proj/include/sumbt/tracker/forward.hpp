#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sumbt/corpus/corpus.hpp"
#include "sumbt/tracker/cache.hpp"
#include "sumbt/tracker/tracker.hpp"

namespace sumbt::tracker {

template <typename T>
struct BeliefSlotOutput {
    std::string slot;
    Tensor<T> logp;             // [|C_s|] log-probabilities over candidates
    std::vector<T> probs;       // softmax of the scores (detached copy)
    int argmax = 0;
    std::vector<std::vector<T>> attention;  // per head, per token position
};

template <typename T>
struct BeliefTurnOutput {
    std::vector<int> token_ids;  // framed input the attention rows refer to
    bool truncated = false;
    std::vector<BeliefSlotOutput<T>> slots;
};

// Unrolls one recurrent state per slot over the dialog turns. Each turn sees
// only the current (system, user) pair; history flows solely through the
// state, so outputs at turn t are a pure function of turns 1..t.
template <typename T>
std::vector<BeliefTurnOutput<T>> forward_dialog(
    const corpus::Dialog& dialog, const Vocabulary& vocab,
    const EncoderWeights<T>& utterance_encoder,
    const OntologyEmbeddings<T>& cache, const TrackerWeights<T>& w,
    const std::set<std::string>* slot_filter = nullptr) {
    namespace nc = sumbt::numcore;
    std::vector<const SlotEmbeddings<T>*> active;
    for (const auto& s : cache.slots())
        if (!slot_filter || slot_filter->count(s.name)) active.push_back(&s);

    std::vector<RnnState<T>> states;
    states.reserve(active.size());
    for (std::size_t i = 0; i < active.size(); ++i)
        states.push_back(zero_state(w));

    std::vector<BeliefTurnOutput<T>> out;
    for (const auto& turn : dialog.turns) {
        auto enc = encoder::encode_pair(utterance_encoder,
                                        vocab.tokenize(turn.system),
                                        vocab.tokenize(turn.user));
        BeliefTurnOutput<T> turn_out;
        turn_out.token_ids = enc.ids;
        turn_out.truncated = enc.truncated;
        for (std::size_t si = 0; si < active.size(); ++si) {
            const auto& slot = *active[si];
            auto matched = match(slot.query, enc.states, w);
            auto stepped = track_step(states[si], matched.h, w);
            states[si] = stepped.state;
            auto scores =
                classify_scores(stepped.y_hat, slot.value_matrix, w.cfg.metric);
            BeliefSlotOutput<T> so;
            so.slot = slot.name;
            so.logp = nc::log_softmax(scores);
            so.attention = std::move(matched.attention);
            so.probs.resize(so.logp.numel());
            for (std::size_t i = 0; i < so.probs.size(); ++i)
                so.probs[i] = static_cast<T>(
                    std::exp(static_cast<double>(so.logp.data()[i])));
            so.argmax = 0;
            for (std::size_t i = 1; i < so.probs.size(); ++i)
                if (so.probs[i] > so.probs[so.argmax])
                    so.argmax = static_cast<int>(i);
            turn_out.slots.push_back(std::move(so));
        }
        out.push_back(std::move(turn_out));
    }
    return out;
}

// Label for (turn, slot); slots absent from the label map mean "none".
inline const std::string& label_or_none(const corpus::Turn& turn,
                                        const std::string& slot) {
    static const std::string none = "none";
    auto it = turn.labels.find(slot);
    return it == turn.labels.end() ? none : it->second;
}

// Negative log likelihood summed over every turn and every tracked slot.
template <typename T>
Tensor<T> dialog_loss(const std::vector<BeliefTurnOutput<T>>& turns,
                      const corpus::Dialog& dialog,
                      const OntologyEmbeddings<T>& cache) {
    namespace nc = sumbt::numcore;
    std::vector<Tensor<T>> terms;
    for (std::size_t t = 0; t < turns.size(); ++t) {
        for (const auto& so : turns[t].slots) {
            const std::string& label = label_or_none(dialog.turns[t], so.slot);
            const int idx = cache.value_index(so.slot, label);
            if (idx < 0)
                throw DataError("label '" + label +
                                "' not in candidate set of slot '" + so.slot +
                                "'");
            terms.push_back(nc::pick(so.logp, idx));
        }
    }
    return nc::scale(nc::sum_scalars(std::span<const Tensor<T>>(terms)),
                     T(-1));
}

}  // namespace sumbt::tracker
