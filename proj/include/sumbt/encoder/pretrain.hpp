#pragma once

#include <vector>

#include "sumbt/corpus/corpus.hpp"
#include "sumbt/encoder/encoder.hpp"
#include "sumbt/training/optimizer.hpp"

namespace sumbt::encoder {

// Masked-token pretraining so the frozen twin's slot/value vectors carry
// lexical co-occurrence structure. Masked positions are always replaced by
// [MASK]; at least one position per sentence is masked. Besides the
// per-position cloze, the pooled [CLS] vector predicts the first masked
// token of its sentence — the masked objective alone never touches the
// pooled position, and downstream slot/value vectors are read from it.
struct PretrainConfig {
    int steps = 2000;
    double mask_prob = 0.15;
    double lr = 1e-3;
    int batch = 8;
    double pooled_cloze_weight = 1.0;
};

struct PretrainStats {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int steps_run = 0;
};

template <typename T>
PretrainStats pretrain_masked(EncoderWeights<T>& w,
                              const std::vector<std::vector<int>>& sentences,
                              const PretrainConfig& cfg, Rng& rng) {
    namespace nc = sumbt::numcore;
    if (cfg.mask_prob <= 0.0 || cfg.mask_prob >= 1.0)
        throw ConfigError("mask_prob must be in (0,1)");
    if (sentences.empty()) throw DataError("pretraining corpus is empty");
    PretrainStats stats;
    if (cfg.steps <= 0) return stats;

    std::vector<std::pair<std::string, Tensor<T>>> params;
    w.visit([&params](const std::string& name, Tensor<T>& t) {
        params.emplace_back(name, t);
    });
    training::Adam<T> adam;
    nc::Tape<T> tape;

    const std::size_t budget = static_cast<std::size_t>(w.cfg.max_len) - 2;
    for (int step = 0; step < cfg.steps; ++step) {
        typename nc::Tape<T>::Scope scope(tape);
        std::vector<Tensor<T>> terms;
        int masked_total = 0;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& sent = sentences[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(sentences.size())))];
            std::vector<int> ids;
            ids.push_back(Vocabulary::kCls);
            for (std::size_t i = 0; i < sent.size() && i < budget; ++i)
                ids.push_back(sent[i]);
            ids.push_back(Vocabulary::kSep);
            const int len = static_cast<int>(ids.size());
            if (len <= 2) continue;

            std::vector<int> mask_pos;
            for (int i = 1; i < len - 1; ++i)
                if (rng.bernoulli(cfg.mask_prob)) mask_pos.push_back(i);
            if (mask_pos.empty()) mask_pos.push_back(1 + rng.uniform_int(len - 2));

            std::vector<int> targets;
            std::vector<int> masked = ids;
            for (int p : mask_pos) {
                targets.push_back(ids[static_cast<std::size_t>(p)]);
                masked[static_cast<std::size_t>(p)] = Vocabulary::kMask;
            }
            const std::vector<int> segs(masked.size(), 0);
            auto states = encoder_forward(w, masked, segs);
            auto rows = nc::gather_rows(states, mask_pos);
            auto logits = nc::add_rowvec(
                nc::matmul(rows, nc::transpose(w.tok_emb)), w.mlm_bias);
            auto logp = nc::log_softmax(logits);
            terms.push_back(nc::sum(nc::select_cols(logp, targets)));
            masked_total += static_cast<int>(targets.size());

            if (cfg.pooled_cloze_weight > 0.0) {
                auto pooled = nc::slice_rows(states, 0, 1);
                auto pooled_logits = nc::add_rowvec(
                    nc::matmul(pooled, nc::transpose(w.tok_emb)), w.mlm_bias);
                auto pooled_logp = nc::log_softmax(pooled_logits);
                terms.push_back(
                    nc::scale(nc::pick(pooled_logp, targets.front()),
                              static_cast<T>(cfg.pooled_cloze_weight)));
                ++masked_total;
            }
        }
        if (terms.empty()) continue;
        auto loss =
            nc::scale(nc::sum_scalars(std::span<const Tensor<T>>(terms)),
                      static_cast<T>(-1.0 / masked_total));
        const double loss_val = static_cast<double>(loss.item());
        if (stats.steps_run == 0) stats.initial_loss = loss_val;
        stats.final_loss = loss_val;

        training::zero_grads<T>(params);
        tape.backward(loss);
        tape.clear();
        adam.step(params, cfg.lr);
        ++stats.steps_run;
    }
    return stats;
}

// Sentences used for pretraining: utterances plus ontology phrases/values,
// so every vocabulary word is seen in context.
std::vector<std::string> pretraining_texts(
    const std::vector<corpus::Dialog>& dialogs, const corpus::Ontology& ont);

}  // namespace sumbt::encoder
