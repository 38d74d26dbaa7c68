#pragma once

#include <memory>

#include "sumbt/baselines/baselines.hpp"
#include "sumbt/model/sumbt_net.hpp"

namespace sumbt::model {

// Everything a model needs besides its own head weights. The frozen snapshot
// and the value cache are shared between models (and between the per-slot
// copies of the slot-dependent baseline).
template <typename T>
struct ModelParts {
    std::shared_ptr<const encoder::Vocabulary> vocab;
    encoder::EncoderConfig enc_cfg;
    tracker::TrackerConfig trk_cfg;
    std::shared_ptr<const encoder::EncoderWeights<T>> frozen;
    encoder::EncoderWeights<T> utterance_init;
    std::shared_ptr<const tracker::OntologyEmbeddings<T>> cache;
    corpus::Ontology ontology;
};

template <typename T>
std::unique_ptr<BeliefModel<T>> make_model(ModelKind kind, ModelParts<T> parts,
                                           numcore::Rng& rng) {
    const int d = parts.enc_cfg.dim;
    switch (kind) {
        case ModelKind::Sumbt: {
            tracker::TrackerWeights<T> trk;
            trk.init(parts.trk_cfg, d, rng);
            return std::make_unique<SumbtNet<T>>(
                parts.vocab, std::move(parts.utterance_init), parts.frozen,
                parts.cache, std::move(trk));
        }
        case ModelKind::SlotDependentSumbt: {
            std::vector<std::unique_ptr<SumbtNet<T>>> subs;
            std::vector<std::string> order;
            int i = 0;
            for (const auto& slot : parts.cache->slots()) {
                tracker::TrackerWeights<T> trk;
                trk.init(parts.trk_cfg, d, rng);
                subs.push_back(std::make_unique<SumbtNet<T>>(
                    parts.vocab, parts.utterance_init.deep_copy(),
                    parts.frozen, parts.cache, std::move(trk),
                    std::set<std::string>{slot.name},
                    "slot" + std::to_string(i) + "."));
                order.push_back(slot.name);
                ++i;
            }
            return std::make_unique<baselines::SlotDependentNet<T>>(
                std::move(subs), std::move(order));
        }
        case ModelKind::BertRnn:
        case ModelKind::BertRnnOntology: {
            baselines::BaselineWeights<T> w;
            w.init(d, parts.trk_cfg.cell, parts.ontology, rng);
            return std::make_unique<baselines::BertRnnNet<T>>(
                parts.vocab, std::move(parts.utterance_init), parts.frozen,
                parts.cache, std::move(w), parts.ontology,
                kind == ModelKind::BertRnnOntology);
        }
    }
    throw ConfigError("unhandled model kind");
}

}  // namespace sumbt::model
