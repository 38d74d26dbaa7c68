#pragma once

#include <memory>
#include <string>

#include "sumbt/model/model.hpp"

namespace sumbt::io {

// Versioned binary checkpoint: model kind, encoder/tracker configs, the
// training ontology, the vocabulary, and every tensor (trainable and frozen)
// as raw IEEE bytes. Round-trips bitwise.
void save_model(model::BeliefModel<float>& m, const std::string& path);

struct LoadedModel {
    std::unique_ptr<model::BeliefModel<float>> model;
    model::ModelKind kind;
    corpus::Ontology ontology;
};

LoadedModel load_model(const std::string& path);

// Encoder-only artifact produced by the pretrain command and consumed by
// train --pretrained.
void save_encoder(const encoder::EncoderWeights<float>& w,
                  const encoder::Vocabulary& vocab, const std::string& path);

struct LoadedEncoder {
    encoder::EncoderWeights<float> weights;
    encoder::Vocabulary vocab;
};

LoadedEncoder load_encoder(const std::string& path);

}  // namespace sumbt::io
