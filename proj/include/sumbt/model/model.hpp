#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sumbt/corpus/corpus.hpp"
#include "sumbt/encoder/encoder.hpp"
#include "sumbt/encoder/vocab.hpp"
#include "sumbt/errors.hpp"
#include "sumbt/numcore/tensor.hpp"
#include "sumbt/tracker/tracker.hpp"

namespace sumbt::model {

enum class ModelKind { Sumbt, SlotDependentSumbt, BertRnn, BertRnnOntology };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Sumbt: return "sumbt";
        case ModelKind::SlotDependentSumbt: return "slot-dependent-sumbt";
        case ModelKind::BertRnn: return "bert-rnn";
        case ModelKind::BertRnnOntology: return "bert-rnn-ontology";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "sumbt") return ModelKind::Sumbt;
    if (s == "slot-dependent-sumbt") return ModelKind::SlotDependentSumbt;
    if (s == "bert-rnn") return ModelKind::BertRnn;
    if (s == "bert-rnn-ontology") return ModelKind::BertRnnOntology;
    throw ConfigError("unknown model kind '" + s +
                      "' (expected sumbt | slot-dependent-sumbt | bert-rnn | "
                      "bert-rnn-ontology)");
}

struct SlotPrediction {
    std::string slot;
    int value_index = 0;
    // Mean over heads of attention mass on [CLS]/[SEP]; 0 for models
    // without attention.
    double special_mass = 0.0;
};

struct TurnPrediction {
    std::vector<SlotPrediction> slots;
};

struct DialogEval {
    std::string dialog_id;
    double loss = 0.0;  // negative log likelihood over all turns and slots
    std::vector<TurnPrediction> turns;
};

struct AttentionRecord {
    std::string dialog_id;
    int turn = 0;
    std::string slot;
    int head = 0;
    std::vector<std::string> tokens;
    std::vector<double> weights;
};

// Common surface of the tracker and the baselines: the training loop, the
// evaluator, the checkpoint writer and the CLI only see this.
template <typename T>
class BeliefModel {
  public:
    using ParamVisitor =
        std::function<void(const std::string&, numcore::Tensor<T>&)>;

    virtual ~BeliefModel() = default;

    virtual ModelKind kind() const = 0;
    virtual const encoder::Vocabulary& vocab() const = 0;
    virtual encoder::EncoderConfig encoder_config() const = 0;
    virtual tracker::TrackerConfig tracker_config() const = 0;
    virtual corpus::Ontology current_ontology() const = 0;
    virtual std::vector<std::string> slot_names() const = 0;
    virtual const std::vector<std::string>& value_names(
        const std::string& slot) const = 0;

    // Forward without recording; predictions plus the dialog's loss value.
    virtual DialogEval evaluate(const corpus::Dialog& dialog) const = 0;

    // Loss tensor recorded on the caller's active tape.
    virtual numcore::Tensor<T> loss(const corpus::Dialog& dialog) = 0;

    virtual void visit_trainable(const ParamVisitor& f) = 0;
    // Frozen twin tensors (named with a "frozen." prefix) for checkpoints.
    virtual void visit_frozen(const ParamVisitor& f) = 0;

    // Deep copy of trainable state; frozen parts are shared.
    virtual std::unique_ptr<BeliefModel<T>> clone() const = 0;

    // Grow candidate sets / slots by pure encoding. Parametric heads throw
    // IncompatibleModelError.
    virtual void expand_ontology(const corpus::Ontology& grown) = 0;

    virtual std::vector<AttentionRecord> attention_records(
        const corpus::Dialog& dialog) const {
        (void)dialog;
        throw DataError("model kind '" + to_string(kind()) +
                        "' has no attention to dump");
    }

    std::size_t trainable_param_count() {
        std::size_t n = 0;
        visit_trainable(
            [&n](const std::string&, numcore::Tensor<T>& t) { n += t.numel(); });
        return n;
    }
};

}  // namespace sumbt::model
