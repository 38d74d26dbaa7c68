#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "sumbt/corpus/corpus.hpp"
#include "sumbt/encoder/pretrain.hpp"
#include "sumbt/model/factory.hpp"
#include "sumbt/training/trainer.hpp"

// End-to-end single-seed and multi-seed drivers: vocabulary, masked
// pretraining, frozen snapshot, model construction, training, evaluation.
// All randomness funnels through one seed, so reruns reproduce every number.
namespace sumbt::training {

struct RunConfig {
    encoder::EncoderConfig enc;
    tracker::TrackerConfig trk;
    encoder::PretrainConfig pretrain;
    TrainConfig train;
    model::ModelKind kind = model::ModelKind::Sumbt;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds;  // multi-seed experiments; empty = {seed}

    std::vector<std::uint64_t> seed_list() const {
        return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
    }
};

RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

// Vocabulary closed over the corpus text plus ontology phrases and values.
encoder::Vocabulary build_vocabulary(const std::vector<corpus::Dialog>& dialogs,
                                     const corpus::Ontology& ont);

struct SeedRun {
    std::uint64_t seed = 0;
    encoder::PretrainStats pretrain;
    TrainResult train;
    EvalSummary dev;
    EvalSummary test;
    std::unique_ptr<model::BeliefModel<float>> model;
};

// When `pretrained` is given, inline masked pretraining is skipped and the
// encoder starts from that snapshot; its vocabulary must match the corpus.
SeedRun run_seed(model::ModelKind kind, const corpus::Ontology& ont,
                 const std::vector<corpus::Dialog>& dialogs,
                 const RunConfig& cfg, std::uint64_t seed,
                 std::ostream* log = nullptr,
                 const encoder::EncoderWeights<float>* pretrained = nullptr,
                 const encoder::Vocabulary* pretrained_vocab = nullptr);

struct ExperimentReport {
    std::string kind;
    std::vector<std::uint64_t> seeds;
    std::vector<double> joint_accuracies;  // test split, one per seed
    std::vector<EvalSummary> test_summaries;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for one seed
};

ExperimentReport summarize_experiment(model::ModelKind kind,
                                      const std::vector<SeedRun>& runs);

ExperimentReport run_experiment(model::ModelKind kind,
                                const corpus::Ontology& ont,
                                const std::vector<corpus::Dialog>& dialogs,
                                const RunConfig& cfg, std::ostream* log = nullptr);

// Report serialization (metrics report JSON and per-epoch CSV).
std::string seed_report_to_json(const SeedRun& run, const RunConfig& cfg);
std::string experiment_report_to_json(const ExperimentReport& report);
ExperimentReport parse_experiment_report(const std::string& json_text);
std::string epoch_log_to_csv(const TrainResult& result);

}  // namespace sumbt::training
