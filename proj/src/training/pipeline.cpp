#include "sumbt/training/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sumbt::training {

using nlohmann::json;

using tracker::cell_from_string;
using tracker::metric_from_string;
using tracker::to_string;

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
    RunConfig cfg;
    std::vector<std::string> problems;
    auto guard = [&problems](const std::string& what, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            problems.push_back(what + ": " + e.what());
        }
    };
    if (j.contains("encoder")) {
        const auto& e = j["encoder"];
        cfg.enc.n_layers = e.value("layers", cfg.enc.n_layers);
        cfg.enc.dim = e.value("dim", cfg.enc.dim);
        cfg.enc.n_heads = e.value("heads", cfg.enc.n_heads);
        cfg.enc.ff_dim = e.value("ff", cfg.enc.ff_dim);
        cfg.enc.max_len = e.value("max_len", cfg.enc.max_len);
    }
    if (j.contains("tracker")) {
        const auto& t = j["tracker"];
        cfg.trk.n_heads = t.value("heads", cfg.trk.n_heads);
        if (t.contains("cell"))
            guard("tracker.cell", [&] {
                cfg.trk.cell = cell_from_string(t["cell"].get<std::string>());
            });
        if (t.contains("metric"))
            guard("tracker.metric", [&] {
                cfg.trk.metric =
                    metric_from_string(t["metric"].get<std::string>());
            });
    }
    if (j.contains("pretrain")) {
        const auto& p = j["pretrain"];
        cfg.pretrain.steps = p.value("steps", cfg.pretrain.steps);
        cfg.pretrain.mask_prob = p.value("mask_prob", cfg.pretrain.mask_prob);
        cfg.pretrain.lr = p.value("lr", cfg.pretrain.lr);
        cfg.pretrain.batch = p.value("batch", cfg.pretrain.batch);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        cfg.train.peak_lr = t.value("peak_lr", cfg.train.peak_lr);
        cfg.train.warmup_proportion =
            t.value("warmup_proportion", cfg.train.warmup_proportion);
        cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
        cfg.train.patience = t.value("patience", cfg.train.patience);
        cfg.train.batch_dialogs =
            t.value("batch_dialogs", cfg.train.batch_dialogs);
        cfg.train.loss_reduction =
            t.value("loss_reduction", cfg.train.loss_reduction);
        cfg.train.threads = t.value("threads", cfg.train.threads);
    }
    if (j.contains("model"))
        guard("model", [&] {
            cfg.kind = model::model_kind_from_string(j["model"].get<std::string>());
        });
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("seeds"))
        cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    guard("encoder", [&] { cfg.enc.validate(); });
    guard("train", [&] { cfg.train.validate(); });
    guard("tracker", [&] {
        if (cfg.enc.dim % cfg.trk.n_heads != 0)
            throw ConfigError("encoder dim must be divisible by tracker heads");
    });
    if (!problems.empty()) {
        std::string msg = "run config validation failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["encoder"] = {{"layers", cfg.enc.n_layers},
                    {"dim", cfg.enc.dim},
                    {"heads", cfg.enc.n_heads},
                    {"ff", cfg.enc.ff_dim},
                    {"max_len", cfg.enc.max_len}};
    j["tracker"] = {{"heads", cfg.trk.n_heads},
                    {"cell", to_string(cfg.trk.cell)},
                    {"metric", to_string(cfg.trk.metric)}};
    j["pretrain"] = {{"steps", cfg.pretrain.steps},
                     {"mask_prob", cfg.pretrain.mask_prob},
                     {"lr", cfg.pretrain.lr},
                     {"batch", cfg.pretrain.batch}};
    j["train"] = {{"peak_lr", cfg.train.peak_lr},
                  {"warmup_proportion", cfg.train.warmup_proportion},
                  {"max_epochs", cfg.train.max_epochs},
                  {"patience", cfg.train.patience},
                  {"batch_dialogs", cfg.train.batch_dialogs},
                  {"loss_reduction", cfg.train.loss_reduction},
                  {"threads", cfg.train.threads}};
    j["model"] = model::to_string(cfg.kind);
    j["seed"] = cfg.seed;
    if (!cfg.seeds.empty()) j["seeds"] = cfg.seeds;
    return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

encoder::Vocabulary build_vocabulary(const std::vector<corpus::Dialog>& dialogs,
                                     const corpus::Ontology& ont) {
    encoder::Vocabulary vocab;
    for (const auto& d : dialogs) {
        for (const auto& t : d.turns) {
            vocab.add_text(t.system);
            vocab.add_text(t.user);
        }
    }
    for (const auto& s : ont.slots) {
        vocab.add_text(s.phrase());
        for (const auto& v : s.values) vocab.add_text(v);
    }
    return vocab;
}

SeedRun run_seed(model::ModelKind kind, const corpus::Ontology& ont,
                 const std::vector<corpus::Dialog>& dialogs,
                 const RunConfig& cfg, std::uint64_t seed, std::ostream* log,
                 const encoder::EncoderWeights<float>* pretrained,
                 const encoder::Vocabulary* pretrained_vocab) {
    corpus::validate_corpus(dialogs, ont);
    const auto train_set = corpus::dialogs_with_split(dialogs, "train");
    const auto dev_set = corpus::dialogs_with_split(dialogs, "dev");
    const auto test_set = corpus::dialogs_with_split(dialogs, "test");
    if (train_set.empty()) throw DataError("corpus has no train split");

    SeedRun run;
    run.seed = seed;
    numcore::Rng rng(seed);

    auto vocab = std::make_shared<encoder::Vocabulary>(
        build_vocabulary(dialogs, ont));

    encoder::EncoderWeights<float> enc;
    if (pretrained) {
        if (pretrained_vocab && !(*pretrained_vocab == *vocab))
            throw DataError(
                "pretrained encoder vocabulary does not match the corpus");
        enc = pretrained->deep_copy();
        enc.frozen = false;
        enc.visit([](const std::string&, numcore::Tensor<float>& t) {
            t.set_requires_grad(true);
        });
        rng.fork(1);
        rng.fork(2);  // keep downstream seeding aligned with the inline path
    } else {
        numcore::Rng init_rng = rng.fork(1);
        enc.init(cfg.enc, vocab->size(), init_rng);
        std::vector<std::vector<int>> sentences;
        for (const auto& text : encoder::pretraining_texts(train_set, ont))
            sentences.push_back(vocab->tokenize(text));
        numcore::Rng pre_rng = rng.fork(2);
        run.pretrain =
            encoder::pretrain_masked(enc, sentences, cfg.pretrain, pre_rng);
        if (log && cfg.pretrain.steps > 0)
            *log << "pretrain loss " << run.pretrain.initial_loss << " -> "
                 << run.pretrain.final_loss << "\n";
    }

    auto frozen = std::make_shared<const encoder::EncoderWeights<float>>(
        enc.freeze_snapshot());
    auto cache = std::make_shared<const tracker::OntologyEmbeddings<float>>(
        tracker::OntologyEmbeddings<float>::build(ont, *frozen, *vocab));

    model::ModelParts<float> parts;
    parts.vocab = vocab;
    parts.enc_cfg = cfg.enc;
    parts.trk_cfg = cfg.trk;
    parts.frozen = frozen;
    parts.utterance_init = std::move(enc);
    parts.cache = cache;
    parts.ontology = ont;
    numcore::Rng model_rng = rng.fork(3);
    run.model = model::make_model(kind, std::move(parts), model_rng);

    run.train = train_model(*run.model, train_set, dev_set, cfg.train,
                            rng.fork(4).next_u64(), log);
    run.dev = evaluate_model(*run.model, dev_set, cfg.train.threads);
    run.test = evaluate_model(*run.model, test_set, cfg.train.threads);
    return run;
}

ExperimentReport summarize_experiment(model::ModelKind kind,
                                      const std::vector<SeedRun>& runs) {
    ExperimentReport report;
    report.kind = model::to_string(kind);
    for (const auto& r : runs) {
        report.seeds.push_back(r.seed);
        report.joint_accuracies.push_back(r.test.joint_accuracy);
        report.test_summaries.push_back(r.test);
    }
    const std::size_t n = report.joint_accuracies.size();
    if (n > 0) {
        double sum = 0.0;
        for (double a : report.joint_accuracies) sum += a;
        report.mean = sum / static_cast<double>(n);
        if (n > 1) {
            double ss = 0.0;
            for (double a : report.joint_accuracies)
                ss += (a - report.mean) * (a - report.mean);
            report.stddev = std::sqrt(ss / static_cast<double>(n - 1));
        }
    }
    return report;
}

ExperimentReport run_experiment(model::ModelKind kind,
                                const corpus::Ontology& ont,
                                const std::vector<corpus::Dialog>& dialogs,
                                const RunConfig& cfg, std::ostream* log) {
    std::vector<SeedRun> runs;
    for (std::uint64_t seed : cfg.seed_list()) {
        if (log)
            *log << "== " << model::to_string(kind) << " seed " << seed
                 << " ==\n";
        runs.push_back(run_seed(kind, ont, dialogs, cfg, seed, log));
    }
    return summarize_experiment(kind, runs);
}

namespace {

json summary_to_json(const EvalSummary& s) {
    json j;
    j["loss"] = s.loss;
    j["joint_accuracy"] = s.joint_accuracy;
    j["per_slot_accuracy"] = s.per_slot_accuracy;
    j["dialog_count"] = s.dialog_count;
    j["turn_count"] = s.turn_count;
    return j;
}

EvalSummary summary_from_json(const json& j) {
    EvalSummary s;
    s.loss = j.value("loss", 0.0);
    s.joint_accuracy = j.value("joint_accuracy", 0.0);
    if (j.contains("per_slot_accuracy"))
        s.per_slot_accuracy =
            j["per_slot_accuracy"].get<std::map<std::string, double>>();
    s.dialog_count = j.value("dialog_count", std::size_t{0});
    s.turn_count = j.value("turn_count", std::size_t{0});
    return s;
}

}  // namespace

std::string seed_report_to_json(const SeedRun& run, const RunConfig& cfg) {
    json j;
    j["seed"] = run.seed;
    j["model"] = model::to_string(cfg.kind);
    j["pretrain"] = {{"initial_loss", run.pretrain.initial_loss},
                     {"final_loss", run.pretrain.final_loss},
                     {"steps_run", run.pretrain.steps_run}};
    j["train"] = {{"epochs_run", run.train.epochs_run},
                  {"best_epoch", run.train.best_epoch},
                  {"best_dev_loss", run.train.best_dev_loss},
                  {"diverged", run.train.diverged}};
    j["dev"] = summary_to_json(run.dev);
    j["test"] = summary_to_json(run.test);
    return j.dump(2) + "\n";
}

std::string experiment_report_to_json(const ExperimentReport& report) {
    json j;
    j["kind"] = report.kind;
    j["seeds"] = report.seeds;
    j["joint_accuracies"] = report.joint_accuracies;
    j["mean"] = report.mean;
    j["stddev"] = report.stddev;
    j["test_summaries"] = json::array();
    for (const auto& s : report.test_summaries)
        j["test_summaries"].push_back(summary_to_json(s));
    return j.dump(2) + "\n";
}

ExperimentReport parse_experiment_report(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed experiment report: ") + e.what());
    }
    ExperimentReport report;
    report.kind = j.value("kind", std::string());
    report.seeds = j.value("seeds", std::vector<std::uint64_t>());
    report.joint_accuracies =
        j.value("joint_accuracies", std::vector<double>());
    report.mean = j.value("mean", 0.0);
    report.stddev = j.value("stddev", 0.0);
    if (j.contains("test_summaries"))
        for (const auto& s : j["test_summaries"])
            report.test_summaries.push_back(summary_from_json(s));
    return report;
}

std::string epoch_log_to_csv(const TrainResult& result) {
    std::ostringstream os;
    os << "epoch,lr,train_loss,dev_loss,dev_joint_accuracy\n";
    os.precision(10);
    for (const auto& row : result.log)
        os << row.epoch << "," << row.lr << "," << row.train_loss << ","
           << row.dev_loss << "," << row.dev_joint_accuracy << "\n";
    return os.str();
}

}  // namespace sumbt::training
