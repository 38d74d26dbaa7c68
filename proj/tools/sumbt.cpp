// Command-line front door: corpus generation, masked pretraining, training,
// evaluation, zero-shot ontology expansion, attention dumps and gradient
// checks. Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sumbt/corpus/generator.hpp"
#include "sumbt/io/checkpoint.hpp"
#include "sumbt/model/gradcheck_suite.hpp"
#include "sumbt/training/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sumbt;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

struct GenerateArgs {
    std::string spec_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& args) {
    corpus::GeneratorSpec spec = args.spec_path.empty()
                                     ? corpus::default_generator_spec()
                                     : corpus::load_generator_spec(args.spec_path);
    if (args.seed) spec.seed = *args.seed;
    spec.validate();
    auto generated = corpus::generate_synthetic(spec);
    corpus::split_dialogs(generated.dialogs, spec.split_ratios, spec.seed);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    corpus::save_ontology(generated.ontology, (out / "ontology.json").string());
    corpus::save_corpus(generated.dialogs, (out / "corpus.json").string());
    write_text(out / "generator_spec.json",
               corpus::generator_spec_to_json(spec));

    std::size_t train = 0, dev = 0, test = 0;
    for (const auto& d : generated.dialogs) {
        if (d.split == "train") ++train;
        else if (d.split == "dev") ++dev;
        else ++test;
    }
    std::cout << "dialogs " << generated.stats.dialog_count << " (train "
              << train << ", dev " << dev << ", test " << test << ")\n"
              << "turns " << generated.stats.turn_count << "\n"
              << "slots " << generated.ontology.slots.size() << ", candidates "
              << generated.ontology.total_values() << "\n"
              << "value mentions " << generated.stats.value_mentions
              << ", paraphrased " << generated.stats.paraphrased << " ("
              << 100.0 * generated.stats.paraphrase_rate() << "%)\n";
    return 0;
}

struct PretrainArgs {
    std::string config_path;
    std::string corpus_path;
    std::string ontology_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

int cmd_pretrain(const PretrainArgs& args) {
    training::RunConfig cfg = args.config_path.empty()
                                  ? training::RunConfig{}
                                  : training::load_run_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    auto [ont, dialogs] = corpus::load_woz(args.corpus_path, args.ontology_path);
    const auto train_set = corpus::dialogs_with_split(dialogs, "train");
    if (train_set.empty()) throw DataError("corpus has no train split");

    auto vocab = training::build_vocabulary(dialogs, ont);
    numcore::Rng rng(cfg.seed);
    encoder::EncoderWeights<float> enc;
    {
        numcore::Rng init_rng = rng.fork(1);
        enc.init(cfg.enc, vocab.size(), init_rng);
    }
    std::vector<std::vector<int>> sentences;
    for (const auto& text : encoder::pretraining_texts(train_set, ont))
        sentences.push_back(vocab.tokenize(text));
    numcore::Rng pre_rng = rng.fork(2);
    auto stats = encoder::pretrain_masked(enc, sentences, cfg.pretrain, pre_rng);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    io::save_encoder(enc, vocab, (out / "encoder.bin").string());
    write_text(out / "resolved_config.json", training::run_config_to_json(cfg));
    json report = {{"initial_loss", stats.initial_loss},
                   {"final_loss", stats.final_loss},
                   {"steps_run", stats.steps_run},
                   {"vocab_size", vocab.size()}};
    write_text(out / "pretrain_report.json", report.dump(2) + "\n");
    std::cout << "pretrain loss " << stats.initial_loss << " -> "
              << stats.final_loss << " over " << stats.steps_run << " steps\n"
              << "encoder written to " << (out / "encoder.bin").string()
              << "\n";
    return 0;
}

struct TrainArgs {
    std::string config_path;
    std::string corpus_path;
    std::string ontology_path;
    std::string out_dir;
    std::string pretrained_path;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

int cmd_train(const TrainArgs& args) {
    training::RunConfig cfg = args.config_path.empty()
                                  ? training::RunConfig{}
                                  : training::load_run_config(args.config_path);
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.seeds.clear();
    }
    auto [ont, dialogs] = corpus::load_woz(args.corpus_path, args.ontology_path);

    std::optional<io::LoadedEncoder> pretrained;
    if (!args.pretrained_path.empty()) {
        pretrained = io::load_encoder(args.pretrained_path);
        if (pretrained->weights.cfg.dim != cfg.enc.dim ||
            pretrained->weights.cfg.n_layers != cfg.enc.n_layers ||
            pretrained->weights.cfg.n_heads != cfg.enc.n_heads ||
            pretrained->weights.cfg.ff_dim != cfg.enc.ff_dim ||
            pretrained->weights.cfg.max_len != cfg.enc.max_len)
            throw ConfigError(
                "pretrained encoder dimensions do not match the config");
    }

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    write_text(out / "resolved_config.json", training::run_config_to_json(cfg));
    std::ostream* log = args.quiet ? nullptr : &std::cout;

    const auto seeds = cfg.seed_list();
    std::vector<training::SeedRun> runs;
    for (std::uint64_t seed : seeds) {
        if (log)
            *log << "== " << model::to_string(cfg.kind) << " seed " << seed
                 << " ==\n";
        auto run = training::run_seed(
            cfg.kind, ont, dialogs, cfg, seed, log,
            pretrained ? &pretrained->weights : nullptr,
            pretrained ? &pretrained->vocab : nullptr);
        const std::string tag =
            seeds.size() == 1 ? "" : "-seed" + std::to_string(seed);
        io::save_model(*run.model, (out / ("checkpoint" + tag + ".bin")).string());
        write_text(out / ("report" + tag + ".json"),
                   training::seed_report_to_json(run, cfg));
        write_text(out / ("epochs" + tag + ".csv"),
                   training::epoch_log_to_csv(run.train));
        std::cout << "seed " << seed << ": test joint accuracy "
                  << run.test.joint_accuracy << " (dev loss "
                  << run.train.best_dev_loss << ", epochs "
                  << run.train.epochs_run << ")\n";
        runs.push_back(std::move(run));
    }
    if (seeds.size() > 1) {
        auto report = training::summarize_experiment(cfg.kind, runs);
        write_text(out / "experiment_report.json",
                   training::experiment_report_to_json(report));
        std::cout << "mean joint accuracy " << report.mean << " +/- "
                  << report.stddev << " over " << seeds.size() << " seeds\n";
    }
    return 0;
}

struct EvalArgs {
    std::string checkpoint_path;
    std::string corpus_path;
    std::string ontology_path;
    std::string split = "test";
    std::string out_path;
    int threads = 2;
};

int cmd_eval(const EvalArgs& args) {
    auto loaded = io::load_model(args.checkpoint_path);
    corpus::Ontology ont = args.ontology_path.empty()
                               ? loaded.ontology
                               : corpus::load_ontology(args.ontology_path);
    const std::string stored = corpus::ontology_to_json(loaded.ontology);
    if (corpus::ontology_to_json(ont) != stored)
        loaded.model->expand_ontology(ont);  // zero-shot for the tracker;
                                             // parametric heads refuse

    auto dialogs = corpus::load_corpus(args.corpus_path);
    corpus::validate_corpus(dialogs, loaded.model->current_ontology());
    if (args.split != "all")
        dialogs = corpus::dialogs_with_split(dialogs, args.split);
    if (dialogs.empty()) throw DataError("no dialogs in split " + args.split);

    auto summary = training::evaluate_model(*loaded.model, dialogs, args.threads);
    std::cout << "model " << model::to_string(loaded.model->kind()) << ", "
              << dialogs.size() << " dialogs, " << summary.turn_count
              << " turns\n";
    std::cout << "joint goal accuracy " << summary.joint_accuracy << "\n";
    for (const auto& [slot, acc] : summary.per_slot_accuracy)
        std::cout << "  " << slot << " " << acc << "\n";
    std::cout << "loss " << summary.loss << "\n";
    if (!args.out_path.empty()) {
        json j = {{"model", model::to_string(loaded.model->kind())},
                  {"checkpoint", args.checkpoint_path},
                  {"split", args.split},
                  {"joint_accuracy", summary.joint_accuracy},
                  {"per_slot_accuracy", summary.per_slot_accuracy},
                  {"loss", summary.loss},
                  {"dialog_count", summary.dialog_count},
                  {"turn_count", summary.turn_count}};
        write_text(args.out_path, j.dump(2) + "\n");
    }
    return 0;
}

struct ExpandArgs {
    std::string checkpoint_path;
    std::string ontology_path;
    std::string out_path;
};

int cmd_expand(const ExpandArgs& args) {
    auto loaded = io::load_model(args.checkpoint_path);
    auto grown = corpus::load_ontology(args.ontology_path);
    const std::size_t before = loaded.model->current_ontology().total_values();
    loaded.model->expand_ontology(grown);
    const std::size_t after = loaded.model->current_ontology().total_values();
    io::save_model(*loaded.model, args.out_path);
    std::cout << "expanded ontology: " << before << " -> " << after
              << " candidate values, no trainable parameters touched\n"
              << "checkpoint written to " << args.out_path << "\n";
    return 0;
}

struct DumpArgs {
    std::string checkpoint_path;
    std::string corpus_path;
    std::string dialog_id;
    std::string out_dir;
};

int cmd_dump_attention(const DumpArgs& args) {
    auto loaded = io::load_model(args.checkpoint_path);
    auto dialogs = corpus::load_corpus(args.corpus_path);
    const corpus::Dialog* dialog = nullptr;
    for (const auto& d : dialogs)
        if (d.id == args.dialog_id) dialog = &d;
    if (!dialog) throw DataError("unknown dialog id: " + args.dialog_id);
    corpus::validate_corpus({*dialog}, loaded.model->current_ontology());

    auto records = loaded.model->attention_records(*dialog);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);

    std::ofstream jsonl(out / "attention.jsonl", std::ios::binary);
    std::ofstream csv(out / "attention.csv", std::ios::binary);
    csv << "dialog,turn,slot,head,position,token,weight\n";
    csv.precision(9);
    for (const auto& r : records) {
        json j = {{"dialog", r.dialog_id}, {"turn", r.turn}, {"slot", r.slot},
                  {"head", r.head},        {"tokens", r.tokens},
                  {"weights", r.weights}};
        jsonl << j.dump() << "\n";
        for (std::size_t i = 0; i < r.tokens.size(); ++i)
            csv << r.dialog_id << "," << r.turn << ",\"" << r.slot << "\","
                << r.head << "," << i << ",\"" << r.tokens[i] << "\","
                << r.weights[i] << "\n";
    }
    json meta = {{"checkpoint", args.checkpoint_path},
                 {"dialog", args.dialog_id},
                 {"records", records.size()}};
    write_text(out / "dump_info.json", meta.dump(2) + "\n");
    std::cout << "wrote " << records.size() << " attention records to "
              << out.string() << "\n";
    return 0;
}

int cmd_gradcheck(bool end_to_end_only) {
    auto cases =
        end_to_end_only
            ? std::vector<model::GradCheckCase>{model::run_end_to_end_gradcheck()}
            : model::run_gradcheck_suite();
    bool all_ok = true;
    for (const auto& c : cases) {
        std::cout << (c.pass ? "[ok]   " : "[FAIL] ") << c.name
                  << "  max rel err " << c.max_rel_err << " (tol "
                  << c.tolerance << ")\n";
        all_ok = all_ok && c.pass;
    }
    if (!all_ok) {
        std::cerr << "gradient check failed\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slot-utterance matching belief tracker"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand(
        "generate", "generate a synthetic dialog corpus + ontology");
    generate->add_option("--spec", gen.spec_path,
                         "generator spec JSON (defaults built in)");
    generate->add_option("--out", gen.out_dir, "output directory")->required();
    std::uint64_t gen_seed = 0;
    auto* gen_seed_opt =
        generate->add_option("--seed", gen_seed, "override the spec seed");

    PretrainArgs pre;
    auto* pretrain = app.add_subcommand(
        "pretrain", "masked-token pretraining of the encoder");
    pretrain->add_option("--config", pre.config_path, "run config JSON");
    pretrain->add_option("--corpus", pre.corpus_path, "corpus JSON")->required();
    pretrain->add_option("--ontology", pre.ontology_path, "ontology JSON")
        ->required();
    pretrain->add_option("--out", pre.out_dir, "output directory")->required();
    std::uint64_t pre_seed = 0;
    auto* pre_seed_opt = pretrain->add_option("--seed", pre_seed, "seed");

    TrainArgs trn;
    auto* train = app.add_subcommand("train", "train a belief tracker");
    train->add_option("--config", trn.config_path, "run config JSON");
    train->add_option("--corpus", trn.corpus_path, "corpus JSON")->required();
    train->add_option("--ontology", trn.ontology_path, "ontology JSON")
        ->required();
    train->add_option("--out", trn.out_dir, "output directory")->required();
    train->add_option("--pretrained", trn.pretrained_path,
                      "encoder.bin from a pretrain run");
    std::uint64_t trn_seed = 0;
    auto* trn_seed_opt = train->add_option("--seed", trn_seed, "seed override");
    train->add_flag("--quiet", trn.quiet, "suppress per-epoch logging");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", ev.checkpoint_path, "checkpoint file")
        ->required();
    eval->add_option("--corpus", ev.corpus_path, "corpus JSON")->required();
    eval->add_option("--ontology", ev.ontology_path,
                     "ontology JSON (may be expanded for zero-shot)");
    eval->add_option("--split", ev.split, "train | dev | test | all");
    eval->add_option("--out", ev.out_path, "write metrics JSON here");
    eval->add_option("--threads", ev.threads, "evaluation workers");

    ExpandArgs ex;
    auto* expand = app.add_subcommand(
        "expand", "grow a checkpoint's ontology without retraining");
    expand->add_option("--checkpoint", ex.checkpoint_path, "checkpoint file")
        ->required();
    expand->add_option("--ontology", ex.ontology_path, "grown ontology JSON")
        ->required();
    expand->add_option("--out", ex.out_path, "output checkpoint")->required();

    DumpArgs dmp;
    auto* dump = app.add_subcommand("dump-attention",
                                    "emit per-head attention records");
    dump->add_option("--checkpoint", dmp.checkpoint_path, "checkpoint file")
        ->required();
    dump->add_option("--corpus", dmp.corpus_path, "corpus JSON")->required();
    dump->add_option("--dialog", dmp.dialog_id, "dialog id")->required();
    dump->add_option("--out", dmp.out_dir, "output directory")->required();

    bool e2e_only = false;
    auto* gradcheck = app.add_subcommand(
        "gradcheck", "finite-difference validation of gradients");
    gradcheck->add_flag("--end-to-end-only", e2e_only,
                        "skip the per-op checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*generate) {
            if (*gen_seed_opt) gen.seed = gen_seed;
            return cmd_generate(gen);
        }
        if (*pretrain) {
            if (*pre_seed_opt) pre.seed = pre_seed;
            return cmd_pretrain(pre);
        }
        if (*train) {
            if (*trn_seed_opt) trn.seed = trn_seed;
            return cmd_train(trn);
        }
        if (*eval) return cmd_eval(ev);
        if (*expand) return cmd_expand(ex);
        if (*dump) return cmd_dump_attention(dmp);
        if (*gradcheck) return cmd_gradcheck(e2e_only);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IncompatibleModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
