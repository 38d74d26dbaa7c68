#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>

#include "sumbt/model/model.hpp"
#include "sumbt/tracker/forward.hpp"
#include "sumbt/training/metrics.hpp"
#include "sumbt/training/optimizer.hpp"
#include "sumbt/util/parallel.hpp"

namespace sumbt::training {

struct TrainConfig {
    double peak_lr = 1e-4;
    double warmup_proportion = 0.1;
    int max_epochs = 300;
    int patience = 20;  // consecutive epochs without dev-loss improvement
    int batch_dialogs = 16;
    std::string loss_reduction = "mean";  // "mean" | "sum" over dialogs
    int threads = 1;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void validate() const {
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (warmup_proportion <= 0.0 || warmup_proportion >= 1.0)
            throw ConfigError("warmup_proportion must be in (0,1)");
        if (max_epochs < 1 || batch_dialogs < 1 || threads < 1)
            throw ConfigError("bad train config");
        if (peak_lr <= 0.0) throw ConfigError("peak_lr must be positive");
        if (loss_reduction != "mean" && loss_reduction != "sum")
            throw ConfigError("loss_reduction must be 'mean' or 'sum'");
    }
};

// Stop once the monitored loss has not improved for `patience` consecutive
// epochs; the best epoch's checkpoint is what training returns.
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    bool observe(int epoch, double loss) {
        if (loss < best_) {
            best_ = loss;
            best_epoch_ = epoch;
            stagnant_ = 0;
            return true;
        }
        ++stagnant_;
        return false;
    }

    bool should_stop() const { return stagnant_ >= patience_; }
    double best() const { return best_; }
    int best_epoch() const { return best_epoch_; }

  private:
    int patience_;
    int stagnant_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
    int best_epoch_ = -1;
};

struct EpochRow {
    int epoch = 0;
    double lr = 0.0;  // rate used by the last step of the epoch
    double train_loss = 0.0;
    double dev_loss = 0.0;
    double dev_joint_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochRow> log;
    int epochs_run = 0;
    int best_epoch = -1;
    double best_dev_loss = std::numeric_limits<double>::infinity();
    bool diverged = false;
};

// Per-dialog evaluation fanned out across read-only workers; aggregation is
// in dialog order, so the numbers do not depend on the worker count.
template <typename T>
EvalSummary evaluate_model(const model::BeliefModel<T>& m,
                           const std::vector<corpus::Dialog>& dialogs,
                           int threads) {
    EvalSummary summary;
    if (dialogs.empty()) return summary;
    std::vector<model::DialogEval> evals(dialogs.size());
    util::parallel_for(static_cast<int>(dialogs.size()), threads,
                       [&](int i) { evals[i] = m.evaluate(dialogs[i]); });

    const auto slot_list = m.slot_names();
    std::map<std::string, std::pair<std::size_t, std::size_t>> slot_hits;
    double loss = 0.0;
    std::size_t joint_hits = 0, turns = 0;
    for (std::size_t di = 0; di < dialogs.size(); ++di) {
        loss += evals[di].loss;
        for (std::size_t t = 0; t < evals[di].turns.size(); ++t) {
            bool all = true;
            for (const auto& sp : evals[di].turns[t].slots) {
                const std::string& gold = tracker::label_or_none(
                    dialogs[di].turns[t], sp.slot);
                const auto& values = m.value_names(sp.slot);
                const bool hit =
                    values[static_cast<std::size_t>(sp.value_index)] == gold;
                auto& [ok, total] = slot_hits[sp.slot];
                ok += hit ? 1 : 0;
                ++total;
                all = all && hit;
            }
            joint_hits += all ? 1 : 0;
            ++turns;
        }
    }
    summary.loss = loss / static_cast<double>(dialogs.size());
    summary.joint_accuracy =
        turns == 0 ? 0.0
                   : static_cast<double>(joint_hits) / static_cast<double>(turns);
    for (const auto& [slot, hits] : slot_hits)
        summary.per_slot_accuracy[slot] =
            static_cast<double>(hits.first) / static_cast<double>(hits.second);
    summary.dialog_count = dialogs.size();
    summary.turn_count = turns;
    return summary;
}

// Minimizes the tracking loss on the train split, monitors dev loss, stops
// early after `patience` stagnant epochs, and leaves the model holding the
// best-dev parameters. Deterministic per (config, seed, corpus): batch
// gradients are computed per dialog (possibly in parallel) and reduced in
// dialog order before the single Adam step.
template <typename T>
TrainResult train_model(model::BeliefModel<T>& m,
                        const std::vector<corpus::Dialog>& train_set,
                        const std::vector<corpus::Dialog>& dev_set,
                        const TrainConfig& cfg, std::uint64_t seed,
                        std::ostream* log = nullptr) {
    namespace nc = sumbt::numcore;
    cfg.validate();
    if (train_set.empty()) throw DataError("empty training split");

    std::vector<std::pair<std::string, nc::Tensor<T>>> params;
    m.visit_trainable([&params](const std::string& name, nc::Tensor<T>& t) {
        params.emplace_back(name, t);
    });
    Adam<T> adam(cfg.beta1, cfg.beta2, cfg.eps);

    const long batches_per_epoch =
        (static_cast<long>(train_set.size()) + cfg.batch_dialogs - 1) /
        cfg.batch_dialogs;
    const long total_steps = batches_per_epoch * cfg.max_epochs;
    const long warmup_steps = std::max<long>(
        1, std::lround(cfg.warmup_proportion * static_cast<double>(total_steps)));

    EarlyStopper stopper(cfg.patience);
    TrainResult result;
    std::vector<std::vector<T>> best_values;
    auto snapshot = [&] {
        best_values.clear();
        for (auto& [name, p] : params)
            best_values.emplace_back(p.data().begin(), p.data().end());
    };
    auto restore = [&] {
        for (std::size_t i = 0; i < params.size(); ++i)
            std::copy(best_values[i].begin(), best_values[i].end(),
                      params[i].second.data().begin());
    };
    snapshot();  // epoch-0 fallback in case the very first batch diverges

    nc::Rng shuffle_rng(seed);
    long step = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs && !result.diverged; ++epoch) {
        std::vector<std::size_t> order(train_set.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        {
            nc::Rng er = shuffle_rng.fork(static_cast<std::uint64_t>(epoch));
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[static_cast<std::size_t>(
                                            er.uniform_int(static_cast<int>(i)))]);
        }

        double epoch_loss = 0.0;
        long epoch_batches = 0;
        double last_lr = 0.0;
        for (std::size_t b0 = 0; b0 < order.size() && !result.diverged;
             b0 += static_cast<std::size_t>(cfg.batch_dialogs)) {
            const std::size_t b1 = std::min(
                order.size(), b0 + static_cast<std::size_t>(cfg.batch_dialogs));
            const int bs = static_cast<int>(b1 - b0);

            std::vector<double> losses(static_cast<std::size_t>(bs));
            std::vector<std::vector<std::vector<T>>> grads(
                static_cast<std::size_t>(bs));
            util::parallel_for(bs, cfg.threads, [&](int i) {
                auto local = m.clone();
                nc::Tape<T> tape;
                typename nc::Tape<T>::Scope scope(tape);
                auto loss = local->loss(train_set[order[b0 + i]]);
                losses[static_cast<std::size_t>(i)] =
                    static_cast<double>(loss.item());
                tape.backward(loss);
                auto& slot = grads[static_cast<std::size_t>(i)];
                local->visit_trainable(
                    [&slot](const std::string&, nc::Tensor<T>& t) {
                        t.node()->ensure_grad();
                        slot.emplace_back(t.node()->grad.begin(),
                                          t.node()->grad.end());
                    });
            });

            const T reduction = cfg.loss_reduction == "mean"
                                    ? static_cast<T>(1.0 / bs)
                                    : T(1);
            zero_grads<T>(params);
            double batch_loss = 0.0;
            for (int i = 0; i < bs; ++i) {
                batch_loss += losses[static_cast<std::size_t>(i)];
                for (std::size_t p = 0; p < params.size(); ++p) {
                    auto& master = params[p].second;
                    master.node()->ensure_grad();
                    kernels::active<T>().axpy(
                        reduction, grads[static_cast<std::size_t>(i)][p].data(),
                        master.node()->grad.data(), master.numel());
                }
            }
            batch_loss *= static_cast<double>(reduction);
            epoch_loss += batch_loss;
            ++epoch_batches;

            if (std::isnan(batch_loss)) {
                result.diverged = true;
                break;
            }
            ++step;
            last_lr = lr_schedule(std::min(step, total_steps), total_steps,
                                  warmup_steps, cfg.peak_lr);
            try {
                adam.step(params, last_lr);
            } catch (const NumericError&) {
                result.diverged = true;
                break;
            }
        }
        if (result.diverged) break;

        auto dev = evaluate_model(m, dev_set, cfg.threads);
        EpochRow row;
        row.epoch = epoch;
        row.lr = last_lr;
        row.train_loss = epoch_loss / static_cast<double>(epoch_batches);
        row.dev_loss = dev.loss;
        row.dev_joint_accuracy = dev.joint_accuracy;
        result.log.push_back(row);
        result.epochs_run = epoch;
        if (log)
            *log << "epoch " << epoch << " train_loss " << row.train_loss
                 << " dev_loss " << row.dev_loss << " dev_joint "
                 << row.dev_joint_accuracy << "\n";

        if (stopper.observe(epoch, dev.loss)) snapshot();
        if (stopper.should_stop()) break;
    }

    restore();
    result.best_epoch = stopper.best_epoch();
    result.best_dev_loss = stopper.best();
    return result;
}

}  // namespace sumbt::training
