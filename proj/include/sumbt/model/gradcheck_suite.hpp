#pragma once

#include <string>
#include <vector>

#include "sumbt/model/factory.hpp"
#include "sumbt/numcore/fdcheck.hpp"
#include "sumbt/tracker/forward.hpp"

// Finite-difference validation of every primitive op and of the end-to-end
// tracking loss, all in double. Op tolerance 1e-4, end-to-end 1e-3.
namespace sumbt::model {

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

namespace gradcheck_detail {

using numcore::Tensor;
using Params = std::vector<std::pair<std::string, Tensor<double>>>;

inline Tensor<double> random_tensor(std::vector<int> shape, numcore::Rng& rng,
                                    double lo = -1.0, double hi = 1.0,
                                    bool param = true) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> data(n);
    for (auto& x : data) x = rng.uniform(lo, hi);
    return param ? Tensor<double>::param(std::move(shape), std::move(data))
                 : Tensor<double>::from(std::move(shape), std::move(data));
}

// Random-weighted scalarization so symmetric errors cannot cancel.
inline Tensor<double> scalarize(const Tensor<double>& t,
                                const Tensor<double>& weights) {
    return numcore::sum(numcore::mul(t, weights));
}

template <typename Forward>
GradCheckCase check_case(const std::string& name, Params params,
                         Forward forward, double tol = 1e-4,
                         double h = 1e-4) {
    for (auto& [name_, p] : params) p.zero_grad();  // tensors are shared
                                                    // across cases
    numcore::Tape<double> tape;
    {
        typename numcore::Tape<double>::Scope scope(tape);
        auto loss = forward();
        tape.backward(loss);
    }
    auto result = numcore::check_gradients(
        std::span<const std::pair<std::string, Tensor<double>>>(params),
        [&forward] { return static_cast<double>(forward().item()); }, h);
    GradCheckCase c;
    c.name = name;
    c.max_rel_err = result.max_rel_err;
    c.tolerance = tol;
    c.pass = result.ok(tol);
    return c;
}

}  // namespace gradcheck_detail

inline std::vector<GradCheckCase> run_op_gradchecks(std::uint64_t seed = 7) {
    namespace nc = sumbt::numcore;
    using gradcheck_detail::check_case;
    using gradcheck_detail::random_tensor;
    using gradcheck_detail::scalarize;
    using nc::Tensor;

    numcore::Rng rng(seed);
    std::vector<GradCheckCase> cases;

    {
        auto a = random_tensor({3, 4}, rng);
        auto b = random_tensor({4, 5}, rng);
        auto w = random_tensor({3, 5}, rng, -1, 1, false);
        cases.push_back(check_case("matmul", {{"a", a}, {"b", b}}, [=] {
            return scalarize(nc::matmul(a, b), w);
        }));
    }
    {
        auto a = random_tensor({3, 4}, rng);
        auto w = random_tensor({4, 3}, rng, -1, 1, false);
        cases.push_back(check_case("transpose", {{"a", a}}, [=] {
            return scalarize(nc::transpose(a), w);
        }));
    }
    {
        auto a = random_tensor({3, 4}, rng);
        auto b = random_tensor({3, 4}, rng);
        auto w = random_tensor({3, 4}, rng, -1, 1, false);
        cases.push_back(check_case("add", {{"a", a}, {"b", b}}, [=] {
            return scalarize(nc::add(a, b), w);
        }));
        cases.push_back(check_case("sub", {{"a", a}, {"b", b}}, [=] {
            return scalarize(nc::sub(a, b), w);
        }));
        cases.push_back(check_case("mul", {{"a", a}, {"b", b}}, [=] {
            return scalarize(nc::mul(a, b), w);
        }));
        cases.push_back(check_case("affine", {{"a", a}}, [=] {
            return scalarize(nc::affine(a, 1.3, -0.4), w);
        }));
        cases.push_back(check_case("sigmoid", {{"a", a}}, [=] {
            return scalarize(nc::sigmoid(a), w);
        }));
        cases.push_back(check_case("tanh", {{"a", a}}, [=] {
            return scalarize(nc::tanh(a), w);
        }));
        cases.push_back(
            check_case("sum", {{"a", a}}, [=] { return nc::sum(a); }));
        cases.push_back(
            check_case("mean", {{"a", a}}, [=] { return nc::mean(a); }));
    }
    {
        auto m = random_tensor({3, 4}, rng);
        auto v = random_tensor({4}, rng);
        auto w = random_tensor({3, 4}, rng, -1, 1, false);
        cases.push_back(check_case("add_rowvec", {{"m", m}, {"v", v}}, [=] {
            return scalarize(nc::add_rowvec(m, v), w);
        }));
    }
    {
        auto a = random_tensor({3, 4}, rng, 0.5, 2.0);
        auto w = random_tensor({3, 4}, rng, -1, 1, false);
        cases.push_back(check_case("sqrt", {{"a", a}}, [=] {
            return scalarize(nc::sqrt(a), w);
        }));
    }
    {
        // Inputs away from the kink at 0.
        auto pos = random_tensor({2, 4}, rng, 0.2, 1.0);
        auto neg = random_tensor({2, 4}, rng, -1.0, -0.2);
        auto w = random_tensor({4, 4}, rng, -1, 1, false);
        cases.push_back(check_case("relu", {{"pos", pos}, {"neg", neg}}, [=] {
            std::vector<Tensor<double>> parts = {nc::transpose(pos),
                                                 nc::transpose(neg)};
            return scalarize(
                nc::relu(nc::transpose(nc::concat_cols(
                    std::span<const Tensor<double>>(parts)))),
                w);
        }));
    }
    {
        auto a = random_tensor({3, 2}, rng);
        auto b = random_tensor({3, 3}, rng);
        auto w = random_tensor({3, 5}, rng, -1, 1, false);
        cases.push_back(check_case("concat_cols", {{"a", a}, {"b", b}}, [=] {
            std::vector<Tensor<double>> parts = {a, b};
            return scalarize(
                nc::concat_cols(std::span<const Tensor<double>>(parts)), w);
        }));
    }
    {
        auto a = random_tensor({3, 5}, rng);
        auto w = random_tensor({3, 3}, rng, -1, 1, false);
        cases.push_back(check_case("slice_cols", {{"a", a}}, [=] {
            return scalarize(nc::slice_cols(a, 1, 4), w);
        }));
        auto w2 = random_tensor({2, 5}, rng, -1, 1, false);
        cases.push_back(check_case("slice_rows", {{"a", a}}, [=] {
            return scalarize(nc::slice_rows(a, 1, 3), w2);
        }));
    }
    {
        auto table = random_tensor({6, 4}, rng);
        const std::vector<int> ids = {0, 2, 2, 5};  // repeats must accumulate
        auto w = random_tensor({4, 4}, rng, -1, 1, false);
        cases.push_back(check_case("gather_rows", {{"table", table}}, [=] {
            return scalarize(nc::gather_rows(table, ids), w);
        }));
    }
    {
        auto m = random_tensor({4, 5}, rng);
        const std::vector<int> ids = {1, 0, 4, 2};
        auto w = random_tensor({4}, rng, -1, 1, false);
        cases.push_back(check_case("select_cols", {{"m", m}}, [=] {
            return scalarize(nc::select_cols(m, ids), w);
        }));
        cases.push_back(check_case("pick", {{"m", m}}, [=] {
            return nc::pick(m, 7);
        }));
    }
    {
        auto a = random_tensor({1}, rng);
        auto b = random_tensor({1}, rng);
        auto c = random_tensor({1}, rng);
        cases.push_back(
            check_case("sum_scalars", {{"a", a}, {"b", b}, {"c", c}}, [=] {
                std::vector<Tensor<double>> terms = {a, b, c};
                return nc::sum_scalars(
                    std::span<const Tensor<double>>(terms));
            }));
    }
    {
        auto a = random_tensor({3, 5}, rng);
        auto w = random_tensor({3, 5}, rng, -1, 1, false);
        cases.push_back(check_case("softmax", {{"a", a}}, [=] {
            return scalarize(nc::softmax(a), w);
        }));
        cases.push_back(check_case("log_softmax", {{"a", a}}, [=] {
            return scalarize(nc::log_softmax(a), w);
        }));
    }
    {
        auto x = random_tensor({3, 6}, rng);
        auto g = random_tensor({6}, rng, 0.5, 1.5);
        auto b = random_tensor({6}, rng);
        auto w = random_tensor({3, 6}, rng, -1, 1, false);
        cases.push_back(
            check_case("layer_norm", {{"x", x}, {"g", g}, {"b", b}}, [=] {
                return scalarize(nc::layer_norm(x, g, b, 1e-5), w);
            }));
    }
    {
        auto yhat = random_tensor({1, 5}, rng);
        auto y_rows = random_tensor({4, 5}, rng);
        auto w = random_tensor({4}, rng, -1, 1, false);
        for (auto [metric, name] :
             {std::pair{nc::DistanceMetric::Euclidean, "distance_euclidean"},
              std::pair{nc::DistanceMetric::SquaredEuclidean,
                        "distance_squared_euclidean"},
              std::pair{nc::DistanceMetric::NegativeCosine,
                        "distance_negative_cosine"}}) {
            auto m = metric;
            cases.push_back(check_case(
                name, {{"yhat", yhat}, {"y_rows", y_rows}}, [=] {
                    return scalarize(nc::pair_distances(yhat, y_rows, m), w);
                }));
        }
    }
    return cases;
}

// End-to-end: full tracking loss on a 2-slot, 2-turn toy dialog at d=8,
// differentiated through encoder, attention, recurrence and classifier.
inline GradCheckCase run_end_to_end_gradcheck(std::uint64_t seed = 11) {
    namespace nc = sumbt::numcore;
    using gradcheck_detail::Params;

    corpus::Ontology ont;
    ont.slots.push_back({"restaurant-price range", "restaurant", "price range",
                         {"none", "cheap", "expensive"}});
    ont.slots.push_back(
        {"hotel-area", "hotel", "area", {"none", "north", "south"}});

    corpus::Dialog dialog;
    dialog.id = "toy";
    dialog.turns.push_back(
        {"", "i want cheap food", {{"restaurant-price range", "cheap"}}});
    dialog.turns.push_back({"okay noted",
                            "find a hotel in the north",
                            {{"restaurant-price range", "cheap"},
                             {"hotel-area", "north"}}});

    encoder::Vocabulary vocab;
    for (const auto& t : dialog.turns) {
        vocab.add_text(t.system);
        vocab.add_text(t.user);
    }
    for (const auto& s : ont.slots) {
        vocab.add_text(s.phrase());
        for (const auto& v : s.values) vocab.add_text(v);
    }

    encoder::EncoderConfig enc_cfg;
    enc_cfg.n_layers = 1;
    enc_cfg.dim = 8;
    enc_cfg.n_heads = 2;
    enc_cfg.ff_dim = 16;
    enc_cfg.max_len = 32;
    tracker::TrackerConfig trk_cfg;
    trk_cfg.n_heads = 2;

    numcore::Rng rng(seed);
    encoder::EncoderWeights<double> enc;
    enc.init(enc_cfg, vocab.size(), rng);
    const auto frozen = enc.freeze_snapshot();
    const auto cache =
        tracker::OntologyEmbeddings<double>::build(ont, frozen, vocab);
    tracker::TrackerWeights<double> trk;
    trk.init(trk_cfg, enc_cfg.dim, rng);

    Params params;
    enc.visit([&params](const std::string& name, nc::Tensor<double>& t) {
        params.emplace_back(name, t);
    });
    trk.visit([&params](const std::string& name, nc::Tensor<double>& t) {
        params.emplace_back(name, t);
    });

    auto forward = [&] {
        auto turns = tracker::forward_dialog(dialog, vocab, enc, cache, trk);
        return tracker::dialog_loss(turns, dialog, cache);
    };
    return gradcheck_detail::check_case("end_to_end_tracking_loss",
                                        std::move(params), forward, 1e-3);
}

inline std::vector<GradCheckCase> run_gradcheck_suite() {
    auto cases = run_op_gradchecks();
    cases.push_back(run_end_to_end_gradcheck());
    return cases;
}

}  // namespace sumbt::model
