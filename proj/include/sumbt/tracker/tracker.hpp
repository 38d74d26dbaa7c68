#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sumbt/errors.hpp"
#include "sumbt/numcore/ops.hpp"
#include "sumbt/numcore/rng.hpp"
#include "sumbt/numcore/tensor.hpp"

// The belief-tracking head shared by every slot: multi-head attention from a
// slot query into utterance vectors, a recurrent cell over turns, layer
// normalization of its output, and a softmax over negative distances to the
// frozen candidate-value vectors. One parameter set serves every slot, so
// trainable size is independent of the ontology.
namespace sumbt::tracker {

using numcore::DistanceMetric;
using numcore::Rng;
using numcore::Tensor;

enum class RnnCellKind { Gru, Lstm };

inline std::string to_string(RnnCellKind c) {
    return c == RnnCellKind::Gru ? "gru" : "lstm";
}

inline RnnCellKind cell_from_string(const std::string& s) {
    if (s == "gru") return RnnCellKind::Gru;
    if (s == "lstm") return RnnCellKind::Lstm;
    throw ConfigError("unknown rnn cell '" + s + "' (expected gru | lstm)");
}

inline std::string to_string(DistanceMetric m) {
    switch (m) {
        case DistanceMetric::Euclidean: return "euclidean";
        case DistanceMetric::SquaredEuclidean: return "squared-euclidean";
        case DistanceMetric::NegativeCosine: return "negative-cosine";
    }
    return "?";
}

inline DistanceMetric metric_from_string(const std::string& s) {
    if (s == "euclidean") return DistanceMetric::Euclidean;
    if (s == "squared-euclidean") return DistanceMetric::SquaredEuclidean;
    if (s == "negative-cosine") return DistanceMetric::NegativeCosine;
    throw ConfigError("unknown metric '" + s +
                      "' (expected euclidean | squared-euclidean | "
                      "negative-cosine)");
}

struct TrackerConfig {
    int n_heads = 4;
    RnnCellKind cell = RnnCellKind::Gru;
    DistanceMetric metric = DistanceMetric::Euclidean;
};

constexpr double kTrackerLayerNormEps = 1e-5;

template <typename T>
struct TrackerWeights {
    TrackerConfig cfg;
    int dim = 0;

    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;  // slot-utterance matching
    Tensor<T> rnn_w_ih, rnn_w_hh, rnn_b_ih, rnn_b_hh;
    Tensor<T> ln_g, ln_b;

    template <typename F>
    void visit(F&& f) {
        f("trk.wq", wq);
        f("trk.bq", bq);
        f("trk.wk", wk);
        f("trk.bk", bk);
        f("trk.wv", wv);
        f("trk.bv", bv);
        f("trk.wo", wo);
        f("trk.bo", bo);
        f("trk.rnn_w_ih", rnn_w_ih);
        f("trk.rnn_w_hh", rnn_w_hh);
        f("trk.rnn_b_ih", rnn_b_ih);
        f("trk.rnn_b_hh", rnn_b_hh);
        f("trk.ln_g", ln_g);
        f("trk.ln_b", ln_b);
    }

    void init(const TrackerConfig& c, int d, Rng& rng) {
        if (d % c.n_heads != 0)
            throw ConfigError("tracker dim must be divisible by n_heads");
        cfg = c;
        dim = d;
        auto normal = [&rng](std::vector<int> shape) {
            std::size_t n = 1;
            for (int s : shape) n *= static_cast<std::size_t>(s);
            std::vector<T> data(n);
            for (auto& x : data) x = static_cast<T>(rng.normal(0.0, 0.02));
            return Tensor<T>::param(std::move(shape), std::move(data));
        };
        auto uniform = [&rng, d](std::vector<int> shape) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(d));
            std::size_t n = 1;
            for (int s : shape) n *= static_cast<std::size_t>(s);
            std::vector<T> data(n);
            for (auto& x : data)
                x = static_cast<T>(rng.uniform(-bound, bound));
            return Tensor<T>::param(std::move(shape), std::move(data));
        };
        wq = normal({d, d});
        bq = Tensor<T>::param({d});
        wk = normal({d, d});
        bk = Tensor<T>::param({d});
        wv = normal({d, d});
        bv = Tensor<T>::param({d});
        wo = normal({d, d});
        bo = Tensor<T>::param({d});
        const int gates = c.cell == RnnCellKind::Gru ? 3 : 4;
        rnn_w_ih = uniform({d, gates * d});
        rnn_w_hh = uniform({d, gates * d});
        rnn_b_ih = uniform({gates * d});
        rnn_b_hh = uniform({gates * d});
        ln_g = Tensor<T>::param({d}, std::vector<T>(d, T(1)));
        ln_b = Tensor<T>::param({d});
    }

    TrackerWeights deep_copy() const {
        TrackerWeights out = *this;
        out.visit([](const std::string&, Tensor<T>& t) { t = t.deep_copy(); });
        return out;
    }
};

template <typename T>
struct MatchResult {
    Tensor<T> h;  // [1, d] attended context vector
    std::vector<std::vector<T>> attention;  // per head, one weight per token
};

// MultiHead(Q = slot query, K = V = utterance vectors).
template <typename T>
MatchResult<T> match(const Tensor<T>& query, const Tensor<T>& states,
                     const TrackerWeights<T>& w) {
    namespace nc = sumbt::numcore;
    if (query.rows() != 1 || query.cols() != w.dim ||
        states.cols() != w.dim)
        throw ShapeError("match: query/states dims do not fit tracker");
    const int n_heads = w.cfg.n_heads;
    const int dh = w.dim / n_heads;
    const T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(double(dh)));
    auto q = nc::add_rowvec(nc::matmul(query, w.wq), w.bq);
    auto k = nc::add_rowvec(nc::matmul(states, w.wk), w.bk);
    auto v = nc::add_rowvec(nc::matmul(states, w.wv), w.bv);
    MatchResult<T> out;
    std::vector<Tensor<T>> heads;
    for (int h = 0; h < n_heads; ++h) {
        auto qh = nc::slice_cols(q, h * dh, (h + 1) * dh);
        auto kh = nc::slice_cols(k, h * dh, (h + 1) * dh);
        auto vh = nc::slice_cols(v, h * dh, (h + 1) * dh);
        auto scores = nc::scale(nc::matmul(qh, nc::transpose(kh)), inv_sqrt_dh);
        auto attn = nc::softmax(scores);  // [1, L]
        out.attention.emplace_back(attn.data().begin(), attn.data().end());
        heads.push_back(nc::matmul(attn, vh));
    }
    auto ctx = nc::concat_cols(std::span<const Tensor<T>>(heads));
    out.h = nc::add_rowvec(nc::matmul(ctx, w.wo), w.bo);
    return out;
}

// Per-slot recurrent state. `cell` is only defined for LSTM.
template <typename T>
struct RnnState {
    Tensor<T> hidden;
    Tensor<T> cell;
};

template <typename T>
RnnState<T> zero_state(const TrackerWeights<T>& w) {
    RnnState<T> s;
    s.hidden = Tensor<T>::zeros({1, w.dim});
    if (w.cfg.cell == RnnCellKind::Lstm) s.cell = Tensor<T>::zeros({1, w.dim});
    return s;
}

// One recurrent cell step. Shared by the tracker and the baseline heads.
template <typename T>
RnnState<T> rnn_cell_step(const RnnState<T>& prev, const Tensor<T>& x,
                          const Tensor<T>& w_ih, const Tensor<T>& w_hh,
                          const Tensor<T>& b_ih, const Tensor<T>& b_hh,
                          RnnCellKind cell) {
    namespace nc = sumbt::numcore;
    const int d = prev.hidden.cols();
    auto gx = nc::add_rowvec(nc::matmul(x, w_ih), b_ih);
    auto gh = nc::add_rowvec(nc::matmul(prev.hidden, w_hh), b_hh);
    RnnState<T> next;
    if (cell == RnnCellKind::Gru) {
        auto r = nc::sigmoid(nc::add(nc::slice_cols(gx, 0, d),
                                     nc::slice_cols(gh, 0, d)));
        auto z = nc::sigmoid(nc::add(nc::slice_cols(gx, d, 2 * d),
                                     nc::slice_cols(gh, d, 2 * d)));
        auto n = nc::tanh(nc::add(nc::slice_cols(gx, 2 * d, 3 * d),
                                  nc::mul(r, nc::slice_cols(gh, 2 * d, 3 * d))));
        next.hidden = nc::add(nc::mul(nc::affine(z, T(-1), T(1)), n),
                              nc::mul(z, prev.hidden));
    } else {
        auto gates = nc::add(gx, gh);
        auto i = nc::sigmoid(nc::slice_cols(gates, 0, d));
        auto f = nc::sigmoid(nc::slice_cols(gates, d, 2 * d));
        auto g = nc::tanh(nc::slice_cols(gates, 2 * d, 3 * d));
        auto o = nc::sigmoid(nc::slice_cols(gates, 3 * d, 4 * d));
        next.cell = nc::add(nc::mul(f, prev.cell), nc::mul(i, g));
        next.hidden = nc::mul(o, nc::tanh(next.cell));
    }
    return next;
}

template <typename T>
struct TrackStepResult {
    RnnState<T> state;
    Tensor<T> y_hat;  // layer-normalized hidden state
};

template <typename T>
TrackStepResult<T> track_step(const RnnState<T>& prev, const Tensor<T>& h_in,
                              const TrackerWeights<T>& w) {
    TrackStepResult<T> out;
    out.state = rnn_cell_step(prev, h_in, w.rnn_w_ih, w.rnn_w_hh, w.rnn_b_ih,
                              w.rnn_b_hh, w.cfg.cell);
    out.y_hat = numcore::layer_norm(out.state.hidden, w.ln_g, w.ln_b,
                                    static_cast<T>(kTrackerLayerNormEps));
    return out;
}

// Scores for the non-parametric discriminator: minus the distance to each
// candidate-value vector.
template <typename T>
Tensor<T> classify_scores(const Tensor<T>& y_hat, const Tensor<T>& value_rows,
                          DistanceMetric metric) {
    return numcore::scale(numcore::pair_distances(y_hat, value_rows, metric),
                          T(-1));
}

// Probability distribution over candidates: softmax(-distance).
template <typename T>
Tensor<T> classify(const Tensor<T>& y_hat, const Tensor<T>& value_rows,
                   DistanceMetric metric) {
    return numcore::softmax(classify_scores(y_hat, value_rows, metric));
}

}  // namespace sumbt::tracker
