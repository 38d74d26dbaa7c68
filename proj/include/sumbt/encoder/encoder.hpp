#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sumbt/encoder/vocab.hpp"
#include "sumbt/errors.hpp"
#include "sumbt/numcore/ops.hpp"
#include "sumbt/numcore/rng.hpp"
#include "sumbt/numcore/tensor.hpp"

// Small bidirectional transformer encoder used both as the trainable
// utterance encoder and, via freeze_snapshot(), as the frozen slot/value
// twin. Inputs are framed [CLS] a [SEP] (single segment) or
// [CLS] sys [SEP] usr [SEP] (pair, segment ids 0/0/0/1/1); the pooled output
// is the contextual vector at the [CLS] position.
namespace sumbt::encoder {

using numcore::Rng;
using numcore::Tensor;

struct EncoderConfig {
    int n_layers = 2;
    int dim = 64;
    int n_heads = 4;
    int ff_dim = 256;
    int max_len = 64;

    void validate() const {
        if (dim % n_heads != 0)
            throw ConfigError("encoder dim must be divisible by n_heads");
        if (n_layers < 1 || dim < 1 || ff_dim < 1 || max_len < 4)
            throw ConfigError("bad encoder config");
    }
};

constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct EncoderLayerWeights {
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> ln1_g, ln1_b;
    Tensor<T> w1, b1, w2, b2;
    Tensor<T> ln2_g, ln2_b;

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + "wq", wq);
        f(prefix + "bq", bq);
        f(prefix + "wk", wk);
        f(prefix + "bk", bk);
        f(prefix + "wv", wv);
        f(prefix + "bv", bv);
        f(prefix + "wo", wo);
        f(prefix + "bo", bo);
        f(prefix + "ln1_g", ln1_g);
        f(prefix + "ln1_b", ln1_b);
        f(prefix + "w1", w1);
        f(prefix + "b1", b1);
        f(prefix + "w2", w2);
        f(prefix + "b2", b2);
        f(prefix + "ln2_g", ln2_g);
        f(prefix + "ln2_b", ln2_b);
    }
};

template <typename T>
struct EncoderWeights {
    EncoderConfig cfg;
    int vocab_size = 0;
    bool frozen = false;

    Tensor<T> tok_emb;   // [V, d]
    Tensor<T> pos_emb;   // [max_len, d]
    Tensor<T> seg_emb;   // [2, d]
    Tensor<T> emb_ln_g, emb_ln_b;
    Tensor<T> mlm_bias;  // [V], masked-LM output bias (embeddings are tied)
    std::vector<EncoderLayerWeights<T>> layers;

    template <typename F>
    void visit(F&& f) {
        f("enc.tok_emb", tok_emb);
        f("enc.pos_emb", pos_emb);
        f("enc.seg_emb", seg_emb);
        f("enc.emb_ln_g", emb_ln_g);
        f("enc.emb_ln_b", emb_ln_b);
        f("enc.mlm_bias", mlm_bias);
        for (std::size_t l = 0; l < layers.size(); ++l)
            layers[l].visit("enc.layer" + std::to_string(l) + ".",
                            std::forward<F>(f));
    }

    void init(const EncoderConfig& c, int vocab, Rng& rng) {
        c.validate();
        cfg = c;
        vocab_size = vocab;
        const int d = c.dim;
        auto normal = [&rng](std::vector<int> shape) {
            std::size_t n = 1;
            for (int s : shape) n *= static_cast<std::size_t>(s);
            std::vector<T> data(n);
            for (auto& x : data) x = static_cast<T>(rng.normal(0.0, 0.02));
            return Tensor<T>::param(std::move(shape), std::move(data));
        };
        auto zeros = [](std::vector<int> shape) {
            return Tensor<T>::param(std::move(shape));
        };
        auto ones = [](int n) {
            return Tensor<T>::param({n}, std::vector<T>(n, T(1)));
        };
        tok_emb = normal({vocab, d});
        pos_emb = normal({c.max_len, d});
        seg_emb = normal({2, d});
        emb_ln_g = ones(d);
        emb_ln_b = zeros({d});
        mlm_bias = zeros({vocab});
        layers.clear();
        for (int l = 0; l < c.n_layers; ++l) {
            EncoderLayerWeights<T> lw;
            lw.wq = normal({d, d});
            lw.bq = zeros({d});
            lw.wk = normal({d, d});
            lw.bk = zeros({d});
            lw.wv = normal({d, d});
            lw.bv = zeros({d});
            lw.wo = normal({d, d});
            lw.bo = zeros({d});
            lw.ln1_g = ones(d);
            lw.ln1_b = zeros({d});
            lw.w1 = normal({d, c.ff_dim});
            lw.b1 = zeros({c.ff_dim});
            lw.w2 = normal({c.ff_dim, d});
            lw.b2 = zeros({d});
            lw.ln2_g = ones(d);
            lw.ln2_b = zeros({d});
            layers.push_back(std::move(lw));
        }
    }

    EncoderWeights deep_copy() const {
        EncoderWeights out = *this;  // copies shared handles
        out.visit([](const std::string&, Tensor<T>& t) { t = t.deep_copy(); });
        return out;
    }

    // Deep copy with every tensor marked non-trainable. Training the live
    // encoder afterwards cannot touch the snapshot.
    EncoderWeights freeze_snapshot() const {
        EncoderWeights out = deep_copy();
        out.frozen = true;
        out.visit([](const std::string&, Tensor<T>& t) {
            t.set_requires_grad(false);
        });
        return out;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        const_cast<EncoderWeights*>(this)->visit(
            [&n](const std::string&, Tensor<T>& t) { n += t.numel(); });
        return n;
    }
};

template <typename T>
struct EncodedSequence {
    Tensor<T> states;  // [L, d], one contextual vector per input position
    Tensor<T> pooled;  // [1, d], the [CLS] row
    std::vector<int> ids;
    bool truncated = false;
};

namespace detail {

template <typename T>
Tensor<T> self_attention(const Tensor<T>& x, const EncoderLayerWeights<T>& w,
                         int n_heads) {
    namespace nc = sumbt::numcore;
    const int d = x.cols();
    const int dh = d / n_heads;
    const T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(double(dh)));
    auto q = nc::add_rowvec(nc::matmul(x, w.wq), w.bq);
    auto k = nc::add_rowvec(nc::matmul(x, w.wk), w.bk);
    auto v = nc::add_rowvec(nc::matmul(x, w.wv), w.bv);
    std::vector<Tensor<T>> heads;
    for (int h = 0; h < n_heads; ++h) {
        auto qh = nc::slice_cols(q, h * dh, (h + 1) * dh);
        auto kh = nc::slice_cols(k, h * dh, (h + 1) * dh);
        auto vh = nc::slice_cols(v, h * dh, (h + 1) * dh);
        auto scores = nc::scale(nc::matmul(qh, nc::transpose(kh)), inv_sqrt_dh);
        auto attn = nc::softmax(scores);
        heads.push_back(nc::matmul(attn, vh));
    }
    auto ctx = nc::concat_cols(std::span<const Tensor<T>>(heads));
    return nc::add_rowvec(nc::matmul(ctx, w.wo), w.bo);
}

template <typename T>
Tensor<T> encoder_layer(const Tensor<T>& x, const EncoderLayerWeights<T>& w,
                        int n_heads) {
    namespace nc = sumbt::numcore;
    auto a = nc::layer_norm(nc::add(x, self_attention(x, w, n_heads)), w.ln1_g,
                            w.ln1_b, static_cast<T>(kLayerNormEps));
    auto ff = nc::add_rowvec(
        nc::matmul(nc::relu(nc::add_rowvec(nc::matmul(a, w.w1), w.b1)), w.w2),
        w.b2);
    return nc::layer_norm(nc::add(a, ff), w.ln2_g, w.ln2_b,
                          static_cast<T>(kLayerNormEps));
}

}  // namespace detail

// Core forward pass over framed ids (specials already in place).
template <typename T>
Tensor<T> encoder_forward(const EncoderWeights<T>& w,
                          const std::vector<int>& ids,
                          const std::vector<int>& segs) {
    namespace nc = sumbt::numcore;
    if (ids.empty()) throw ShapeError("encoder_forward: empty input");
    if (static_cast<int>(ids.size()) > w.cfg.max_len)
        throw ShapeError("encoder_forward: input longer than max_len");
    std::vector<int> positions(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        positions[i] = static_cast<int>(i);
    auto x = nc::add(nc::add(nc::gather_rows(w.tok_emb, ids),
                             nc::gather_rows(w.pos_emb, positions)),
                     nc::gather_rows(w.seg_emb, segs));
    x = nc::layer_norm(x, w.emb_ln_g, w.emb_ln_b,
                       static_cast<T>(kLayerNormEps));
    for (const auto& layer : w.layers)
        x = detail::encoder_layer(x, layer, w.cfg.n_heads);
    return x;
}

// [CLS] sys [SEP] usr [SEP], segment ids 0 for the system part and 1 for the
// user part. Over-length inputs lose tokens from the longer segment (tail
// first) and the result carries a truncation flag.
template <typename T>
EncodedSequence<T> encode_pair(const EncoderWeights<T>& w,
                               std::vector<int> sys_ids,
                               std::vector<int> usr_ids) {
    EncodedSequence<T> out;
    const std::size_t budget = static_cast<std::size_t>(w.cfg.max_len) - 3;
    while (sys_ids.size() + usr_ids.size() > budget) {
        out.truncated = true;
        if (sys_ids.size() > usr_ids.size())
            sys_ids.pop_back();
        else
            usr_ids.pop_back();
    }
    std::vector<int> ids;
    std::vector<int> segs;
    ids.push_back(Vocabulary::kCls);
    segs.push_back(0);
    for (int t : sys_ids) {
        ids.push_back(t);
        segs.push_back(0);
    }
    ids.push_back(Vocabulary::kSep);
    segs.push_back(0);
    for (int t : usr_ids) {
        ids.push_back(t);
        segs.push_back(1);
    }
    ids.push_back(Vocabulary::kSep);
    segs.push_back(1);
    out.states = encoder_forward(w, ids, segs);
    out.pooled = numcore::slice_rows(out.states, 0, 1);
    out.ids = std::move(ids);
    return out;
}

// Pooled [CLS] vector of a single framed segment; used for slot phrases and
// slot values on the frozen twin.
template <typename T>
Tensor<T> encode_text(const EncoderWeights<T>& w, std::vector<int> token_ids) {
    const std::size_t budget = static_cast<std::size_t>(w.cfg.max_len) - 2;
    if (token_ids.size() > budget) token_ids.resize(budget);
    std::vector<int> ids;
    ids.push_back(Vocabulary::kCls);
    for (int t : token_ids) ids.push_back(t);
    ids.push_back(Vocabulary::kSep);
    const std::vector<int> segs(ids.size(), 0);
    return numcore::slice_rows(encoder_forward(w, ids, segs), 0, 1);
}

}  // namespace sumbt::encoder
