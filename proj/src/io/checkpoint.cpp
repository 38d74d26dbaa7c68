#include "sumbt/io/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "sumbt/model/factory.hpp"

namespace sumbt::io {

using nlohmann::json;
using numcore::Tensor;

namespace {

constexpr char kMagic[4] = {'S', 'M', 'B', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("checkpoint truncated");
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw DataError("checkpoint truncated");
    return s;
}

void write_tensor(std::ostream& out, const std::string& name,
                  const Tensor<float>& t) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

struct RawTensor {
    std::vector<int> shape;
    std::vector<float> data;
};

std::pair<std::string, RawTensor> read_tensor(std::istream& in) {
    std::string name = read_string(in);
    const std::uint32_t rank = read_u32(in);
    if (rank < 1 || rank > 2) throw DataError("checkpoint tensor rank bad");
    RawTensor t;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const auto d = static_cast<int>(read_u32(in));
        t.shape.push_back(d);
        numel *= static_cast<std::size_t>(d);
    }
    t.data.resize(numel);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    if (!in) throw DataError("checkpoint truncated");
    return {std::move(name), std::move(t)};
}

}  // namespace

void save_model(model::BeliefModel<float>& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);

    const auto enc = m.encoder_config();
    const auto trk = m.tracker_config();
    json meta;
    meta["kind"] = model::to_string(m.kind());
    meta["encoder"] = {{"layers", enc.n_layers},
                       {"dim", enc.dim},
                       {"heads", enc.n_heads},
                       {"ff", enc.ff_dim},
                       {"max_len", enc.max_len}};
    meta["tracker"] = {{"heads", trk.n_heads},
                       {"cell", tracker::to_string(trk.cell)},
                       {"metric", tracker::to_string(trk.metric)}};
    write_string(out, meta.dump());
    write_string(out, corpus::ontology_to_json(m.current_ontology()));

    const auto vocab_entries = m.vocab().entries();
    write_u32(out, static_cast<std::uint32_t>(vocab_entries.size()));
    for (const auto& e : vocab_entries) write_string(out, e);

    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    m.visit_trainable([&tensors](const std::string& name, Tensor<float>& t) {
        tensors.emplace_back(name, t);
    });
    m.visit_frozen([&tensors](const std::string& name, Tensor<float>& t) {
        tensors.emplace_back(name, t);
    });
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) write_tensor(out, name, t);
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a checkpoint file: " + path);
    if (read_u32(in) != kVersion)
        throw DataError("unsupported checkpoint version");

    json meta;
    try {
        meta = json::parse(read_string(in));
    } catch (const json::exception& e) {
        throw DataError(std::string("bad checkpoint metadata: ") + e.what());
    }
    LoadedModel loaded;
    loaded.kind = model::model_kind_from_string(meta.at("kind"));
    encoder::EncoderConfig enc;
    enc.n_layers = meta["encoder"]["layers"];
    enc.dim = meta["encoder"]["dim"];
    enc.n_heads = meta["encoder"]["heads"];
    enc.ff_dim = meta["encoder"]["ff"];
    enc.max_len = meta["encoder"]["max_len"];
    tracker::TrackerConfig trk;
    trk.n_heads = meta["tracker"]["heads"];
    trk.cell = tracker::cell_from_string(meta["tracker"]["cell"]);
    trk.metric = tracker::metric_from_string(meta["tracker"]["metric"]);
    loaded.ontology = corpus::parse_ontology(read_string(in));

    const std::uint32_t vocab_n = read_u32(in);
    std::vector<std::string> entries;
    entries.reserve(vocab_n);
    for (std::uint32_t i = 0; i < vocab_n; ++i)
        entries.push_back(read_string(in));
    auto vocab = std::make_shared<encoder::Vocabulary>(
        encoder::Vocabulary::from_entries(entries));

    std::map<std::string, RawTensor> raw;
    const std::uint32_t tensor_n = read_u32(in);
    for (std::uint32_t i = 0; i < tensor_n; ++i) {
        auto [name, t] = read_tensor(in);
        if (!raw.emplace(std::move(name), std::move(t)).second)
            throw DataError("duplicate tensor in checkpoint");
    }

    auto fill = [&raw](const std::string& name, Tensor<float>& t) {
        auto it = raw.find(name);
        if (it == raw.end())
            throw DataError("checkpoint is missing tensor " + name);
        if (it->second.shape != t.shape())
            throw DataError("checkpoint tensor " + name + " has wrong shape");
        std::copy(it->second.data.begin(), it->second.data.end(),
                  t.data().begin());
        raw.erase(it);
    };

    // Rebuild the frozen twin first, then the value cache, then the model
    // skeleton whose trainable tensors are overwritten by name.
    numcore::Rng dummy(0);
    encoder::EncoderWeights<float> frozen_w;
    frozen_w.init(enc, vocab->size(), dummy);
    frozen_w.visit([&fill](const std::string& name, Tensor<float>& t) {
        fill("frozen." + name, t);
    });
    frozen_w.frozen = true;
    frozen_w.visit([](const std::string&, Tensor<float>& t) {
        t.set_requires_grad(false);
    });
    auto frozen = std::make_shared<const encoder::EncoderWeights<float>>(
        std::move(frozen_w));

    auto cache = std::make_shared<const tracker::OntologyEmbeddings<float>>(
        tracker::OntologyEmbeddings<float>::build(loaded.ontology, *frozen,
                                                  *vocab));

    encoder::EncoderWeights<float> utt;
    utt.init(enc, vocab->size(), dummy);
    model::ModelParts<float> parts;
    parts.vocab = vocab;
    parts.enc_cfg = enc;
    parts.trk_cfg = trk;
    parts.frozen = frozen;
    parts.utterance_init = std::move(utt);
    parts.cache = cache;
    parts.ontology = loaded.ontology;
    loaded.model = model::make_model(loaded.kind, std::move(parts), dummy);
    loaded.model->visit_trainable(fill);
    if (!raw.empty())
        throw DataError("checkpoint has unexpected tensor " +
                        raw.begin()->first);
    return loaded;
}

namespace {
constexpr char kEncMagic[4] = {'S', 'M', 'B', 'E'};
}

void save_encoder(const encoder::EncoderWeights<float>& w,
                  const encoder::Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write encoder file: " + path);
    out.write(kEncMagic, 4);
    write_u32(out, kVersion);
    json meta;
    meta["encoder"] = {{"layers", w.cfg.n_layers},
                       {"dim", w.cfg.dim},
                       {"heads", w.cfg.n_heads},
                       {"ff", w.cfg.ff_dim},
                       {"max_len", w.cfg.max_len}};
    write_string(out, meta.dump());
    const auto entries = vocab.entries();
    write_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) write_string(out, e);
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    const_cast<encoder::EncoderWeights<float>&>(w).visit(
        [&tensors](const std::string& name, Tensor<float>& t) {
            tensors.emplace_back(name, t);
        });
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) write_tensor(out, name, t);
    if (!out) throw DataError("failed writing encoder file: " + path);
}

LoadedEncoder load_encoder(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open encoder file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kEncMagic, 4) != 0)
        throw DataError("not an encoder file: " + path);
    if (read_u32(in) != kVersion)
        throw DataError("unsupported encoder file version");
    json meta;
    try {
        meta = json::parse(read_string(in));
    } catch (const json::exception& e) {
        throw DataError(std::string("bad encoder metadata: ") + e.what());
    }
    encoder::EncoderConfig cfg;
    cfg.n_layers = meta["encoder"]["layers"];
    cfg.dim = meta["encoder"]["dim"];
    cfg.n_heads = meta["encoder"]["heads"];
    cfg.ff_dim = meta["encoder"]["ff"];
    cfg.max_len = meta["encoder"]["max_len"];
    const std::uint32_t vocab_n = read_u32(in);
    std::vector<std::string> entries;
    for (std::uint32_t i = 0; i < vocab_n; ++i)
        entries.push_back(read_string(in));
    LoadedEncoder loaded;
    loaded.vocab = encoder::Vocabulary::from_entries(entries);
    numcore::Rng dummy(0);
    loaded.weights.init(cfg, loaded.vocab.size(), dummy);
    std::map<std::string, RawTensor> raw;
    const std::uint32_t tensor_n = read_u32(in);
    for (std::uint32_t i = 0; i < tensor_n; ++i) {
        auto [name, t] = read_tensor(in);
        raw.emplace(std::move(name), std::move(t));
    }
    loaded.weights.visit([&raw](const std::string& name, Tensor<float>& t) {
        auto it = raw.find(name);
        if (it == raw.end())
            throw DataError("encoder file is missing tensor " + name);
        if (it->second.shape != t.shape())
            throw DataError("encoder tensor " + name + " has wrong shape");
        std::copy(it->second.data.begin(), it->second.data.end(),
                  t.data().begin());
        raw.erase(it);
    });
    if (!raw.empty())
        throw DataError("encoder file has unexpected tensor " +
                        raw.begin()->first);
    return loaded;
}

}  // namespace sumbt::io
