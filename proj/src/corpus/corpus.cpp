#include "sumbt/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sumbt/errors.hpp"
#include "sumbt/numcore/rng.hpp"

namespace sumbt::corpus {

using nlohmann::json;

namespace {

constexpr int kCorpusVersion = 1;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
}

SlotDef make_slot(const std::string& name,
                  std::vector<std::string> values) {
    SlotDef def;
    def.name = name;
    const auto dash = name.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == name.size())
        throw DataError("ontology slot key must be \"domain-slot\": " + name);
    def.domain = name.substr(0, dash);
    def.slot = name.substr(dash + 1);
    def.values = std::move(values);
    return def;
}

}  // namespace

bool Ontology::has_slot(const std::string& name) const {
    for (const auto& s : slots)
        if (s.name == name) return true;
    return false;
}

const SlotDef& Ontology::slot(const std::string& name) const {
    for (const auto& s : slots)
        if (s.name == name) return s;
    throw DataError("unknown slot: " + name);
}

int Ontology::value_index(const std::string& slot_name,
                          const std::string& value) const {
    const auto& s = slot(slot_name);
    for (std::size_t i = 0; i < s.values.size(); ++i)
        if (s.values[i] == value) return static_cast<int>(i);
    return -1;
}

std::size_t Ontology::total_values() const {
    std::size_t n = 0;
    for (const auto& s : slots) n += s.values.size();
    return n;
}

void Ontology::validate() const {
    for (const auto& s : slots) {
        if (s.values.size() < 2)
            throw DataError("slot " + s.name + " needs >= 2 candidates");
        std::set<std::string> seen;
        for (const auto& v : s.values)
            if (!seen.insert(v).second)
                throw DataError("slot " + s.name + " has duplicate value '" +
                                v + "'");
        if (!seen.count("none"))
            throw DataError("slot " + s.name + " is missing the 'none' value");
    }
}

Ontology parse_ontology(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed ontology JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("ontology JSON must be an object");
    Ontology ont;
    // nlohmann objects iterate key-sorted, which fixes the slot order.
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_array())
            throw DataError("ontology values for " + it.key() +
                            " must be an array");
        ont.slots.push_back(
            make_slot(it.key(), it.value().get<std::vector<std::string>>()));
    }
    ont.validate();
    return ont;
}

std::string ontology_to_json(const Ontology& ont) {
    json j = json::object();
    for (const auto& s : ont.slots) j[s.name] = s.values;
    return j.dump(2) + "\n";
}

Ontology load_ontology(const std::string& path) {
    return parse_ontology(read_file(path));
}

void save_ontology(const Ontology& ont, const std::string& path) {
    write_file(path, ontology_to_json(ont));
}

std::vector<Dialog> parse_corpus(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed corpus JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("version") || !j.contains("dialogs"))
        throw DataError("corpus JSON needs {version, dialogs}");
    if (j["version"].get<int>() != kCorpusVersion)
        throw DataError("unsupported corpus version " +
                        j["version"].dump());
    std::vector<Dialog> dialogs;
    for (const auto& dj : j["dialogs"]) {
        Dialog d;
        d.id = dj.at("id").get<std::string>();
        d.split = dj.value("split", std::string("train"));
        if (d.split != "train" && d.split != "dev" && d.split != "test")
            throw DataError("dialog " + d.id + " has bad split tag '" +
                            d.split + "'");
        for (const auto& tj : dj.at("turns")) {
            Turn t;
            t.system = tj.value("system", std::string());
            t.user = tj.at("user").get<std::string>();
            if (tj.contains("labels"))
                for (auto it = tj["labels"].begin(); it != tj["labels"].end();
                     ++it)
                    t.labels[it.key()] = it.value().get<std::string>();
            d.turns.push_back(std::move(t));
        }
        if (d.turns.empty())
            throw DataError("dialog " + d.id + " has no turns");
        dialogs.push_back(std::move(d));
    }
    return dialogs;
}

std::string corpus_to_json(const std::vector<Dialog>& dialogs) {
    json j;
    j["version"] = kCorpusVersion;
    j["dialogs"] = json::array();
    for (const auto& d : dialogs) {
        json dj;
        dj["id"] = d.id;
        dj["split"] = d.split;
        dj["turns"] = json::array();
        for (const auto& t : d.turns) {
            json tj;
            tj["system"] = t.system;
            tj["user"] = t.user;
            tj["labels"] = json::object();
            for (const auto& [k, v] : t.labels) tj["labels"][k] = v;
            dj["turns"].push_back(std::move(tj));
        }
        j["dialogs"].push_back(std::move(dj));
    }
    return j.dump(2) + "\n";
}

std::vector<Dialog> load_corpus(const std::string& path) {
    return parse_corpus(read_file(path));
}

void save_corpus(const std::vector<Dialog>& dialogs, const std::string& path) {
    write_file(path, corpus_to_json(dialogs));
}

void validate_corpus(const std::vector<Dialog>& dialogs, const Ontology& ont) {
    std::vector<std::string> offenders;
    for (const auto& d : dialogs) {
        for (std::size_t t = 0; t < d.turns.size(); ++t) {
            for (const auto& [slot, value] : d.turns[t].labels) {
                if (!ont.has_slot(slot)) {
                    offenders.push_back(d.id + " turn " + std::to_string(t) +
                                        ": unknown slot '" + slot + "'");
                } else if (ont.value_index(slot, value) < 0) {
                    offenders.push_back(d.id + " turn " + std::to_string(t) +
                                        ": value '" + value +
                                        "' not in ontology of slot '" + slot +
                                        "'");
                }
            }
        }
    }
    if (!offenders.empty()) {
        std::string msg = "corpus validation failed:";
        for (const auto& o : offenders) msg += "\n  " + o;
        throw DataError(msg);
    }
}

std::pair<Ontology, std::vector<Dialog>> load_woz(
    const std::string& corpus_path, const std::string& ontology_path) {
    Ontology ont = load_ontology(ontology_path);
    std::vector<Dialog> dialogs = load_corpus(corpus_path);
    validate_corpus(dialogs, ont);
    return {std::move(ont), std::move(dialogs)};
}

void split_dialogs(std::vector<Dialog>& dialogs, const double ratios[3],
                   std::uint64_t seed) {
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1, got " +
                          std::to_string(total));
    const std::size_t n = dialogs.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    numcore::Rng rng(seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1],
                  order[static_cast<std::size_t>(rng.uniform_int(
                      static_cast<int>(i)))]);
    const auto n_train = static_cast<std::size_t>(
        std::llround(ratios[0] * static_cast<double>(n)));
    const auto n_dev = std::min(
        n - n_train, static_cast<std::size_t>(
                         std::llround(ratios[1] * static_cast<double>(n))));
    for (std::size_t i = 0; i < n; ++i) {
        auto& d = dialogs[order[i]];
        d.split = i < n_train ? "train" : (i < n_train + n_dev ? "dev" : "test");
    }
}

std::vector<Dialog> dialogs_with_split(const std::vector<Dialog>& dialogs,
                                       const std::string& split) {
    std::vector<Dialog> out;
    for (const auto& d : dialogs)
        if (d.split == split) out.push_back(d);
    return out;
}

}  // namespace sumbt::corpus
