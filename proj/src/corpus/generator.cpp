#include "sumbt/corpus/generator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sumbt/errors.hpp"
#include "sumbt/numcore/rng.hpp"

namespace sumbt::corpus {

using nlohmann::json;
using numcore::Rng;

void GeneratorSpec::validate() const {
    if (dialog_count <= 0) throw ConfigError("dialog_count must be positive");
    if (min_turns < 1 || max_turns < min_turns)
        throw ConfigError("bad turn-count range");
    for (double p : {label_change_prob, chitchat_prob, paraphrase_prob,
                     multi_domain_prob, two_slot_prob})
        if (p < 0.0 || p > 1.0) throw ConfigError("probabilities must be in [0,1]");
    if (domains.empty()) throw ConfigError("generator needs at least 1 domain");
    for (const auto& d : domains) {
        if (d.slots.empty())
            throw ConfigError("domain " + d.name + " has no slots");
        for (const auto& s : d.slots) {
            if (s.values.empty())
                throw DataError("slot " + d.name + "-" + s.name +
                                " has an empty value inventory");
            if (s.templates.empty())
                throw ConfigError("slot " + d.name + "-" + s.name +
                                  " has no templates");
            for (const auto& t : s.templates)
                if (t.find("{}") == std::string::npos)
                    throw ConfigError("template without {} in slot " + s.name);
        }
    }
}

GeneratorSpec default_generator_spec() {
    GeneratorSpec g;

    const std::vector<ValueSpec> price = {
        {"cheap", {"inexpensive", "budget friendly", "low priced"}},
        {"moderate", {"reasonably priced", "mid range", "moderately priced"}},
        {"expensive", {"high end", "pricey", "upscale"}},
        {"luxury", {"premium", "lavish"}},
    };
    const std::vector<ValueSpec> area = {
        {"north", {"up north", "northern part of town"}},
        {"south", {"down south", "southern side"}},
        {"east", {"east end", "eastern side"}},
        {"west", {"west side", "western part"}},
        {"centre", {"downtown", "city centre", "central area"}},
    };

    DomainSpec restaurant;
    restaurant.name = "restaurant";
    restaurant.slots = {
        {"price range",
         price,
         {"i want something {} to eat", "find me a {} place to dine",
          "the restaurant should be {}", "i am after a {} meal"},
         "do you have a price range in mind"},
        {"area",
         area,
         {"i would like a restaurant in the {}", "somewhere in the {} please",
          "find a place to eat in the {}"},
         "which part of town should the restaurant be in"},
        {"food",
         {{"korean", {"from korea"}},
          {"italian", {"pasta and pizza"}},
          {"chinese", {"from china"}},
          {"indian", {"spicy curry"}},
          {"british", {"traditional english"}},
          {"french", {"from france"}},
          {"thai", {"from thailand"}}},
         {"i am looking for {} food", "can you find a {} restaurant",
          "i fancy some {} cooking"},
         "what kind of food would you like"},
    };

    DomainSpec hotel;
    hotel.name = "hotel";
    hotel.slots = {
        {"price range",
         price,
         {"i need a {} hotel", "the hotel should be {}",
          "looking for a {} place to stay"},
         "what price range should the hotel be"},
        {"area",
         area,
         {"i want a hotel in the {}", "the hotel should be in the {}",
          "find me a room in the {}"},
         "which area should the hotel be in"},
        {"stars",
         {{"two", {"just two"}},
          {"three", {"exactly three"}},
          {"four", {"no less than four"}},
          {"five", {"a full five"}}},
         {"i want a hotel with {} stars", "the hotel should have {} stars",
          "give me a hotel rated {} stars"},
         "how many stars should the hotel have"},
    };

    g.domains = {restaurant, hotel};
    g.greetings = {"hello , how can i help you",
                   "good day , what can i do for you"};
    g.acks = {"okay , noted", "sure , anything else",
              "alright , i will keep that in mind",
              "got it , any other preferences"};
    g.chitchat = {"thank you so much", "that sounds good",
                  "great , thanks for the help", "okay thank you"};
    return g;
}

namespace {

json value_spec_to_json(const ValueSpec& v) {
    return json{{"label", v.label}, {"paraphrases", v.paraphrases}};
}

ValueSpec value_spec_from_json(const json& j) {
    ValueSpec v;
    v.label = j.at("label").get<std::string>();
    if (j.contains("paraphrases"))
        v.paraphrases = j["paraphrases"].get<std::vector<std::string>>();
    return v;
}

}  // namespace

std::string generator_spec_to_json(const GeneratorSpec& g) {
    json j;
    j["seed"] = g.seed;
    j["dialog_count"] = g.dialog_count;
    j["min_turns"] = g.min_turns;
    j["max_turns"] = g.max_turns;
    j["label_change_prob"] = g.label_change_prob;
    j["chitchat_prob"] = g.chitchat_prob;
    j["paraphrase_prob"] = g.paraphrase_prob;
    j["multi_domain_prob"] = g.multi_domain_prob;
    j["two_slot_prob"] = g.two_slot_prob;
    j["split_ratios"] =
        json::array({g.split_ratios[0], g.split_ratios[1], g.split_ratios[2]});
    j["greetings"] = g.greetings;
    j["acks"] = g.acks;
    j["chitchat"] = g.chitchat;
    j["domains"] = json::array();
    for (const auto& d : g.domains) {
        json dj;
        dj["name"] = d.name;
        dj["slots"] = json::array();
        for (const auto& s : d.slots) {
            json sj;
            sj["name"] = s.name;
            sj["request"] = s.request;
            sj["templates"] = s.templates;
            sj["values"] = json::array();
            for (const auto& v : s.values)
                sj["values"].push_back(value_spec_to_json(v));
            dj["slots"].push_back(std::move(sj));
        }
        j["domains"].push_back(std::move(dj));
    }
    return j.dump(2) + "\n";
}

GeneratorSpec parse_generator_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed generator spec: ") + e.what());
    }
    GeneratorSpec g = default_generator_spec();
    if (j.contains("domains")) g.domains.clear();
    g.seed = j.value("seed", g.seed);
    g.dialog_count = j.value("dialog_count", g.dialog_count);
    g.min_turns = j.value("min_turns", g.min_turns);
    g.max_turns = j.value("max_turns", g.max_turns);
    g.label_change_prob = j.value("label_change_prob", g.label_change_prob);
    g.chitchat_prob = j.value("chitchat_prob", g.chitchat_prob);
    g.paraphrase_prob = j.value("paraphrase_prob", g.paraphrase_prob);
    g.multi_domain_prob = j.value("multi_domain_prob", g.multi_domain_prob);
    g.two_slot_prob = j.value("two_slot_prob", g.two_slot_prob);
    if (j.contains("split_ratios")) {
        const auto r = j["split_ratios"].get<std::vector<double>>();
        if (r.size() != 3)
            throw ConfigError("split_ratios must have 3 entries");
        for (int i = 0; i < 3; ++i) g.split_ratios[i] = r[i];
    }
    if (j.contains("greetings"))
        g.greetings = j["greetings"].get<std::vector<std::string>>();
    if (j.contains("acks")) g.acks = j["acks"].get<std::vector<std::string>>();
    if (j.contains("chitchat"))
        g.chitchat = j["chitchat"].get<std::vector<std::string>>();
    for (const auto& dj : j.value("domains", json::array())) {
        DomainSpec d;
        d.name = dj.at("name").get<std::string>();
        for (const auto& sj : dj.at("slots")) {
            SlotSpec s;
            s.name = sj.at("name").get<std::string>();
            s.request = sj.value("request", std::string());
            s.templates = sj.at("templates").get<std::vector<std::string>>();
            for (const auto& vj : sj.at("values"))
                s.values.push_back(value_spec_from_json(vj));
            d.slots.push_back(std::move(s));
        }
        g.domains.push_back(std::move(d));
    }
    g.validate();
    return g;
}

GeneratorSpec load_generator_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open generator spec: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_generator_spec(buf.str());
}

namespace {

struct SlotRef {
    int domain;
    int slot;
};

std::string realize_template(const std::string& tmpl,
                             const std::string& surface) {
    const auto pos = tmpl.find("{}");
    return tmpl.substr(0, pos) + surface + tmpl.substr(pos + 2);
}

const std::string& choice(const std::vector<std::string>& v, Rng& rng) {
    return v[static_cast<std::size_t>(rng.uniform_int(
        static_cast<int>(v.size())))];
}

}  // namespace

GeneratedCorpus generate_synthetic(const GeneratorSpec& spec) {
    spec.validate();
    GeneratedCorpus out;

    // Ontology: "none" first, then inventory order.
    for (const auto& d : spec.domains) {
        for (const auto& s : d.slots) {
            SlotDef def;
            def.name = d.name + "-" + s.name;
            def.domain = d.name;
            def.slot = s.name;
            def.values.push_back("none");
            for (const auto& v : s.values) def.values.push_back(v.label);
            out.ontology.slots.push_back(std::move(def));
        }
    }
    std::sort(out.ontology.slots.begin(), out.ontology.slots.end(),
              [](const SlotDef& a, const SlotDef& b) { return a.name < b.name; });
    out.ontology.validate();

    Rng corpus_rng(spec.seed);
    const int n_domains = static_cast<int>(spec.domains.size());

    for (int di = 0; di < spec.dialog_count; ++di) {
        Rng rng = corpus_rng.fork(static_cast<std::uint64_t>(di) + 1);
        Dialog dlg;
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "dlg-%04d", di);
        dlg.id = idbuf;
        dlg.split = "train";

        const int turns =
            spec.min_turns + rng.uniform_int(spec.max_turns - spec.min_turns + 1);
        const int primary = rng.uniform_int(n_domains);
        const bool two_domains =
            n_domains > 1 && rng.bernoulli(spec.multi_domain_prob);
        int secondary = primary;
        if (two_domains)
            secondary = (primary + 1 + rng.uniform_int(n_domains - 1)) % n_domains;
        const int switch_turn = two_domains ? (turns + 1) / 2 : turns;

        std::map<std::string, std::string> state;  // non-none labels only
        int pending_request = -1;  // slot index within the active domain

        for (int t = 0; t < turns; ++t) {
            const int dom = t >= switch_turn ? secondary : primary;
            const auto& dspec = spec.domains[static_cast<std::size_t>(dom)];
            Turn turn;

            if (t == 0) {
                turn.system =
                    rng.bernoulli(0.7) ? "" : choice(spec.greetings, rng);
            } else if (pending_request >= 0 && rng.bernoulli(0.6)) {
                turn.system =
                    dspec.slots[static_cast<std::size_t>(pending_request)].request;
            } else {
                turn.system = choice(spec.acks, rng);
            }
            pending_request = -1;

            if (t > 0 && rng.bernoulli(spec.chitchat_prob)) {
                turn.user = choice(spec.chitchat, rng);
            } else {
                std::vector<std::string> clauses;
                auto realize = [&](int d2, int s2, bool change) {
                    const auto& sspec =
                        spec.domains[static_cast<std::size_t>(d2)]
                            .slots[static_cast<std::size_t>(s2)];
                    const std::string slot_name =
                        spec.domains[static_cast<std::size_t>(d2)].name + "-" +
                        sspec.name;
                    // Pick a value different from the current one on change.
                    int vi;
                    do {
                        vi = rng.uniform_int(static_cast<int>(sspec.values.size()));
                    } while (change &&
                             sspec.values[static_cast<std::size_t>(vi)].label ==
                                 state[slot_name] &&
                             sspec.values.size() > 1);
                    const auto& vs = sspec.values[static_cast<std::size_t>(vi)];
                    std::string surface = vs.label;
                    if (!vs.paraphrases.empty() &&
                        rng.bernoulli(spec.paraphrase_prob))
                        surface = choice(vs.paraphrases, rng);
                    ++out.stats.value_mentions;
                    if (surface != vs.label) ++out.stats.paraphrased;
                    std::string clause =
                        realize_template(choice(sspec.templates, rng), surface);
                    if (change) clause = "actually " + clause;
                    clauses.push_back(std::move(clause));
                    state[slot_name] = vs.label;
                };

                // Change event: rewrite one already-set slot.
                if (!state.empty() && rng.bernoulli(spec.label_change_prob)) {
                    const int pick = rng.uniform_int(static_cast<int>(state.size()));
                    auto it = state.begin();
                    std::advance(it, pick);
                    for (int d2 = 0; d2 < n_domains; ++d2) {
                        const auto& ds = spec.domains[static_cast<std::size_t>(d2)];
                        for (std::size_t s2 = 0; s2 < ds.slots.size(); ++s2) {
                            if (ds.name + "-" + ds.slots[s2].name == it->first)
                                realize(d2, static_cast<int>(s2), true);
                        }
                    }
                }

                // Inform 1-2 not-yet-set slots of the active domain.
                std::vector<int> unset;
                for (std::size_t s2 = 0; s2 < dspec.slots.size(); ++s2)
                    if (!state.count(dspec.name + "-" + dspec.slots[s2].name))
                        unset.push_back(static_cast<int>(s2));
                int want = 1 + (rng.bernoulli(spec.two_slot_prob) ? 1 : 0);
                if (!clauses.empty()) want -= 1;
                for (int k = 0; k < want && !unset.empty(); ++k) {
                    const int pick = rng.uniform_int(static_cast<int>(unset.size()));
                    realize(dom, unset[static_cast<std::size_t>(pick)], false);
                    unset.erase(unset.begin() + pick);
                }
                if (clauses.empty() && !unset.empty()) {
                    const int pick = rng.uniform_int(static_cast<int>(unset.size()));
                    realize(dom, unset[static_cast<std::size_t>(pick)], false);
                    unset.erase(unset.begin() + pick);
                }
                if (clauses.empty()) {
                    turn.user = choice(spec.chitchat, rng);
                } else {
                    turn.user = clauses[0];
                    for (std::size_t c = 1; c < clauses.size(); ++c)
                        turn.user += " and " + clauses[c];
                }
                if (!unset.empty())
                    pending_request =
                        unset[static_cast<std::size_t>(rng.uniform_int(
                            static_cast<int>(unset.size())))];
            }

            turn.labels = state;
            out.stats.label_count += state.size();
            dlg.turns.push_back(std::move(turn));
        }
        out.stats.turn_count += dlg.turns.size();
        out.dialogs.push_back(std::move(dlg));
    }
    out.stats.dialog_count = out.dialogs.size();
    return out;
}

}  // namespace sumbt::corpus
