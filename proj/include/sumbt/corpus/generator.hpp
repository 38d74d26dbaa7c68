#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sumbt/corpus/corpus.hpp"

namespace sumbt::corpus {

// Deterministic template-based multi-domain dialog generator. Surface forms
// are drawn from per-value paraphrase sets so that labels are frequently not
// verbatim in the text, and labels accumulate across turns (a slot keeps its
// value until a change event rewrites it).
struct ValueSpec {
    std::string label;
    std::vector<std::string> paraphrases;
};

struct SlotSpec {
    std::string name;  // slot part only, e.g. "price range"
    std::vector<ValueSpec> values;
    std::vector<std::string> templates;  // user inform templates with one {}
    std::string request;                 // system request utterance
};

struct DomainSpec {
    std::string name;
    std::vector<SlotSpec> slots;
};

struct GeneratorSpec {
    std::uint64_t seed = 13;
    int dialog_count = 400;
    int min_turns = 2;
    int max_turns = 5;
    double label_change_prob = 0.12;
    double chitchat_prob = 0.08;
    double paraphrase_prob = 0.45;
    double multi_domain_prob = 0.25;
    double two_slot_prob = 0.35;
    double split_ratios[3] = {0.7, 0.15, 0.15};
    std::vector<DomainSpec> domains;
    std::vector<std::string> greetings;
    std::vector<std::string> acks;
    std::vector<std::string> chitchat;

    void validate() const;  // throws ConfigError / DataError
};

// Two domains (restaurant, hotel), three slots each, 5-8 candidates per slot.
GeneratorSpec default_generator_spec();

GeneratorSpec parse_generator_spec(const std::string& json_text);
std::string generator_spec_to_json(const GeneratorSpec& spec);
GeneratorSpec load_generator_spec(const std::string& path);

struct GenStats {
    std::size_t dialog_count = 0;
    std::size_t turn_count = 0;
    std::size_t label_count = 0;       // non-none labels over all turns
    std::size_t value_mentions = 0;    // realized value surfaces
    std::size_t paraphrased = 0;       // surfaces that differ from the label
    double paraphrase_rate() const {
        return value_mentions == 0
                   ? 0.0
                   : static_cast<double>(paraphrased) /
                         static_cast<double>(value_mentions);
    }
};

struct GeneratedCorpus {
    Ontology ontology;
    std::vector<Dialog> dialogs;  // split tags not yet assigned
    GenStats stats;
};

GeneratedCorpus generate_synthetic(const GeneratorSpec& spec);

}  // namespace sumbt::corpus
