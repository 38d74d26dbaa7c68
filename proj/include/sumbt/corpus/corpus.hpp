#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sumbt::corpus {

// One domain-slot-type and its ordered candidate list. Candidate lists always
// start with "none" (the "nothing expressed yet" candidate).
struct SlotDef {
    std::string name;    // "restaurant-price range"
    std::string domain;  // "restaurant"
    std::string slot;    // "price range"
    std::vector<std::string> values;

    // Text fed to the slot/value encoder: "restaurant - price range".
    std::string phrase() const { return domain + " - " + slot; }
};

struct Ontology {
    std::vector<SlotDef> slots;  // deterministic (key-sorted) order

    bool has_slot(const std::string& name) const;
    const SlotDef& slot(const std::string& name) const;  // DataError if absent
    // Index of `value` in the slot's candidate list, -1 if absent.
    int value_index(const std::string& slot_name,
                    const std::string& value) const;
    std::size_t total_values() const;

    void validate() const;  // uniqueness, >= 2 candidates, "none" present
};

struct Turn {
    std::string system;
    std::string user;
    // Cumulative belief state; slots absent from the map mean "none".
    std::map<std::string, std::string> labels;
};

struct Dialog {
    std::string id;
    std::string split;  // "train" | "dev" | "test"
    std::vector<Turn> turns;
};

// JSON I/O. Both formats are versioned; see README for the schemas.
Ontology parse_ontology(const std::string& json_text);
std::string ontology_to_json(const Ontology& ont);
Ontology load_ontology(const std::string& path);
void save_ontology(const Ontology& ont, const std::string& path);

std::vector<Dialog> parse_corpus(const std::string& json_text);
std::string corpus_to_json(const std::vector<Dialog>& dialogs);
std::vector<Dialog> load_corpus(const std::string& path);
void save_corpus(const std::vector<Dialog>& dialogs, const std::string& path);

// Loads corpus + ontology together and validates labels against the
// ontology; throws DataError listing every offending (dialog, slot, value).
std::pair<Ontology, std::vector<Dialog>> load_woz(
    const std::string& corpus_path, const std::string& ontology_path);

void validate_corpus(const std::vector<Dialog>& dialogs, const Ontology& ont);

// Dialog-level split tagging. Ratios are (train, dev, test) and must sum to
// 1; the partition is exact, disjoint, and deterministic per seed.
void split_dialogs(std::vector<Dialog>& dialogs, const double ratios[3],
                   std::uint64_t seed);

std::vector<Dialog> dialogs_with_split(const std::vector<Dialog>& dialogs,
                                       const std::string& split);

}  // namespace sumbt::corpus
