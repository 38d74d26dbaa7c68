#include "sumbt/encoder/pretrain.hpp"

namespace sumbt::encoder {

std::vector<std::string> pretraining_texts(
    const std::vector<corpus::Dialog>& dialogs, const corpus::Ontology& ont) {
    std::vector<std::string> texts;
    for (const auto& d : dialogs) {
        for (const auto& t : d.turns) {
            if (!t.system.empty()) texts.push_back(t.system);
            if (!t.user.empty()) texts.push_back(t.user);
        }
    }
    for (const auto& s : ont.slots) {
        texts.push_back(s.phrase());
        for (const auto& v : s.values) texts.push_back(v);
    }
    return texts;
}

}  // namespace sumbt::encoder
