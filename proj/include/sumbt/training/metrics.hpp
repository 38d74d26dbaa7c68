#pragma once

#include <map>
#include <string>
#include <vector>

#include "sumbt/errors.hpp"

namespace sumbt::training {

// Fraction of turns whose predictions match the cumulative gold state on
// EVERY slot that appears in the gold map. A turn with any missing prediction
// is a data error.
inline double joint_goal_accuracy(
    const std::vector<std::map<std::string, std::string>>& predictions,
    const std::vector<std::map<std::string, std::string>>& labels) {
    if (predictions.size() != labels.size())
        throw DataError("joint_goal_accuracy: turn count mismatch");
    if (labels.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        bool all = true;
        for (const auto& [slot, gold] : labels[t]) {
            auto it = predictions[t].find(slot);
            if (it == predictions[t].end())
                throw DataError("missing prediction for slot '" + slot +
                                "' at turn " + std::to_string(t));
            if (it->second != gold) all = false;
        }
        if (all) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

struct EvalSummary {
    double loss = 0.0;  // mean negative log likelihood per dialog
    double joint_accuracy = 0.0;
    std::map<std::string, double> per_slot_accuracy;
    std::size_t dialog_count = 0;
    std::size_t turn_count = 0;
};

}  // namespace sumbt::training
