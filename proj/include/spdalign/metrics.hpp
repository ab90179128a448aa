#pragma once

#include <span>
#include <vector>

namespace spdalign {

enum class F1Average { macro, binary };

struct F1Result {
    double score;                   // percent
    std::vector<int> classes;       // sorted
    std::vector<double> per_class;  // percent, aligned with `classes`
};

/// F1 = 2PR/(P+R) per class (0 when undefined), averaged over the union of
/// observed classes (macro) or reported for class 1 (binary). Percentages.
F1Result f1_score(std::span<const int> y_true, std::span<const int> y_pred,
                  F1Average average = F1Average::macro);

}  // namespace spdalign
