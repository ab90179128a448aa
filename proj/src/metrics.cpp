#include "spdalign/metrics.hpp"

#include <set>

#include "spdalign/error.hpp"

namespace spdalign {

F1Result f1_score(std::span<const int> y_true, std::span<const int> y_pred, F1Average average) {
    if (y_true.size() != y_pred.size()) throw InvalidInput("f1_score: length mismatch");
    if (y_true.empty()) throw InvalidInput("f1_score: empty input");
    std::set<int> cls(y_true.begin(), y_true.end());
    cls.insert(y_pred.begin(), y_pred.end());
    if (average == F1Average::binary) cls.insert(1);

    F1Result out;
    out.classes.assign(cls.begin(), cls.end());
    for (int k : out.classes) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            const bool t = y_true[i] == k;
            const bool p = y_pred[i] == k;
            tp += static_cast<double>(t && p);
            fp += static_cast<double>(!t && p);
            fn += static_cast<double>(t && !p);
        }
        const double denom = 2.0 * tp + fp + fn;
        out.per_class.push_back(denom > 0.0 ? 100.0 * 2.0 * tp / denom : 0.0);
    }
    if (average == F1Average::binary) {
        for (std::size_t k = 0; k < out.classes.size(); ++k) {
            if (out.classes[k] == 1) out.score = out.per_class[k];
        }
    } else {
        double acc = 0.0;
        for (double v : out.per_class) acc += v;
        out.score = acc / static_cast<double>(out.per_class.size());
    }
    return out;
}

}  // namespace spdalign
