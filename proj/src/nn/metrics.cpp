#include "pairvoice/nn/metrics.hpp"

#include "pairvoice/errors.hpp"

namespace pairvoice::nn {

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    const std::size_t total = tp + fp + fn + tn;
    m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f1 = 0.0;
        m.f1_undefined = true;
    }
    return m;
}

Metrics evaluate(std::span<const double> positive_prob, std::span<const int> labels, double threshold) {
    if (positive_prob.size() != labels.size()) throw ShapeError("evaluate: prediction and label counts differ");
    if (labels.empty()) throw InsufficientDataError("evaluate: empty test set");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = positive_prob[i] >= threshold;
        const bool pos = labels[i] == 1;
        if (pred && pos) ++tp;
        else if (pred) ++fp;
        else if (pos) ++fn;
        else ++tn;
    }
    return metrics_from_counts(tp, fp, fn, tn);
}

}  // namespace pairvoice::nn
