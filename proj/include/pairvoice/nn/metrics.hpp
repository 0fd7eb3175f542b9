#pragma once

#include <cstddef>
#include <span>

namespace pairvoice::nn {

// Binary classification summary, label 1 is the positive class.
struct Metrics {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    // Set when precision + recall = 0 and f1 was defined as 0.
    bool f1_undefined = false;
};

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

// A sample is predicted positive when its probability is >= threshold.
Metrics evaluate(std::span<const double> positive_prob, std::span<const int> labels, double threshold = 0.5);

}  // namespace pairvoice::nn
