#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "pairvoice/nn/common.hpp"

namespace pairvoice::nn {

struct GradCheckResult {
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    // sum |analytic - numeric| / sum |analytic|
    double sum_ratio = 0.0;
};

// Compares analytic gradients with central differences at `samples` randomly
// chosen parameter entries (all entries when samples == 0). `loss` must
// evaluate the model with its current parameter values.
inline GradCheckResult gradient_check(const ParamList& params, const std::vector<Matrix>& analytic,
                                      const std::function<double()>& loss, std::size_t samples, std::uint64_t seed,
                                      double eps = 1e-5, double floor = 1e-6) {
    struct Slot {
        std::size_t p, k;
    };
    std::vector<Slot> slots;
    for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t k = 0; k < params[p]->size(); ++k) slots.push_back({p, k});
    if (samples != 0 && samples < slots.size()) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < samples; ++i) std::swap(slots[i], slots[i + rng() % (slots.size() - i)]);
        slots.resize(samples);
    }

    GradCheckResult r;
    double diff_sum = 0.0, ana_sum = 0.0;
    for (const auto& s : slots) {
        double& w = params[s.p]->flat()[s.k];
        const double saved = w;
        w = saved + eps;
        const double up = loss();
        w = saved - eps;
        const double down = loss();
        w = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[s.p].flat()[s.k];
        const double diff = std::abs(a - numeric);
        r.max_rel_error = std::max(r.max_rel_error, diff / std::max({std::abs(a), std::abs(numeric), floor}));
        diff_sum += diff;
        ana_sum += std::abs(a);
        ++r.checked;
    }
    r.sum_ratio = ana_sum > 0.0 ? diff_sum / ana_sum : diff_sum;
    return r;
}

}  // namespace pairvoice::nn
