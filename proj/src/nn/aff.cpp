#include "pairvoice/nn/aff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pairvoice::nn {

Matrix aff_apply(const Matrix& spec_power, const AffMatrix& aff) {
    if (spec_power.cols() != aff.d_freq())
        throw ShapeError("aff_apply: spectrogram has " + std::to_string(spec_power.cols()) + " bins, AFF expects " +
                         std::to_string(aff.d_freq()));
    return matmul(spec_power, aff.weights);
}

Matrix aff_weight_gradient(const Matrix& spec_power, const Matrix& grad_f) {
    return matmul_at_b(spec_power, grad_f);
}

Matrix aff_input_gradient(const Matrix& grad_f, const AffMatrix& aff) { return matmul_a_bt(grad_f, aff.weights); }

AffMatrix aff_init_mfcc(const MelFilterBank& bank, std::size_t d_freq, std::size_t d_new, int trim_halfwidth_bins,
                        int trim_period_epochs) {
    if (bank.weights.rows() != d_freq || bank.weights.cols() != d_new)
        throw ShapeError("aff_init_mfcc: filter bank is (" + std::to_string(bank.weights.rows()) + ", " +
                         std::to_string(bank.weights.cols()) + "), AFF wants (" + std::to_string(d_freq) + ", " +
                         std::to_string(d_new) + ")");
    if (trim_halfwidth_bins < 0 || trim_period_epochs < 1)
        throw ConfigError("aff: trim half-width must be >= 0 and period >= 1");
    AffMatrix aff;
    aff.weights = bank.weights;
    aff.trim_halfwidth_bins = trim_halfwidth_bins;
    aff.trim_period_epochs = trim_period_epochs;
    return aff;
}

void aff_trim_inplace(AffMatrix& aff) {
    const std::size_t rows = aff.d_freq();
    const auto w = static_cast<std::size_t>(std::max(aff.trim_halfwidth_bins, 0));
    for (std::size_t j = 0; j < aff.d_new(); ++j) {
        std::size_t peak = 0;
        for (std::size_t k = 1; k < rows; ++k)
            if (aff.weights(k, j) > aff.weights(peak, j)) peak = k;
        const std::size_t lo = peak > w ? peak - w : 0;
        const std::size_t hi = std::min(rows - 1, peak + w);
        for (std::size_t k = 0; k < rows; ++k) {
            double& v = aff.weights(k, j);
            if (k < lo || k > hi || v < 0.0) v = 0.0;
        }
    }
}

AffMatrix aff_trim(const AffMatrix& aff) {
    AffMatrix out = aff;
    aff_trim_inplace(out);
    return out;
}

std::size_t empty_columns(const AffMatrix& aff) {
    std::size_t n = 0;
    for (std::size_t j = 0; j < aff.d_new(); ++j) {
        bool any = false;
        for (std::size_t k = 0; k < aff.d_freq() && !any; ++k) any = aff.weights(k, j) != 0.0;
        if (!any) ++n;
    }
    return n;
}

std::vector<double> importance_curve(const AffMatrix& aff) {
    std::vector<double> curve(aff.d_freq(), 0.0);
    for (std::size_t k = 0; k < aff.d_freq(); ++k)
        for (double v : aff.weights.row(k)) curve[k] += v;
    const double mx = curve.empty() ? 0.0 : *std::max_element(curve.begin(), curve.end());
    if (!(mx > 0.0)) throw DegenerateError("importance curve: AFF has no positive row sum");
    for (auto& v : curve) v /= mx;
    return curve;
}

ImportanceAggregate aggregate_importance(std::span<const std::vector<double>> curves) {
    if (curves.empty()) throw InsufficientDataError("aggregate importance: no curves");
    const std::size_t n = curves.front().size();
    for (const auto& c : curves)
        if (c.size() != n) throw ShapeError("aggregate importance: curves differ in length");
    ImportanceAggregate agg;
    agg.mean.assign(n, 0.0);
    agg.stddev.assign(n, 0.0);
    const double m = static_cast<double>(curves.size());
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (const auto& c : curves) s += c[k];
        const double mean = s / m;
        double ss = 0.0;
        for (const auto& c : curves) ss += (c[k] - mean) * (c[k] - mean);
        agg.mean[k] = mean;
        agg.stddev[k] = std::sqrt(ss / m);
    }
    return agg;
}

double band_mass(std::span<const double> curve, double bin_hz, double lo_hz, double hi_hz) {
    double s = 0.0;
    for (std::size_t k = 0; k < curve.size(); ++k) {
        const double f = static_cast<double>(k) * bin_hz;
        if (f >= lo_hz && f <= hi_hz) s += curve[k];
    }
    return s;
}

}  // namespace pairvoice::nn
