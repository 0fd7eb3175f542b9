#pragma once

#include <span>
#include <vector>

#include "pairvoice/audio.hpp"
#include "pairvoice/matrix.hpp"

namespace pairvoice::nn {

// Adaptive frequency filter: a trainable (d_freq, d_new) projection applied to
// a power spectrogram, F(T, d_new) = S(T, d_freq) x AFF. Each column is one
// filter with a weight on every frequency bin.
struct AffMatrix {
    Matrix weights;
    int trim_halfwidth_bins = 12;
    int trim_period_epochs = 5;

    std::size_t d_freq() const noexcept { return weights.rows(); }
    std::size_t d_new() const noexcept { return weights.cols(); }
};

Matrix aff_apply(const Matrix& spec_power, const AffMatrix& aff);
// d loss / d AFF = S^T * (d loss / d F)
Matrix aff_weight_gradient(const Matrix& spec_power, const Matrix& grad_f);
// d loss / d S = (d loss / d F) * AFF^T
Matrix aff_input_gradient(const Matrix& grad_f, const AffMatrix& aff);

// Weights copied from a mel filter bank; ShapeError unless its shape is (d_freq, d_new).
AffMatrix aff_init_mfcc(const MelFilterBank& bank, std::size_t d_freq, std::size_t d_new, int trim_halfwidth_bins = 12,
                        int trim_period_epochs = 5);

// Per column: keep [argmax - W, argmax + W] (first index wins ties), zero the
// rest and clamp negatives to zero.
AffMatrix aff_trim(const AffMatrix& aff);
void aff_trim_inplace(AffMatrix& aff);

// Columns whose support is empty (all zero).
std::size_t empty_columns(const AffMatrix& aff);

// Row sums of the AFF, scaled so the maximum is 1. DegenerateError when all zero.
std::vector<double> importance_curve(const AffMatrix& aff);

struct ImportanceAggregate {
    std::vector<double> mean;
    std::vector<double> stddev;  // population std across curves
};
ImportanceAggregate aggregate_importance(std::span<const std::vector<double>> curves);

// Sum of the curve over bins whose centre frequency lies in [lo_hz, hi_hz].
double band_mass(std::span<const double> curve, double bin_hz, double lo_hz, double hi_hz);

}  // namespace pairvoice::nn
