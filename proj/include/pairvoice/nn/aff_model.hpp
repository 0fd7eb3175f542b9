#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pairvoice/nn/aff.hpp"
#include "pairvoice/nn/encoder.hpp"

namespace pairvoice::nn {

struct LabeledSpectrogram {
    Matrix power;  // (T, d_freq)
    int label = 0;
    std::string patient_id;
};

// sign(F) * log(1 + |F|), the compression applied to the AFF output.
double signed_log1p(double v);

// Spectrogram -> AFF -> signed log compression -> sequence encoder -> linear
// two-class head.
class AffModel {
public:
    AffModel() = default;
    AffModel(AffMatrix aff, SeqEncoder encoder, std::uint64_t head_seed);

    const AffMatrix& aff() const noexcept { return aff_; }
    AffMatrix& aff() noexcept { return aff_; }
    const SeqEncoder& encoder() const noexcept { return encoder_; }
    const Matrix& head_weights() const noexcept { return head_w_; }
    const Matrix& head_bias() const noexcept { return head_b_; }
    std::uint64_t head_seed() const noexcept { return head_seed_; }

    // Positive-class probability for one spectrogram.
    double predict_positive(const Matrix& power) const;
    std::vector<double> predict_positive(std::span<const LabeledSpectrogram> samples) const;

    double loss_and_gradient(std::span<const LabeledSpectrogram* const> batch, std::vector<Matrix>& grads) const;
    double loss(std::span<const LabeledSpectrogram* const> batch) const;

    // Projection after each update: optional decay, negatives clamped to zero
    // and, between trim events, weights outside the window fixed by the last
    // trim (or by the initial filters) held at zero.
    void on_step_end();
    bool nonnegative_aff = true;
    bool confine_to_window = true;
    // Multiplicative shrink of every AFF weight per update (0 disables).
    double aff_decay = 0.0;

    // Trims the AFF every `trim_period_epochs` epochs (epoch is 0-based).
    void on_epoch_end(int epoch);
    // Final trim so the returned filters always satisfy the trim contract.
    void on_train_end();

    // AFF weights, encoder parameters, head weights, head bias.
    ParamList parameters();
    ConstParamList parameters() const;

    // Assemble from stored parts (deserialization).
    static AffModel from_parts(AffMatrix aff, SeqEncoder encoder, Matrix head_w, Matrix head_b, std::uint64_t head_seed);
    SeqEncoder& mutable_encoder() noexcept { return encoder_; }

private:
    struct Pass {
        Matrix f;
        Matrix g;
        SeqEncoder::Cache enc;
        std::vector<double> pooled;
        double logits[2] = {0.0, 0.0};
    };
    void run(const Matrix& power, Pass& pass) const;
    void reset_window();

    AffMatrix aff_;
    SeqEncoder encoder_;
    Matrix head_w_;  // (d_new, 2)
    Matrix head_b_;  // (1, 2)
    Matrix window_;  // 1 inside each column's [argmax - W, argmax + W]
    std::uint64_t head_seed_ = 0;
};

}  // namespace pairvoice::nn
