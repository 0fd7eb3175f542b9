#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "pairvoice/nn/common.hpp"

namespace pairvoice::nn {

template <class S>
concept VectorSample = requires(const S& s) {
    { s.x } -> std::convertible_to<const std::vector<double>&>;
    { s.label } -> std::convertible_to<int>;
};

// Three fully connected layers, in -> h1 -> h2 -> 2, ReLU hidden units and a
// softmax output; column 1 of the output is the positive class.
class DenseNet3 {
public:
    DenseNet3() = default;
    // He-uniform weights, zero biases.
    DenseNet3(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2, std::uint64_t seed);
    // `seed` is only recorded (deserialization keeps the original init seed).
    static DenseNet3 zeros(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2, std::uint64_t seed = 0);

    std::size_t input_dim() const noexcept { return w1_.rows(); }
    std::size_t hidden1() const noexcept { return w1_.cols(); }
    std::size_t hidden2() const noexcept { return w2_.cols(); }
    std::uint64_t seed() const noexcept { return seed_; }

    // (B, input_dim) -> (B, 2) probabilities.
    Matrix forward(const Matrix& x) const;
    // Mean cross-entropy; fills `grads` (same layout as parameters()).
    double loss_and_gradient(const Matrix& x, std::span<const int> labels, std::vector<Matrix>& grads) const;
    double loss(const Matrix& x, std::span<const int> labels) const;

    template <VectorSample S>
    double loss_and_gradient(std::span<const S* const> batch, std::vector<Matrix>& grads) const {
        Matrix x;
        std::vector<int> y;
        gather(batch, x, y);
        return loss_and_gradient(x, y, grads);
    }

    template <VectorSample S>
    std::vector<double> predict_positive(std::span<const S> samples) const {
        if (samples.empty()) return {};
        Matrix x(samples.size(), input_dim());
        for (std::size_t i = 0; i < samples.size(); ++i) copy_row(samples[i].x, x, i);
        const Matrix p = forward(x);
        std::vector<double> out(samples.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = p(i, 1);
        return out;
    }

    ParamList parameters() { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }
    ConstParamList parameters() const { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }

private:
    void check_input(const Matrix& x) const;
    void copy_row(const std::vector<double>& v, Matrix& x, std::size_t i) const;

    template <VectorSample S>
    void gather(std::span<const S* const> batch, Matrix& x, std::vector<int>& y) const {
        x = Matrix(batch.size(), input_dim());
        y.resize(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            copy_row(batch[i]->x, x, i);
            y[i] = batch[i]->label;
        }
    }

    Matrix w1_, b1_, w2_, b2_, w3_, b3_;
    std::uint64_t seed_ = 0;
};

}  // namespace pairvoice::nn
