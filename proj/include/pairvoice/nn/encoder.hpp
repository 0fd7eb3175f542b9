#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairvoice/nn/common.hpp"

namespace pairvoice::nn {

enum class EncoderKind { mean_pool, attention };

std::string to_string(EncoderKind k);
EncoderKind parse_encoder_kind(std::string_view s);

// Sequence encoder turning a (T, d) feature map into one d-vector.
//
// attention: one single-head block,
//   Q = X Wq, K = X Wk, V = X Wv, A = softmax(Q K^T / sqrt(d_k))
//   H = X + A V
//   Y = H + relu(H W1 + b1) W2 + b2
//   out = mean over time of Y
// with d_k = d. With every weight zero the block is the identity and `out`
// is the temporal mean of X, the same as the mean_pool variant.
class SeqEncoder {
public:
    SeqEncoder() = default;
    SeqEncoder(EncoderKind kind, std::size_t model_dim, std::size_t ff_dim, std::uint64_t seed,
               double init_scale = 1.0);
    static SeqEncoder zeros(EncoderKind kind, std::size_t model_dim, std::size_t ff_dim);

    EncoderKind kind() const noexcept { return kind_; }
    std::size_t model_dim() const noexcept { return dim_; }
    std::size_t ff_dim() const noexcept { return ff_; }

    struct Cache {
        Matrix x, q, k, v, attn, h, u, r;
    };

    std::vector<double> forward(const Matrix& x, Cache* cache = nullptr) const;
    // Accumulates parameter gradients into `grads` (layout of parameters())
    // and returns d loss / d X.
    Matrix backward(const Cache& cache, std::span<const double> grad_out, std::vector<Matrix>& grads) const;

    // Empty for mean_pool. Order: Wq, Wk, Wv, W1, b1, W2, b2.
    ParamList parameters();
    ConstParamList parameters() const;

private:
    EncoderKind kind_ = EncoderKind::mean_pool;
    std::size_t dim_ = 0;
    std::size_t ff_ = 0;
    Matrix wq_, wk_, wv_, w1_, b1_, w2_, b2_;
};

}  // namespace pairvoice::nn
