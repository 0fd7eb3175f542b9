#include "pairvoice/nn/encoder.hpp"

#include <cmath>

#include "pairvoice/csv.hpp"

namespace pairvoice::nn {

std::string to_string(EncoderKind k) { return k == EncoderKind::mean_pool ? "mean_pool" : "attention"; }

EncoderKind parse_encoder_kind(std::string_view s) {
    const std::string t = csv::lower(csv::trim(s));
    if (t == "mean_pool" || t == "mean" || t == "meanpool") return EncoderKind::mean_pool;
    if (t == "attention" || t == "transformer") return EncoderKind::attention;
    throw ConfigError("unknown encoder '" + std::string(s) + "'");
}

SeqEncoder SeqEncoder::zeros(EncoderKind kind, std::size_t model_dim, std::size_t ff_dim) {
    if (model_dim == 0) throw ShapeError("encoder: model dimension must be positive");
    SeqEncoder e;
    e.kind_ = kind;
    e.dim_ = model_dim;
    e.ff_ = ff_dim;
    if (kind == EncoderKind::attention) {
        if (ff_dim == 0) throw ShapeError("encoder: feed-forward dimension must be positive");
        e.wq_ = Matrix(model_dim, model_dim);
        e.wk_ = Matrix(model_dim, model_dim);
        e.wv_ = Matrix(model_dim, model_dim);
        e.w1_ = Matrix(model_dim, ff_dim);
        e.b1_ = Matrix(1, ff_dim);
        e.w2_ = Matrix(ff_dim, model_dim);
        e.b2_ = Matrix(1, model_dim);
    }
    return e;
}

SeqEncoder::SeqEncoder(EncoderKind kind, std::size_t model_dim, std::size_t ff_dim, std::uint64_t seed,
                       double init_scale)
    : SeqEncoder(zeros(kind, model_dim, ff_dim)) {
    if (kind != EncoderKind::attention) return;
    std::mt19937_64 rng(seed);
    const double lim_d = init_scale * std::sqrt(3.0 / static_cast<double>(model_dim));
    const double lim_f = init_scale * std::sqrt(3.0 / static_cast<double>(ff_dim));
    uniform_fill(wq_, lim_d, rng);
    uniform_fill(wk_, lim_d, rng);
    uniform_fill(wv_, lim_d, rng);
    uniform_fill(w1_, lim_d, rng);
    uniform_fill(w2_, lim_f, rng);
}

ParamList SeqEncoder::parameters() {
    if (kind_ == EncoderKind::mean_pool) return {};
    return {&wq_, &wk_, &wv_, &w1_, &b1_, &w2_, &b2_};
}

ConstParamList SeqEncoder::parameters() const {
    if (kind_ == EncoderKind::mean_pool) return {};
    return {&wq_, &wk_, &wv_, &w1_, &b1_, &w2_, &b2_};
}

namespace {

std::vector<double> temporal_mean(const Matrix& m) {
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t t = 0; t < m.rows(); ++t) {
        const auto r = m.row(t);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
    }
    for (auto& v : out) v /= static_cast<double>(m.rows());
    return out;
}

}  // namespace

std::vector<double> SeqEncoder::forward(const Matrix& x, Cache* cache) const {
    if (x.rows() == 0) throw ShapeError("encoder: empty sequence");
    if (x.cols() != dim_)
        throw ShapeError("encoder: input width " + std::to_string(x.cols()) + ", expected " + std::to_string(dim_));
    if (kind_ == EncoderKind::mean_pool) {
        if (cache) cache->x = x;
        return temporal_mean(x);
    }

    Matrix q = matmul(x, wq_);
    Matrix k = matmul(x, wk_);
    Matrix v = matmul(x, wv_);
    Matrix scores = matmul_a_bt(q, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
    for (auto& s : scores.flat()) s *= scale;
    Matrix attn = softmax_rows(scores);
    Matrix h = matmul(attn, v);
    add_inplace(h, x);
    Matrix u = affine(h, w1_, b1_);
    Matrix r = u;
    relu_inplace(r);
    Matrix y = affine(r, w2_, b2_);
    add_inplace(y, h);
    auto out = temporal_mean(y);
    if (cache) {
        cache->x = x;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn);
        cache->h = std::move(h);
        cache->u = std::move(u);
        cache->r = std::move(r);
    }
    return out;
}

Matrix SeqEncoder::backward(const Cache& c, std::span<const double> grad_out, std::vector<Matrix>& grads) const {
    if (grad_out.size() != dim_) throw ShapeError("encoder backward: gradient width mismatch");
    const std::size_t t_len = c.x.rows();
    Matrix dy(t_len, dim_);
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t j = 0; j < dim_; ++j) dy(t, j) = grad_out[j] / static_cast<double>(t_len);
    if (kind_ == EncoderKind::mean_pool) return dy;

    if (grads.size() != 7) {
        grads.clear();
        for (const auto* p : parameters()) grads.emplace_back(p->rows(), p->cols());
    }

    // Feed-forward with residual.
    add_inplace(grads[5], matmul_at_b(c.r, dy));
    add_inplace(grads[6], column_sums(dy));
    Matrix du = matmul_a_bt(dy, w2_);
    relu_backward_inplace(du, c.u);
    add_inplace(grads[3], matmul_at_b(c.h, du));
    add_inplace(grads[4], column_sums(du));
    Matrix dh = matmul_a_bt(du, w1_);
    add_inplace(dh, dy);

    // Attention with residual.
    Matrix dx = dh;
    Matrix d_attn = matmul_a_bt(dh, c.v);
    Matrix dv = matmul_at_b(c.attn, dh);
    Matrix ds(t_len, t_len);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
    for (std::size_t i = 0; i < t_len; ++i) {
        const auto a = c.attn.row(i);
        const auto g = d_attn.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < t_len; ++j) dot += a[j] * g[j];
        for (std::size_t j = 0; j < t_len; ++j) ds(i, j) = a[j] * (g[j] - dot) * scale;
    }
    Matrix dq = matmul(ds, c.k);
    Matrix dk = matmul_at_b(ds, c.q);

    add_inplace(grads[0], matmul_at_b(c.x, dq));
    add_inplace(grads[1], matmul_at_b(c.x, dk));
    add_inplace(grads[2], matmul_at_b(c.x, dv));
    add_inplace(dx, matmul_a_bt(dq, wq_));
    add_inplace(dx, matmul_a_bt(dk, wk_));
    add_inplace(dx, matmul_a_bt(dv, wv_));
    return dx;
}

}  // namespace pairvoice::nn
