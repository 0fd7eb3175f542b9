#include "pairvoice/nn/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pairvoice::nn {

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto in = logits.row(i);
        auto out = p.row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double z = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            out[j] = std::exp(in[j] - mx);
            z += out[j];
        }
        for (auto& v : out) v /= z;
    }
    return p;
}

double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
    if (labels.size() != logits.rows()) throw ShapeError("cross entropy: label count differs from batch size");
    const Matrix p = softmax_rows(logits);
    const double n = static_cast<double>(logits.rows());
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        if (y >= logits.cols()) throw ShapeError("cross entropy: label out of range");
        // log softmax computed directly for accuracy when p is tiny
        const auto row = logits.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        loss -= (row[y] - mx) - std::log(z);
    }
    if (grad) {
        *grad = p;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            (*grad)(i, static_cast<std::size_t>(labels[i])) -= 1.0;
            for (auto& v : grad->row(i)) v /= n;
        }
    }
    return loss / n;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
    if (b.rows() != 1 || b.cols() != w.cols()) throw ShapeError("affine: bias shape mismatch");
    Matrix out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += b(0, j);
    }
    return out;
}

void relu_inplace(Matrix& m) {
    // NaN passes through so a bad input surfaces as a non-finite loss.
    for (auto& v : m.flat())
        if (v < 0.0) v = 0.0;
}

void relu_backward_inplace(Matrix& grad, const Matrix& pre) {
    auto g = grad.flat();
    auto p = pre.flat();
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(p[i] > 0.0)) g[i] = 0.0;
}

Matrix column_sums(const Matrix& m) {
    Matrix s(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) s(0, j) += r[j];
    }
    return s;
}

void uniform_fill(Matrix& w, double limit, std::mt19937_64& rng) {
    // Built from raw 53-bit draws so the stream is identical across standard libraries.
    for (auto& v : w.flat()) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = (2.0 * u - 1.0) * limit;
    }
}

void he_uniform(Matrix& w, std::size_t fan_in, std::mt19937_64& rng) {
    uniform_fill(w, std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1))), rng);
}

std::vector<Matrix> zeros_like(const ConstParamList& params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto* p : params) out.emplace_back(p->rows(), p->cols());
    return out;
}

}  // namespace pairvoice::nn
