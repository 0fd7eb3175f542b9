#include "pairvoice/nn/dense.hpp"

#include <string>

namespace pairvoice::nn {

DenseNet3::DenseNet3(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2, std::uint64_t seed)
    : DenseNet3(zeros(input_dim, hidden1, hidden2)) {
    seed_ = seed;
    std::mt19937_64 rng(seed);
    he_uniform(w1_, input_dim, rng);
    he_uniform(w2_, hidden1, rng);
    he_uniform(w3_, hidden2, rng);
}

DenseNet3 DenseNet3::zeros(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2, std::uint64_t seed) {
    if (input_dim == 0 || hidden1 == 0 || hidden2 == 0) throw ShapeError("DenseNet3: dimensions must be positive");
    DenseNet3 n;
    n.seed_ = seed;
    n.w1_ = Matrix(input_dim, hidden1);
    n.b1_ = Matrix(1, hidden1);
    n.w2_ = Matrix(hidden1, hidden2);
    n.b2_ = Matrix(1, hidden2);
    n.w3_ = Matrix(hidden2, 2);
    n.b3_ = Matrix(1, 2);
    return n;
}

void DenseNet3::check_input(const Matrix& x) const {
    if (x.cols() != input_dim())
        throw ShapeError("DenseNet3: input has " + std::to_string(x.cols()) + " features, net expects " +
                         std::to_string(input_dim()));
}

void DenseNet3::copy_row(const std::vector<double>& v, Matrix& x, std::size_t i) const {
    if (v.size() != input_dim())
        throw ShapeError("DenseNet3: sample has " + std::to_string(v.size()) + " features, net expects " +
                         std::to_string(input_dim()));
    auto r = x.row(i);
    for (std::size_t j = 0; j < v.size(); ++j) r[j] = v[j];
}

Matrix DenseNet3::forward(const Matrix& x) const {
    check_input(x);
    Matrix h1 = affine(x, w1_, b1_);
    relu_inplace(h1);
    Matrix h2 = affine(h1, w2_, b2_);
    relu_inplace(h2);
    return softmax_rows(affine(h2, w3_, b3_));
}

double DenseNet3::loss(const Matrix& x, std::span<const int> labels) const {
    check_input(x);
    Matrix h1 = affine(x, w1_, b1_);
    relu_inplace(h1);
    Matrix h2 = affine(h1, w2_, b2_);
    relu_inplace(h2);
    return softmax_cross_entropy(affine(h2, w3_, b3_), labels, nullptr);
}

double DenseNet3::loss_and_gradient(const Matrix& x, std::span<const int> labels, std::vector<Matrix>& grads) const {
    check_input(x);
    const Matrix z1 = affine(x, w1_, b1_);
    Matrix h1 = z1;
    relu_inplace(h1);
    const Matrix z2 = affine(h1, w2_, b2_);
    Matrix h2 = z2;
    relu_inplace(h2);
    const Matrix logits = affine(h2, w3_, b3_);

    Matrix d_logits;
    const double loss = softmax_cross_entropy(logits, labels, &d_logits);

    grads.resize(6);
    grads[4] = matmul_at_b(h2, d_logits);
    grads[5] = column_sums(d_logits);
    Matrix d_h2 = matmul_a_bt(d_logits, w3_);
    relu_backward_inplace(d_h2, z2);
    grads[2] = matmul_at_b(h1, d_h2);
    grads[3] = column_sums(d_h2);
    Matrix d_h1 = matmul_a_bt(d_h2, w2_);
    relu_backward_inplace(d_h1, z1);
    grads[0] = matmul_at_b(x, d_h1);
    grads[1] = column_sums(d_h1);
    return loss;
}

}  // namespace pairvoice::nn
