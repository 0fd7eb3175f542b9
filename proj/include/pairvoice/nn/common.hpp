#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "pairvoice/matrix.hpp"

namespace pairvoice::nn {

// Row-wise softmax, max-shifted.
Matrix softmax_rows(const Matrix& logits);

// Mean cross-entropy of softmax(logits) against integer labels. When `grad`
// is non-null it receives d loss / d logits.
double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad);

// out = x * w + b (b is 1 x cols)
Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b);
void relu_inplace(Matrix& m);
// grad *= (pre > 0)
void relu_backward_inplace(Matrix& grad, const Matrix& pre);
Matrix column_sums(const Matrix& m);

// He-uniform: U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)).
void he_uniform(Matrix& w, std::size_t fan_in, std::mt19937_64& rng);
void uniform_fill(Matrix& w, double limit, std::mt19937_64& rng);

// Parameters are exposed as matrices so optimizers and gradient checks can
// treat every model uniformly.
using ParamList = std::vector<Matrix*>;
using ConstParamList = std::vector<const Matrix*>;
std::vector<Matrix> zeros_like(const ConstParamList& params);

}  // namespace pairvoice::nn
