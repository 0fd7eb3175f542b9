#include "pairvoice/nn/train.hpp"

namespace pairvoice::nn {

void Adam::step(const ParamList& params, const std::vector<Matrix>& grads) {
    if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
    if (m_.empty()) {
        for (const auto* p : params) {
            m_.emplace_back(p->rows(), p->cols());
            v_.emplace_back(p->rows(), p->cols());
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].same_shape(*params[i])) throw ShapeError("adam: gradient shape mismatch");
        auto p = params[i]->flat();
        auto g = grads[i].flat();
        auto m = m_[i].flat();
        auto v = v_[i].flat();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace pairvoice::nn
