#include "pairvoice/nn/aff_model.hpp"

#include <algorithm>
#include <cmath>

namespace pairvoice::nn {

double signed_log1p(double v) { return v >= 0.0 ? std::log1p(v) : -std::log1p(-v); }

AffModel::AffModel(AffMatrix aff, SeqEncoder encoder, std::uint64_t head_seed)
    : aff_(std::move(aff)), encoder_(std::move(encoder)), head_seed_(head_seed) {
    if (encoder_.model_dim() != aff_.d_new())
        throw ShapeError("AffModel: encoder width differs from AFF output width");
    head_w_ = Matrix(aff_.d_new(), 2);
    head_b_ = Matrix(1, 2);
    std::mt19937_64 rng(head_seed);
    uniform_fill(head_w_, std::sqrt(3.0 / static_cast<double>(aff_.d_new())), rng);
    reset_window();
}

AffModel AffModel::from_parts(AffMatrix aff, SeqEncoder encoder, Matrix head_w, Matrix head_b,
                              std::uint64_t head_seed) {
    if (head_w.rows() != aff.d_new() || head_w.cols() != 2 || head_b.rows() != 1 || head_b.cols() != 2)
        throw ShapeError("AffModel: head shape mismatch");
    AffModel m;
    m.aff_ = std::move(aff);
    m.encoder_ = std::move(encoder);
    m.head_w_ = std::move(head_w);
    m.head_b_ = std::move(head_b);
    m.head_seed_ = head_seed;
    m.reset_window();
    return m;
}

void AffModel::run(const Matrix& power, Pass& pass) const {
    pass.f = aff_apply(power, aff_);
    pass.g = pass.f;
    for (auto& v : pass.g.flat()) v = signed_log1p(v);
    pass.pooled = encoder_.forward(pass.g, &pass.enc);
    for (std::size_t c = 0; c < 2; ++c) {
        double z = head_b_(0, c);
        for (std::size_t j = 0; j < pass.pooled.size(); ++j) z += pass.pooled[j] * head_w_(j, c);
        pass.logits[c] = z;
    }
}

namespace {

double positive_probability(const double logits[2]) { return 1.0 / (1.0 + std::exp(logits[0] - logits[1])); }

// -log softmax(logits)[label]
double nll(const double logits[2], int label) {
    const double mx = std::max(logits[0], logits[1]);
    const double lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
    return lse - logits[label];
}

}  // namespace

double AffModel::predict_positive(const Matrix& power) const {
    Pass pass;
    run(power, pass);
    return positive_probability(pass.logits);
}

std::vector<double> AffModel::predict_positive(std::span<const LabeledSpectrogram> samples) const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(predict_positive(s.power));
    return out;
}

double AffModel::loss(std::span<const LabeledSpectrogram* const> batch) const {
    double total = 0.0;
    for (const auto* s : batch) {
        Pass pass;
        run(s->power, pass);
        total += nll(pass.logits, s->label);
    }
    return total / static_cast<double>(batch.size());
}

double AffModel::loss_and_gradient(std::span<const LabeledSpectrogram* const> batch, std::vector<Matrix>& grads) const {
    if (batch.empty()) throw InsufficientDataError("AffModel: empty batch");
    grads = zeros_like(parameters());
    const std::size_t n_enc = encoder_.parameters().size();
    std::vector<Matrix> enc_grads;
    for (std::size_t i = 0; i < n_enc; ++i) enc_grads.push_back(std::move(grads[1 + i]));

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    Pass pass;
    for (const auto* s : batch) {
        run(s->power, pass);
        total += nll(pass.logits, s->label);
        const double p1 = positive_probability(pass.logits);
        const double d_logit[2] = {((1.0 - p1) - (s->label == 0 ? 1.0 : 0.0)) * inv_b,
                                   (p1 - (s->label == 1 ? 1.0 : 0.0)) * inv_b};

        Matrix& gw = grads[1 + n_enc];
        Matrix& gb = grads[2 + n_enc];
        std::vector<double> d_pooled(pass.pooled.size(), 0.0);
        for (std::size_t c = 0; c < 2; ++c) {
            gb(0, c) += d_logit[c];
            for (std::size_t j = 0; j < pass.pooled.size(); ++j) {
                gw(j, c) += pass.pooled[j] * d_logit[c];
                d_pooled[j] += head_w_(j, c) * d_logit[c];
            }
        }
        Matrix d_g = encoder_.backward(pass.enc, d_pooled, enc_grads);
        auto dg = d_g.flat();
        auto f = pass.f.flat();
        for (std::size_t i = 0; i < dg.size(); ++i) dg[i] /= 1.0 + std::abs(f[i]);
        add_inplace(grads[0], aff_weight_gradient(s->power, d_g));
    }
    for (std::size_t i = 0; i < n_enc; ++i) grads[1 + i] = std::move(enc_grads[i]);
    return total * inv_b;
}

void AffModel::reset_window() {
    const Matrix& w = aff_.weights;
    window_ = Matrix(w.rows(), w.cols());
    const auto half = static_cast<std::ptrdiff_t>(std::max(aff_.trim_halfwidth_bins, 0));
    const auto rows = static_cast<std::ptrdiff_t>(w.rows());
    for (std::size_t c = 0; c < w.cols(); ++c) {
        std::size_t peak = 0;
        for (std::size_t r = 1; r < w.rows(); ++r)
            if (w(r, c) > w(peak, c)) peak = r;
        const auto m = static_cast<std::ptrdiff_t>(peak);
        for (auto r = std::max<std::ptrdiff_t>(0, m - half); r <= std::min(rows - 1, m + half); ++r)
            window_(static_cast<std::size_t>(r), c) = 1.0;
    }
}

void AffModel::on_step_end() {
    auto w = aff_.weights.flat();
    const auto mask = window_.flat();
    const double keep = 1.0 - aff_decay;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] *= keep;
        if (nonnegative_aff && w[i] < 0.0) w[i] = 0.0;
        if (confine_to_window && mask.size() == w.size() && mask[i] == 0.0) w[i] = 0.0;
    }
}

void AffModel::on_epoch_end(int epoch) {
    if (aff_.trim_period_epochs > 0 && (epoch + 1) % aff_.trim_period_epochs == 0) {
        aff_trim_inplace(aff_);
        reset_window();
    }
}

void AffModel::on_train_end() {
    aff_trim_inplace(aff_);
    reset_window();
}

ParamList AffModel::parameters() {
    ParamList out{&aff_.weights};
    for (auto* p : encoder_.parameters()) out.push_back(p);
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
}

ConstParamList AffModel::parameters() const {
    ConstParamList out{&aff_.weights};
    for (const auto* p : encoder_.parameters()) out.push_back(p);
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
}

}  // namespace pairvoice::nn
