#include "ffdasm/nn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ffdasm::nn {

namespace {

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation act) {
    switch (act) {
        case Activation::Identity: return z;
        case Activation::Relu: return z.cwiseMax(0.0);
        case Activation::Tanh: return z.array().tanh().matrix();
    }
    return z;
}

// Derivative expressed through the post-activation value.
Eigen::MatrixXd activation_grad_from_post(const Eigen::MatrixXd& post, Activation act) {
    switch (act) {
        case Activation::Identity: return Eigen::MatrixXd::Ones(post.rows(), post.cols());
        case Activation::Relu: return (post.array() > 0.0).cast<double>().matrix();
        case Activation::Tanh: return (1.0 - post.array().square()).matrix();
    }
    return Eigen::MatrixXd::Ones(post.rows(), post.cols());
}

void round_matrix(Eigen::MatrixXd& m) {
    m = m.cast<float>().cast<double>();
}
void round_vector(Eigen::VectorXd& v) {
    v = v.cast<float>().cast<double>();
}

}  // namespace

DenseNet::DenseNet(const std::vector<int>& widths, Activation hidden, Activation output) {
    if (widths.size() < 2) throw std::invalid_argument("DenseNet needs at least one layer");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        Layer l;
        l.w = Eigen::MatrixXd::Zero(widths[i + 1], widths[i]);
        l.b = Eigen::VectorXd::Zero(widths[i + 1]);
        l.act = (i + 2 == widths.size()) ? output : hidden;
        layers_.push_back(std::move(l));
    }
}

std::vector<int> DenseNet::widths() const {
    std::vector<int> w;
    if (layers_.empty()) return w;
    w.push_back(static_cast<int>(layers_.front().w.cols()));
    for (const auto& l : layers_) w.push_back(static_cast<int>(l.w.rows()));
    return w;
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& input) const {
    Cache cache;
    return forward(input, cache);
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& input, Cache& cache) const {
    if (input.rows() != input_width())
        throw std::invalid_argument("DenseNet::forward: input width mismatch");
    cache.post.clear();
    cache.post.reserve(layers_.size());
    Eigen::MatrixXd x = input;
    for (const auto& l : layers_) {
        Eigen::MatrixXd z = (l.w * x).colwise() + l.b;
        x = apply_activation(z, l.act);
        cache.post.push_back(x);
    }
    return x;
}

DenseNet::Gradients DenseNet::zero_gradients() const {
    Gradients g;
    for (const auto& l : layers_) {
        g.dw.emplace_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
        g.db.emplace_back(Eigen::VectorXd::Zero(l.b.size()));
    }
    return g;
}

Eigen::MatrixXd DenseNet::backward(const Eigen::MatrixXd& input, const Cache& cache,
                                   const Eigen::MatrixXd& upstream, Gradients& grads) const {
    if (cache.post.size() != layers_.size())
        throw std::invalid_argument("DenseNet::backward: stale cache");
    if (upstream.rows() != output_width() || upstream.cols() != input.cols())
        throw std::invalid_argument("DenseNet::backward: upstream shape mismatch");

    Eigen::MatrixXd delta = upstream;
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
        const Layer& l = layers_[i];
        delta = delta.cwiseProduct(activation_grad_from_post(cache.post[i], l.act));
        const Eigen::MatrixXd& below = (i == 0) ? input : cache.post[i - 1];
        grads.dw[i] += delta * below.transpose();
        grads.db[i] += delta.rowwise().sum();
        if (i > 0) delta = l.w.transpose() * delta;
    }
    return layers_.front().w.transpose() * delta;
}

void DenseNet::round_to_storage() {
    for (auto& l : layers_) {
        round_matrix(l.w);
        round_vector(l.b);
    }
}

void orthogonal_init(DenseNet& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& l : net.layers()) {
        const Eigen::Index rows = l.w.rows(), cols = l.w.cols();
        const Eigen::Index n = std::max(rows, cols), m = std::min(rows, cols);
        Eigen::MatrixXd a(n, m);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = 0; i < n; ++i) a(i, j) = gauss(rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
        Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
        for (Eigen::Index j = 0; j < m; ++j)
            if (r(j, j) < 0) q.col(j) *= -1.0;
        l.w = (rows >= cols) ? q : Eigen::MatrixXd(q.transpose());
        l.b.setZero();
    }
    net.round_to_storage();
}

void polyak_update(DenseNet& target, const DenseNet& online, double rate) {
    if (target.widths() != online.widths())
        throw std::invalid_argument("polyak_update: architecture mismatch");
    if (rate < 0.0 || rate > 1.0)
        throw std::invalid_argument("polyak_update: rate outside [0, 1]");
    for (std::size_t i = 0; i < target.layers().size(); ++i) {
        auto& t = target.layers()[i];
        const auto& o = online.layers()[i];
        t.w = rate * t.w + (1.0 - rate) * o.w;
        t.b = rate * t.b + (1.0 - rate) * o.b;
    }
    target.round_to_storage();
}

AdamState::AdamState(const DenseNet& net, const AdamConfig& cfg) : cfg_(cfg) {
    for (const auto& l : net.layers()) {
        mw_.emplace_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
        vw_.emplace_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
        mb_.emplace_back(Eigen::VectorXd::Zero(l.b.size()));
        vb_.emplace_back(Eigen::VectorXd::Zero(l.b.size()));
    }
}

void AdamState::step(DenseNet& net, const DenseNet::Gradients& grads) {
    if (grads.dw.size() != net.layers().size())
        throw std::invalid_argument("AdamState::step: gradient shape mismatch");
    for (std::size_t i = 0; i < grads.dw.size(); ++i) {
        if (!grads.dw[i].allFinite() || !grads.db[i].allFinite())
            throw std::invalid_argument("AdamState::step: non-finite gradient");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        auto& l = net.layers()[i];
        mw_[i] = cfg_.beta1 * mw_[i] + (1.0 - cfg_.beta1) * grads.dw[i];
        vw_[i] = cfg_.beta2 * vw_[i] + (1.0 - cfg_.beta2) * grads.dw[i].cwiseProduct(grads.dw[i]);
        mb_[i] = cfg_.beta1 * mb_[i] + (1.0 - cfg_.beta1) * grads.db[i];
        vb_[i] = cfg_.beta2 * vb_[i] + (1.0 - cfg_.beta2) * grads.db[i].cwiseProduct(grads.db[i]);
        l.w -= (cfg_.lr * (mw_[i] / bc1).array() / ((vw_[i] / bc2).array().sqrt() + cfg_.eps)).matrix();
        l.b -= (cfg_.lr * (mb_[i] / bc1).array() / ((vb_[i] / bc2).array().sqrt() + cfg_.eps)).matrix();
    }
    net.round_to_storage();
}

}  // namespace ffdasm::nn
