#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ffdasm::nn {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Tanh = 2 };

struct Layer {
    Eigen::MatrixXd w;  // out x in
    Eigen::VectorXd b;
    Activation act = Activation::Identity;
};

/// Dense feedforward network. Batches are column-major: one sample per column.
/// Parameters are held on the float32 grid (storage precision of the
/// checkpoint container); arithmetic runs in double.
class DenseNet {
public:
    DenseNet() = default;
    // widths = {in, h1, ..., out}
    DenseNet(const std::vector<int>& widths, Activation hidden, Activation output);

    int input_width() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().w.cols()); }
    int output_width() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().w.rows()); }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<int> widths() const;

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;

    struct Cache {
        std::vector<Eigen::MatrixXd> post;  // post-activation per layer
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache& cache) const;

    struct Gradients {
        std::vector<Eigen::MatrixXd> dw;
        std::vector<Eigen::VectorXd> db;
    };
    Gradients zero_gradients() const;

    // Accumulates parameter gradients into `grads`, returns d(loss)/d(input).
    Eigen::MatrixXd backward(const Eigen::MatrixXd& input, const Cache& cache,
                             const Eigen::MatrixXd& upstream, Gradients& grads) const;

    // Snap every parameter to its nearest float32 value.
    void round_to_storage();

private:
    std::vector<Layer> layers_;
};

/// Fills every weight matrix with an orthonormal frame (singular values 1),
/// zeroes the biases. Deterministic under seed.
void orthogonal_init(DenseNet& net, std::uint64_t seed);

/// target <- rate * target + (1 - rate) * online. rate close to 1 tracks slowly.
void polyak_update(DenseNet& target, const DenseNet& online, double rate);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    AdamState() = default;
    AdamState(const DenseNet& net, const AdamConfig& cfg);
    // One bias-corrected Adam step. Throws std::invalid_argument on NaN gradients.
    void step(DenseNet& net, const DenseNet::Gradients& grads);
    std::int64_t step_count() const { return t_; }

private:
    AdamConfig cfg_;
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
    std::int64_t t_ = 0;
};

}  // namespace ffdasm::nn
