#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ffdasm/pointcloud.hpp"
#include "ffdasm/rotation.hpp"

namespace ffdasm {

struct EncoderConfig {
    std::vector<int> point_widths = {64, 64, 128};  // shared per-point layers
    int latent_width = 128;                         // P_c
    int head_hidden = 64;
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;
};

/// Shared per-point MLP -> max-pool per cloud -> latent layer over the
/// concatenated pair features -> head emitting a 6-vector, orthonormalized
/// into a rotation. Batch normalization behind every fully connected layer;
/// running statistics are frozen at evaluation.
class PointNetEncoder {
public:
    PointNetEncoder() = default;
    PointNetEncoder(EncoderConfig cfg, std::uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }
    int latent_width() const { return cfg_.latent_width; }

    struct Estimate {
        Eigen::Matrix3d rotation;
        Eigen::VectorXd latent;  // P_c
    };
    /// Evaluation-mode estimate (permutation-invariant in both clouds).
    Estimate estimate(const PointCloud& cloud_a, const PointCloud& cloud_b) const;

    struct PairBatch {
        std::vector<PointCloud> a, b;
        std::vector<Eigen::Matrix3d> truth;
        int size() const { return static_cast<int>(truth.size()); }
    };

    /// One Adam step on the mean geodesic loss; returns the pre-step loss.
    double train_batch(const PairBatch& batch, double lr);
    double eval_mean_loss(const PairBatch& batch) const;

    void save(const std::string& path) const;
    static PointNetEncoder load(const std::string& path);

    // test hooks
    Eigen::VectorXd flatten_parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);
    double loss_only(const PairBatch& batch) const;       // batch-stat forward
    Eigen::VectorXd loss_gradient(const PairBatch& batch);  // matches loss_only

private:
    struct BnDense {
        Eigen::MatrixXd w;
        Eigen::VectorXd b, gamma, beta;
        Eigen::VectorXd run_mean, run_var;
        bool relu = true;
    };
    struct AdamSlot {
        Eigen::MatrixXd mw, vw;
        Eigen::VectorXd mb, vb, mg, vg, mbeta, vbeta;
    };

    struct ForwardPass;  // defined in the .cpp

    void forward(const PairBatch& batch, bool training, ForwardPass& fp) const;
    double backward(const PairBatch& batch, ForwardPass& fp,
                    std::vector<BnDense>& layer_grads, Eigen::MatrixXd& out_w_grad,
                    Eigen::VectorXd& out_b_grad) const;

    EncoderConfig cfg_;
    std::vector<BnDense> layers_;  // point layers, latent, head hidden
    int n_point_layers_ = 0;
    Eigen::MatrixXd out_w_;  // 6 x head_hidden
    Eigen::VectorXd out_b_;
    std::vector<AdamSlot> adam_;
    Eigen::MatrixXd out_mw_, out_vw_;
    Eigen::VectorXd out_mb_, out_vb_;
    std::int64_t adam_t_ = 0;
};

struct EncoderTrainConfig {
    ShapeSpec shape;
    int points = 128;
    double noise_sigma = 0.01;
    double max_angle = 1.3;  // operational relative-rotation range
    int train_pairs = 1500;
    int holdout_pairs = 200;
    int epochs = 25;
    int batch = 16;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

struct EncoderTrainResult {
    std::vector<double> loss_curve;     // per-epoch mean training loss
    double holdout_mean_geodesic = 0;   // eval-mode error on held-out pairs
};

/// Minimizes the mean geodesic loss over generated rotation pairs. Throws on
/// divergence (non-finite loss). Deterministic under cfg.seed.
EncoderTrainResult train_encoder(PointNetEncoder& encoder, const EncoderTrainConfig& cfg);

PointNetEncoder::PairBatch make_pair_dataset(const EncoderTrainConfig& cfg, int count,
                                             std::uint64_t seed);

}  // namespace ffdasm
