#include "ffdasm/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ffdasm/checkpoint.hpp"

namespace ffdasm {

namespace {

Eigen::MatrixXd orthogonal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::Index n = std::max(rows, cols), m = std::min(rows, cols);
    Eigen::MatrixXd a(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = gauss(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
    Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < m; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return (rows >= cols) ? q : Eigen::MatrixXd(q.transpose());
}

Eigen::Matrix3d gram_schmidt_rotation(const Eigen::Matrix<double, 6, 1>& v) {
    const Eigen::Vector3d a = v.head<3>();
    const Eigen::Vector3d w = v.tail<3>();
    const double na = std::max(a.norm(), 1e-12);
    const Eigen::Vector3d r1 = a / na;
    const Eigen::Vector3d u2 = w - r1.dot(w) * r1;
    const double nu = std::max(u2.norm(), 1e-12);
    const Eigen::Vector3d r2 = u2 / nu;
    const Eigen::Vector3d r3 = r1.cross(r2);
    Eigen::Matrix3d r;
    r.col(0) = r1;
    r.col(1) = r2;
    r.col(2) = r3;
    return r;
}

// d(loss)/dv for the orthonormalization, given d(loss)/dR.
Eigen::Matrix<double, 6, 1> gram_schmidt_backward(const Eigen::Matrix<double, 6, 1>& v,
                                                  const Eigen::Matrix3d& g) {
    const Eigen::Vector3d a = v.head<3>();
    const Eigen::Vector3d w = v.tail<3>();
    const double na = std::max(a.norm(), 1e-12);
    const Eigen::Vector3d r1 = a / na;
    const Eigen::Vector3d u2 = w - r1.dot(w) * r1;
    const double nu = std::max(u2.norm(), 1e-12);
    const Eigen::Vector3d r2 = u2 / nu;

    Eigen::Vector3d g1 = g.col(0);
    Eigen::Vector3d g2 = g.col(1);
    const Eigen::Vector3d g3 = g.col(2);
    g1 += r2.cross(g3);   // r3 = r1 x r2
    g2 += g3.cross(r1);

    const Eigen::Vector3d gu2 = (g2 - r2 * r2.dot(g2)) / nu;
    const Eigen::Vector3d gw = gu2 - r1 * r1.dot(gu2);
    g1 += -(w * r1.dot(gu2) + r1.dot(w) * gu2);
    const Eigen::Vector3d ga = (g1 - r1 * r1.dot(g1)) / na;

    Eigen::Matrix<double, 6, 1> dv;
    dv << ga, gw;
    return dv;
}

Eigen::MatrixXd cloud_features(const PointCloud& c) {
    Eigen::MatrixXd f(6, c.size());
    f.topRows(3) = c.points;
    f.bottomRows(3) = c.normals;
    return f;
}

}  // namespace

struct PointNetEncoder::ForwardPass {
    Eigen::MatrixXd x0;                       // point-stage input
    std::vector<Eigen::MatrixXd> inputs;      // input to each BN layer
    std::vector<Eigen::MatrixXd> zc;          // centered pre-normalization
    std::vector<Eigen::MatrixXd> zhat;        // normalized
    std::vector<Eigen::MatrixXd> act;         // layer output
    std::vector<Eigen::VectorXd> mu, var;     // batch statistics
    Eigen::MatrixXd pooled;                   // feat x 2P
    Eigen::MatrixXi argmax;                   // source column per pooled entry
    Eigen::MatrixXd pair_feat;                // 2*feat x P
    Eigen::MatrixXd head_out;                 // 6 x P
    std::vector<Eigen::Matrix3d> rotations;
    int pairs = 0, points = 0;
};

PointNetEncoder::PointNetEncoder(EncoderConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    if (cfg_.point_widths.size() != 3)
        throw std::invalid_argument("encoder uses exactly three shared point layers");
    std::mt19937_64 rng(seed);
    auto make_layer = [&](int in, int out, bool relu) {
        BnDense l;
        l.w = orthogonal_matrix(out, in, rng);
        l.b = Eigen::VectorXd::Zero(out);
        l.gamma = Eigen::VectorXd::Ones(out);
        l.beta = Eigen::VectorXd::Zero(out);
        l.run_mean = Eigen::VectorXd::Zero(out);
        l.run_var = Eigen::VectorXd::Ones(out);
        l.relu = relu;
        return l;
    };
    int in = 6;
    for (int wdt : cfg_.point_widths) {
        layers_.push_back(make_layer(in, wdt, true));
        in = wdt;
    }
    n_point_layers_ = static_cast<int>(layers_.size());
    layers_.push_back(make_layer(2 * in, cfg_.latent_width, true));   // P_c
    layers_.push_back(make_layer(cfg_.latent_width, cfg_.head_hidden, true));
    out_w_ = orthogonal_matrix(6, cfg_.head_hidden, rng);
    out_b_ = Eigen::VectorXd::Zero(6);

    adam_.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        adam_[i].mw = Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols());
        adam_[i].vw = adam_[i].mw;
        adam_[i].mb = Eigen::VectorXd::Zero(l.b.size());
        adam_[i].vb = adam_[i].mb;
        adam_[i].mg = Eigen::VectorXd::Zero(l.gamma.size());
        adam_[i].vg = adam_[i].mg;
        adam_[i].mbeta = Eigen::VectorXd::Zero(l.beta.size());
        adam_[i].vbeta = adam_[i].mbeta;
    }
    out_mw_ = Eigen::MatrixXd::Zero(6, cfg_.head_hidden);
    out_vw_ = out_mw_;
    out_mb_ = Eigen::VectorXd::Zero(6);
    out_vb_ = out_mb_;
}

void PointNetEncoder::forward(const PairBatch& batch, bool training, ForwardPass& fp) const {
    const int pairs = batch.size();
    if (pairs == 0) throw std::invalid_argument("empty batch");
    const int n = batch.a.front().size();
    fp.pairs = pairs;
    fp.points = n;

    fp.x0.resize(6, 2 * pairs * n);
    for (int p = 0; p < pairs; ++p) {
        if (batch.a[static_cast<std::size_t>(p)].size() != n ||
            batch.b[static_cast<std::size_t>(p)].size() != n)
            throw std::invalid_argument("pair batch clouds must share a point count");
        fp.x0.middleCols(2 * p * n, n) = cloud_features(batch.a[static_cast<std::size_t>(p)]);
        fp.x0.middleCols((2 * p + 1) * n, n) = cloud_features(batch.b[static_cast<std::size_t>(p)]);
    }

    const std::size_t n_layers = layers_.size();
    fp.inputs.assign(n_layers, {});
    fp.zc.assign(n_layers, {});
    fp.zhat.assign(n_layers, {});
    fp.act.assign(n_layers, {});
    fp.mu.assign(n_layers, {});
    fp.var.assign(n_layers, {});

    auto run_layer = [&](std::size_t li, const Eigen::MatrixXd& x) {
        const BnDense& l = layers_[li];
        fp.inputs[li] = x;
        Eigen::MatrixXd z = (l.w * x).colwise() + l.b;
        Eigen::VectorXd mean, variance;
        if (training) {
            mean = z.rowwise().mean();
            Eigen::MatrixXd c = z.colwise() - mean;
            variance = c.array().square().rowwise().mean();
            fp.zc[li] = std::move(c);
        } else {
            mean = l.run_mean;
            variance = l.run_var;
            fp.zc[li] = z.colwise() - mean;
        }
        fp.mu[li] = mean;
        fp.var[li] = variance;
        const Eigen::ArrayXd inv_std = (variance.array() + cfg_.bn_eps).rsqrt();
        Eigen::MatrixXd zhat = (fp.zc[li].array().colwise() * inv_std).matrix();
        Eigen::MatrixXd y =
            ((zhat.array().colwise() * l.gamma.array()).colwise() + l.beta.array()).matrix();
        if (l.relu) y = y.cwiseMax(0.0);
        fp.zhat[li] = std::move(zhat);
        fp.act[li] = std::move(y);
        return fp.act[li];
    };

    Eigen::MatrixXd x = fp.x0;
    for (int li = 0; li < n_point_layers_; ++li) x = run_layer(static_cast<std::size_t>(li), x);

    const int feat = static_cast<int>(x.rows());
    fp.pooled.resize(feat, 2 * pairs);
    fp.argmax.resize(feat, 2 * pairs);
    for (int s = 0; s < 2 * pairs; ++s) {
        for (int f = 0; f < feat; ++f) {
            int best = 0;
            double best_v = x(f, s * n);
            for (int k = 1; k < n; ++k) {
                const double v = x(f, s * n + k);
                if (v > best_v) {
                    best_v = v;
                    best = k;
                }
            }
            fp.pooled(f, s) = best_v;
            fp.argmax(f, s) = s * n + best;
        }
    }

    fp.pair_feat.resize(2 * feat, pairs);
    for (int p = 0; p < pairs; ++p)
        fp.pair_feat.col(p) << fp.pooled.col(2 * p), fp.pooled.col(2 * p + 1);

    Eigen::MatrixXd latent = run_layer(static_cast<std::size_t>(n_point_layers_), fp.pair_feat);
    Eigen::MatrixXd hidden = run_layer(static_cast<std::size_t>(n_point_layers_) + 1, latent);
    fp.head_out = (out_w_ * hidden).colwise() + out_b_;

    fp.rotations.resize(static_cast<std::size_t>(pairs));
    for (int p = 0; p < pairs; ++p)
        fp.rotations[static_cast<std::size_t>(p)] = gram_schmidt_rotation(fp.head_out.col(p));
}

double PointNetEncoder::backward(const PairBatch& batch, ForwardPass& fp,
                                 std::vector<BnDense>& layer_grads, Eigen::MatrixXd& out_w_grad,
                                 Eigen::VectorXd& out_b_grad) const {
    const int pairs = fp.pairs;
    double total = 0.0;
    Eigen::MatrixXd dv(6, pairs);
    for (int p = 0; p < pairs; ++p) {
        const Eigen::Matrix3d& rt = batch.truth[static_cast<std::size_t>(p)];
        const Eigen::Matrix3d& re = fp.rotations[static_cast<std::size_t>(p)];
        const Eigen::Matrix3d diff = rt - re;
        const double fro = diff.norm();
        const double u = std::clamp(fro / (2.0 * std::sqrt(2.0)), 0.0, 1.0 - 1e-7);
        total += 2.0 * std::asin(u);
        Eigen::Matrix3d dr = Eigen::Matrix3d::Zero();
        if (fro > 1e-12) {
            const double dl_du = 2.0 / std::sqrt(1.0 - u * u);
            dr = -(dl_du / (2.0 * std::sqrt(2.0))) * diff / fro / pairs;
        }
        dv.col(p) = gram_schmidt_backward(fp.head_out.col(p), dr);
    }
    const double loss = total / pairs;

    const std::size_t hid = static_cast<std::size_t>(n_point_layers_) + 1;
    out_w_grad = dv * fp.act[hid].transpose();
    out_b_grad = dv.rowwise().sum();
    Eigen::MatrixXd dx = out_w_.transpose() * dv;

    auto layer_backward = [&](std::size_t li, Eigen::MatrixXd d_out) {
        const BnDense& l = layers_[li];
        if (l.relu)
            d_out = d_out.cwiseProduct((fp.act[li].array() > 0.0).cast<double>().matrix());
        layer_grads[li].gamma = (d_out.cwiseProduct(fp.zhat[li])).rowwise().sum();
        layer_grads[li].beta = d_out.rowwise().sum();
        Eigen::MatrixXd dzhat = (d_out.array().colwise() * l.gamma.array()).matrix();
        const double m = static_cast<double>(d_out.cols());
        const Eigen::ArrayXd inv_std = (fp.var[li].array() + cfg_.bn_eps).rsqrt();
        const Eigen::ArrayXd dvar =
            (dzhat.cwiseProduct(fp.zc[li])).rowwise().sum().array() * (-0.5) * inv_std.cube();
        const Eigen::ArrayXd dmu =
            -(dzhat.rowwise().sum().array() * inv_std) +
            dvar * (-2.0 / m) * fp.zc[li].rowwise().sum().array();
        Eigen::MatrixXd dz =
            (dzhat.array().colwise() * inv_std).matrix() +
            (fp.zc[li].array().colwise() * (dvar * (2.0 / m))).matrix();
        dz = (dz.array().colwise() + dmu / m).matrix();
        layer_grads[li].w = dz * fp.inputs[li].transpose();
        layer_grads[li].b = dz.rowwise().sum();
        return Eigen::MatrixXd(l.w.transpose() * dz);
    };

    dx = layer_backward(hid, std::move(dx));
    dx = layer_backward(static_cast<std::size_t>(n_point_layers_), std::move(dx));

    // split pair features and un-pool
    const int feat = static_cast<int>(fp.pooled.rows());
    Eigen::MatrixXd d_pool(feat, 2 * pairs);
    for (int p = 0; p < pairs; ++p) {
        d_pool.col(2 * p) = dx.col(p).head(feat);
        d_pool.col(2 * p + 1) = dx.col(p).tail(feat);
    }
    Eigen::MatrixXd d_points =
        Eigen::MatrixXd::Zero(feat, fp.act[static_cast<std::size_t>(n_point_layers_ - 1)].cols());
    for (int s = 0; s < 2 * pairs; ++s)
        for (int f = 0; f < feat; ++f) d_points(f, fp.argmax(f, s)) += d_pool(f, s);

    Eigen::MatrixXd d = std::move(d_points);
    for (int li = n_point_layers_ - 1; li >= 0; --li)
        d = layer_backward(static_cast<std::size_t>(li), std::move(d));
    return loss;
}

double PointNetEncoder::train_batch(const PairBatch& batch, double lr) {
    ForwardPass fp;
    forward(batch, /*training=*/true, fp);
    std::vector<BnDense> grads(layers_.size());
    Eigen::MatrixXd gow;
    Eigen::VectorXd gob;
    const double loss = backward(batch, fp, grads, gow, gob);
    if (!std::isfinite(loss)) throw std::runtime_error("encoder loss diverged (NaN)");

    ++adam_t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
    auto adam_mat = [&](Eigen::MatrixXd& p, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                        const Eigen::MatrixXd& g) {
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g.cwiseProduct(g);
        p -= (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + eps)).matrix();
    };
    auto adam_vec = [&](Eigen::VectorXd& p, Eigen::VectorXd& m, Eigen::VectorXd& v,
                        const Eigen::VectorXd& g) {
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g.cwiseProduct(g);
        p -= (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + eps)).matrix();
    };
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        adam_mat(layers_[i].w, adam_[i].mw, adam_[i].vw, grads[i].w);
        adam_vec(layers_[i].b, adam_[i].mb, adam_[i].vb, grads[i].b);
        adam_vec(layers_[i].gamma, adam_[i].mg, adam_[i].vg, grads[i].gamma);
        adam_vec(layers_[i].beta, adam_[i].mbeta, adam_[i].vbeta, grads[i].beta);
    }
    adam_mat(out_w_, out_mw_, out_vw_, gow);
    adam_vec(out_b_, out_mb_, out_vb_, gob);

    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto& l = layers_[i];
        l.run_mean = cfg_.bn_momentum * l.run_mean + (1 - cfg_.bn_momentum) * fp.mu[i];
        l.run_var = cfg_.bn_momentum * l.run_var + (1 - cfg_.bn_momentum) * fp.var[i];
    }
    return loss;
}

double PointNetEncoder::eval_mean_loss(const PairBatch& batch) const {
    ForwardPass fp;
    forward(batch, /*training=*/false, fp);
    double total = 0.0;
    for (int p = 0; p < batch.size(); ++p)
        total += geodesic_loss(batch.truth[static_cast<std::size_t>(p)],
                               fp.rotations[static_cast<std::size_t>(p)]);
    return total / batch.size();
}

PointNetEncoder::Estimate PointNetEncoder::estimate(const PointCloud& cloud_a,
                                                    const PointCloud& cloud_b) const {
    PairBatch single;
    single.a.push_back(cloud_a);
    single.b.push_back(cloud_b);
    single.truth.push_back(Eigen::Matrix3d::Identity());
    ForwardPass fp;
    forward(single, /*training=*/false, fp);
    Estimate est;
    est.rotation = project_to_rotation(fp.rotations.front());
    est.latent = fp.act[static_cast<std::size_t>(n_point_layers_)].col(0);
    return est;
}

double PointNetEncoder::loss_only(const PairBatch& batch) const {
    ForwardPass fp;
    forward(batch, /*training=*/true, fp);
    double total = 0.0;
    for (int p = 0; p < batch.size(); ++p) {
        const Eigen::Matrix3d diff =
            batch.truth[static_cast<std::size_t>(p)] - fp.rotations[static_cast<std::size_t>(p)];
        const double u = std::clamp(diff.norm() / (2.0 * std::sqrt(2.0)), 0.0, 1.0 - 1e-7);
        total += 2.0 * std::asin(u);
    }
    return total / batch.size();
}

Eigen::VectorXd PointNetEncoder::loss_gradient(const PairBatch& batch) {
    ForwardPass fp;
    forward(batch, /*training=*/true, fp);
    std::vector<BnDense> grads(layers_.size());
    Eigen::MatrixXd gow;
    Eigen::VectorXd gob;
    backward(batch, fp, grads, gow, gob);
    std::vector<double> flat;
    auto push_mat = [&](const Eigen::MatrixXd& m) {
        flat.insert(flat.end(), m.data(), m.data() + m.size());
    };
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        push_mat(grads[i].w);
        push_mat(grads[i].b);
        push_mat(grads[i].gamma);
        push_mat(grads[i].beta);
    }
    push_mat(gow);
    push_mat(gob);
    return Eigen::Map<Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

Eigen::VectorXd PointNetEncoder::flatten_parameters() const {
    std::vector<double> flat;
    auto push_mat = [&](const Eigen::MatrixXd& m) {
        flat.insert(flat.end(), m.data(), m.data() + m.size());
    };
    for (const auto& l : layers_) {
        push_mat(l.w);
        push_mat(l.b);
        push_mat(l.gamma);
        push_mat(l.beta);
    }
    push_mat(out_w_);
    push_mat(out_b_);
    return Eigen::Map<Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void PointNetEncoder::set_parameters(const Eigen::VectorXd& flat) {
    Eigen::Index pos = 0;
    auto take = [&](Eigen::MatrixXd& m) {
        std::copy(flat.data() + pos, flat.data() + pos + m.size(), m.data());
        pos += m.size();
    };
    auto take_vec = [&](Eigen::VectorXd& v) {
        std::copy(flat.data() + pos, flat.data() + pos + v.size(), v.data());
        pos += v.size();
    };
    for (auto& l : layers_) {
        take(l.w);
        take_vec(l.b);
        take_vec(l.gamma);
        take_vec(l.beta);
    }
    take(out_w_);
    take_vec(out_b_);
    if (pos != flat.size()) throw std::invalid_argument("parameter vector length mismatch");
}

void PointNetEncoder::save(const std::string& path) const {
    nn::Checkpoint ckpt;
    Eigen::MatrixXd arch(1, 5);
    arch << cfg_.point_widths[0], cfg_.point_widths[1], cfg_.point_widths[2], cfg_.latent_width,
        cfg_.head_hidden;
    ckpt.add("encoder/arch", arch);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string p = "encoder/l" + std::to_string(i);
        ckpt.add(p + "/w", layers_[i].w);
        ckpt.add(p + "/b", layers_[i].b);
        ckpt.add(p + "/gamma", layers_[i].gamma);
        ckpt.add(p + "/beta", layers_[i].beta);
        ckpt.add(p + "/run_mean", layers_[i].run_mean);
        ckpt.add(p + "/run_var", layers_[i].run_var);
    }
    ckpt.add("encoder/out_w", out_w_);
    ckpt.add("encoder/out_b", out_b_);
    ckpt.save(path);
}

PointNetEncoder PointNetEncoder::load(const std::string& path) {
    const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
    const Eigen::MatrixXd arch = ckpt.tensor_d("encoder/arch");
    EncoderConfig cfg;
    cfg.point_widths = {static_cast<int>(arch(0, 0)), static_cast<int>(arch(0, 1)),
                        static_cast<int>(arch(0, 2))};
    cfg.latent_width = static_cast<int>(arch(0, 3));
    cfg.head_hidden = static_cast<int>(arch(0, 4));
    PointNetEncoder enc(cfg, 0);
    for (std::size_t i = 0; i < enc.layers_.size(); ++i) {
        const std::string p = "encoder/l" + std::to_string(i);
        enc.layers_[i].w = ckpt.tensor_d(p + "/w");
        enc.layers_[i].b = ckpt.tensor_d(p + "/b").col(0);
        enc.layers_[i].gamma = ckpt.tensor_d(p + "/gamma").col(0);
        enc.layers_[i].beta = ckpt.tensor_d(p + "/beta").col(0);
        enc.layers_[i].run_mean = ckpt.tensor_d(p + "/run_mean").col(0);
        enc.layers_[i].run_var = ckpt.tensor_d(p + "/run_var").col(0);
    }
    enc.out_w_ = ckpt.tensor_d("encoder/out_w");
    enc.out_b_ = ckpt.tensor_d("encoder/out_b").col(0);
    return enc;
}

PointNetEncoder::PairBatch make_pair_dataset(const EncoderTrainConfig& cfg, int count,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    PointNetEncoder::PairBatch batch;
    batch.a.reserve(static_cast<std::size_t>(count));
    batch.b.reserve(static_cast<std::size_t>(count));
    batch.truth.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const PointCloud cloud =
            sample_surface(cfg.shape, cfg.points, cfg.noise_sigma, rng());
        auto [a, b, r] = make_rotation_pair(cloud, rng, cfg.noise_sigma, cfg.max_angle);
        batch.a.push_back(std::move(a));
        batch.b.push_back(std::move(b));
        batch.truth.push_back(r);
    }
    return batch;
}

EncoderTrainResult train_encoder(PointNetEncoder& encoder, const EncoderTrainConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    const PointNetEncoder::PairBatch train =
        make_pair_dataset(cfg, cfg.train_pairs, rng());
    const PointNetEncoder::PairBatch holdout =
        make_pair_dataset(cfg, cfg.holdout_pairs, rng());

    std::vector<int> order(static_cast<std::size_t>(cfg.train_pairs));
    for (int i = 0; i < cfg.train_pairs; ++i) order[static_cast<std::size_t>(i)] = i;

    EncoderTrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start + cfg.batch <= cfg.train_pairs; start += cfg.batch) {
            PointNetEncoder::PairBatch mb;
            for (int k = 0; k < cfg.batch; ++k) {
                const int idx = order[static_cast<std::size_t>(start + k)];
                mb.a.push_back(train.a[static_cast<std::size_t>(idx)]);
                mb.b.push_back(train.b[static_cast<std::size_t>(idx)]);
                mb.truth.push_back(train.truth[static_cast<std::size_t>(idx)]);
            }
            epoch_loss += encoder.train_batch(mb, cfg.lr);
            ++batches;
        }
        result.loss_curve.push_back(epoch_loss / std::max(1, batches));
    }
    result.holdout_mean_geodesic = encoder.eval_mean_loss(holdout);
    return result;
}

}  // namespace ffdasm
