#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cstdio>
#include <random>

#include "ffdasm/checkpoint.hpp"
#include "ffdasm/nn.hpp"

using namespace ffdasm;
using nn::Activation;
using nn::DenseNet;

namespace {

// Independent oracle: central finite differences of a scalar loss.
double loss_of(const DenseNet& net, const Eigen::MatrixXd& input) {
    const Eigen::MatrixXd out = net.forward(input);
    return 0.5 * out.squaredNorm();
}

DenseNet small_net(std::uint64_t seed) {
    DenseNet net({4, 7, 5, 3}, Activation::Relu, Activation::Tanh);
    nn::orthogonal_init(net, seed);
    return net;
}

}  // namespace

TEST_CASE("forward: zero net maps to zero, identity layer passes through") {
    DenseNet zero({3, 3}, Activation::Identity, Activation::Identity);
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 0.5;
    CHECK(zero.forward(x).norm() == 0.0);

    DenseNet ident({3, 3}, Activation::Identity, Activation::Identity);
    ident.layers()[0].w = Eigen::Matrix3d::Identity();
    CHECK((ident.forward(x) - x).norm() == 0.0);
}

TEST_CASE("forward: bounded output and width checks") {
    DenseNet net = small_net(11);
    std::mt19937_64 rng(0);
    std::normal_distribution<double> gauss(0.0, 3.0);
    Eigen::MatrixXd batch(4, 32);
    for (int i = 0; i < batch.size(); ++i) batch.data()[i] = gauss(rng);
    const Eigen::MatrixXd out = net.forward(batch);
    CHECK(out.allFinite());
    CHECK(out.maxCoeff() < 1.0);
    CHECK(out.minCoeff() > -1.0);
    CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(5, 2)), std::invalid_argument);
}

TEST_CASE("backward: linear net gradient is the analytic outer product") {
    DenseNet net({3, 2}, Activation::Identity, Activation::Identity);
    net.layers()[0].w << 0.5, -1.0, 2.0, 0.25, 0.75, -0.5;
    Eigen::VectorXd x(3);
    x << 1.0, 2.0, -1.0;
    Eigen::VectorXd up(2);
    up << 0.3, -0.7;
    DenseNet::Cache cache;
    net.forward(x, cache);
    auto grads = net.zero_gradients();
    const Eigen::MatrixXd dx = net.backward(x, cache, up, grads);
    CHECK((grads.dw[0] - up * x.transpose()).norm() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK((grads.db[0] - up).norm() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK((dx - net.layers()[0].w.transpose() * up).norm() ==
          doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("backward: matches central finite differences") {
    DenseNet net = small_net(3);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd input(4, 5);
    for (int i = 0; i < input.size(); ++i) input.data()[i] = gauss(rng);

    DenseNet::Cache cache;
    const Eigen::MatrixXd out = net.forward(input, cache);
    auto grads = net.zero_gradients();
    net.backward(input, cache, out, grads);  // upstream = out, loss = 0.5 ||out||^2

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        Eigen::MatrixXd& w = net.layers()[li].w;
        for (int k = 0; k < w.size(); k += 3) {
            const double saved = w.data()[k];
            w.data()[k] = saved + h;
            const double up = loss_of(net, input);
            w.data()[k] = saved - h;
            const double dn = loss_of(net, input);
            w.data()[k] = saved;
            const double fd = (up - dn) / (2 * h);
            const double an = grads.dw[li].data()[k];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    DenseNet net = small_net(5);
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(4, 3);
    DenseNet::Cache cache;
    net.forward(input, cache);
    auto grads = net.zero_gradients();
    net.backward(input, cache, Eigen::MatrixXd::Zero(3, 3), grads);
    for (const auto& g : grads.dw) CHECK(g.norm() == 0.0);
}

TEST_CASE("orthogonal_init: singular values one, deterministic, zero biases") {
    for (const auto widths : {std::vector<int>{6, 6}, {4, 9}, {9, 4}}) {
        DenseNet net(widths, Activation::Relu, Activation::Identity);
        nn::orthogonal_init(net, 42);
        const Eigen::MatrixXd& w = net.layers()[0].w;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
        for (int i = 0; i < svd.singularValues().size(); ++i)
            CHECK(svd.singularValues()(i) == doctest::Approx(1.0).epsilon(1e-6));
        if (w.rows() >= w.cols()) {
            const Eigen::MatrixXd gram = w.transpose() * w;
            CHECK((gram - Eigen::MatrixXd::Identity(w.cols(), w.cols())).norm() < 1e-6);
        } else {
            const Eigen::MatrixXd gram = w * w.transpose();
            CHECK((gram - Eigen::MatrixXd::Identity(w.rows(), w.rows())).norm() < 1e-6);
        }
        CHECK(net.layers()[0].b.norm() == 0.0);

        DenseNet again(widths, Activation::Relu, Activation::Identity);
        nn::orthogonal_init(again, 42);
        CHECK((again.layers()[0].w - w).norm() == 0.0);
    }
}

TEST_CASE("polyak_update: boundary rates and geometric contraction") {
    DenseNet online = small_net(1);
    DenseNet target = small_net(2);

    DenseNet t1 = target;
    nn::polyak_update(t1, online, 1.0);
    CHECK((t1.layers()[0].w - target.layers()[0].w).norm() == 0.0);

    DenseNet t0 = target;
    nn::polyak_update(t0, online, 0.0);
    CHECK((t0.layers()[0].w - online.layers()[0].w).norm() == 0.0);

    const double rate = 0.995;
    DenseNet tk = target;
    const double gap0 = (tk.layers()[1].w - online.layers()[1].w).norm();
    const int k = 50;
    for (int i = 0; i < k; ++i) nn::polyak_update(tk, online, rate);
    const double gap = (tk.layers()[1].w - online.layers()[1].w).norm();
    CHECK(gap == doctest::Approx(gap0 * std::pow(rate, k)).epsilon(1e-6));
}

TEST_CASE("adam_step: zero gradient, first-step size, determinism, NaN rejection") {
    DenseNet net = small_net(9);
    nn::AdamState opt(net, {.lr = 1e-3});
    const Eigen::MatrixXd w0 = net.layers()[0].w;
    opt.step(net, net.zero_gradients());
    CHECK((net.layers()[0].w - w0).norm() == 0.0);

    // constant gradient: first bias-corrected step is -lr * sign(g)
    DenseNet net2({2, 2}, Activation::Identity, Activation::Identity);
    nn::AdamState opt2(net2, {.lr = 1e-3});
    auto grads = net2.zero_gradients();
    grads.dw[0] << 3.0, -0.2, 0.0007, -42.0;
    opt2.step(net2, grads);
    for (int i = 0; i < 4; ++i) {
        const double g = grads.dw[0].data()[i];
        const double expected = -1e-3 * g / (std::abs(g) + 1e-8);
        CHECK(net2.layers()[0].w.data()[i] ==
              doctest::Approx(expected).epsilon(1e-4));
    }

    DenseNet a = small_net(13), b = small_net(13);
    nn::AdamState oa(a, {}), ob(b, {});
    for (int it = 0; it < 5; ++it) {
        Eigen::MatrixXd input = Eigen::MatrixXd::Constant(4, 2, 0.3 * (it + 1));
        DenseNet::Cache ca, cb;
        const Eigen::MatrixXd oa_out = a.forward(input, ca);
        const Eigen::MatrixXd ob_out = b.forward(input, cb);
        auto ga = a.zero_gradients(), gb = b.zero_gradients();
        a.backward(input, ca, oa_out, ga);
        b.backward(input, cb, ob_out, gb);
        oa.step(a, ga);
        ob.step(b, gb);
    }
    for (std::size_t li = 0; li < a.layers().size(); ++li)
        CHECK((a.layers()[li].w - b.layers()[li].w).norm() == 0.0);

    auto bad = net.zero_gradients();
    bad.dw[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(opt.step(net, bad), std::invalid_argument);
}

TEST_CASE("checkpoint: bit-exact round trip, corruption and manifest") {
    DenseNet net = small_net(21);
    const std::string path = "test_ckpt.bin";
    nn::Checkpoint ckpt;
    ckpt.add_net("policy", net);
    ckpt.add_scalar("lambda_l", 0.375);
    ckpt.save(path);

    const nn::Checkpoint loaded = nn::Checkpoint::load(path);
    const DenseNet back = loaded.read_net("policy");
    Eigen::MatrixXd input = Eigen::MatrixXd::Random(4, 6);
    const Eigen::MatrixXd a = net.forward(input);
    const Eigen::MatrixXd b = back.forward(input);
    for (int i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);  // bit-for-bit
    CHECK(loaded.scalar("lambda_l") == doctest::Approx(0.375));

    // truncation -> explicit error
    {
        std::FILE* f = std::fopen(path.c_str(), "rb");
        std::fseek(f, 0, SEEK_END);
        const long size = std::ftell(f);
        std::fseek(f, 0, SEEK_SET);
        std::vector<char> bytes(static_cast<std::size_t>(size));
        REQUIRE(std::fread(bytes.data(), 1, bytes.size(), f) == bytes.size());
        std::fclose(f);
        std::FILE* g = std::fopen("test_ckpt_trunc.bin", "wb");
        std::fwrite(bytes.data(), 1, bytes.size() / 2, g);
        std::fclose(g);
    }
    CHECK_THROWS_AS(nn::Checkpoint::load("test_ckpt_trunc.bin"), nn::CheckpointError);
    CHECK_THROWS_AS(nn::Checkpoint::load("does_not_exist.bin"), nn::CheckpointError);
    std::remove(path.c_str());
    std::remove("test_ckpt_trunc.bin");
}
