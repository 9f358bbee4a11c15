#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffdasm/nn.hpp"

namespace ffdasm::nn {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Versioned container of named tensors: magic bytes, version, manifest of
/// names/shapes, then little-endian IEEE-754 float32 payloads.
class Checkpoint {
public:
    void add(const std::string& name, const Eigen::MatrixXd& m);
    void add_scalar(const std::string& name, double v);

    bool has(const std::string& name) const { return tensors_.count(name) > 0; }
    std::vector<std::string> names() const;
    const Eigen::MatrixXf& tensor(const std::string& name) const;
    Eigen::MatrixXd tensor_d(const std::string& name) const;
    double scalar(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // DenseNet (de)serialization under a name prefix; the "<prefix>/arch"
    // tensor makes the container self-describing.
    void add_net(const std::string& prefix, const DenseNet& net);
    DenseNet read_net(const std::string& prefix) const;

private:
    std::map<std::string, Eigen::MatrixXf> tensors_;
};

}  // namespace ffdasm::nn
