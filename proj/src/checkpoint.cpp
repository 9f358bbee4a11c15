#include "ffdasm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ffdasm::nn {

namespace {

constexpr char kMagic[4] = {'F', 'F', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw CheckpointError("checkpoint truncated");
    return v;
}

}  // namespace

void Checkpoint::add(const std::string& name, const Eigen::MatrixXd& m) {
    tensors_[name] = m.cast<float>();
}

void Checkpoint::add_scalar(const std::string& name, double v) {
    Eigen::MatrixXf t(1, 1);
    t(0, 0) = static_cast<float>(v);
    tensors_[name] = t;
}

std::vector<std::string> Checkpoint::names() const {
    std::vector<std::string> out;
    out.reserve(tensors_.size());
    for (const auto& [k, v] : tensors_) out.push_back(k);
    return out;
}

const Eigen::MatrixXf& Checkpoint::tensor(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw CheckpointError("missing tensor: " + name);
    return it->second;
}

Eigen::MatrixXd Checkpoint::tensor_d(const std::string& name) const {
    return tensor(name).cast<double>();
}

double Checkpoint::scalar(const std::string& name) const {
    const auto& t = tensor(name);
    if (t.size() != 1) throw CheckpointError("tensor is not a scalar: " + name);
    return static_cast<double>(t(0, 0));
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open for write: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& [name, t] : tensors_) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.rows()));
        write_u32(os, static_cast<std::uint32_t>(t.cols()));
    }
    for (const auto& [name, t] : tensors_) {
        // column-major float32 payload
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(sizeof(float) * t.size()));
    }
    if (!os) throw CheckpointError("write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open: " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("bad magic bytes: " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = read_u32(is);
    std::vector<std::pair<std::string, std::pair<std::uint32_t, std::uint32_t>>> manifest;
    manifest.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = read_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw CheckpointError("checkpoint truncated");
        const std::uint32_t rows = read_u32(is);
        const std::uint32_t cols = read_u32(is);
        manifest.emplace_back(std::move(name), std::make_pair(rows, cols));
    }
    Checkpoint ckpt;
    for (const auto& [name, shape] : manifest) {
        Eigen::MatrixXf t(shape.first, shape.second);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(float) * t.size()));
        if (!is) throw CheckpointError("checkpoint truncated");
        ckpt.tensors_[name] = std::move(t);
    }
    char extra = 0;
    if (is.read(&extra, 1)) throw CheckpointError("trailing bytes in checkpoint");
    return ckpt;
}

void Checkpoint::add_net(const std::string& prefix, const DenseNet& net) {
    const auto widths = net.widths();
    Eigen::MatrixXd arch(1, widths.size() + 2);
    for (std::size_t i = 0; i < widths.size(); ++i) arch(0, static_cast<Eigen::Index>(i)) = widths[i];
    Activation hidden = net.layers().size() > 1 ? net.layers().front().act : Activation::Identity;
    Activation output = net.layers().back().act;
    arch(0, static_cast<Eigen::Index>(widths.size())) = static_cast<double>(hidden);
    arch(0, static_cast<Eigen::Index>(widths.size()) + 1) = static_cast<double>(output);
    add(prefix + "/arch", arch);
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        add(prefix + "/w" + std::to_string(i), net.layers()[i].w);
        add(prefix + "/b" + std::to_string(i), net.layers()[i].b);
    }
}

DenseNet Checkpoint::read_net(const std::string& prefix) const {
    const Eigen::MatrixXd arch = tensor_d(prefix + "/arch");
    if (arch.rows() != 1 || arch.cols() < 4)
        throw CheckpointError("malformed arch tensor: " + prefix);
    const Eigen::Index n_widths = arch.cols() - 2;
    std::vector<int> widths(static_cast<std::size_t>(n_widths));
    for (Eigen::Index i = 0; i < n_widths; ++i) widths[static_cast<std::size_t>(i)] = static_cast<int>(arch(0, i));
    const auto hidden = static_cast<Activation>(static_cast<int>(arch(0, n_widths)));
    const auto output = static_cast<Activation>(static_cast<int>(arch(0, n_widths + 1)));
    DenseNet net(widths, hidden, output);
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        Eigen::MatrixXd w = tensor_d(prefix + "/w" + std::to_string(i));
        Eigen::MatrixXd b = tensor_d(prefix + "/b" + std::to_string(i));
        if (w.rows() != net.layers()[i].w.rows() || w.cols() != net.layers()[i].w.cols() ||
            b.rows() != net.layers()[i].b.size() || b.cols() != 1)
            throw CheckpointError("tensor shape mismatch: " + prefix + "/w" + std::to_string(i));
        net.layers()[i].w = std::move(w);
        net.layers()[i].b = b.col(0);
    }
    return net;
}

}  // namespace ffdasm::nn
