#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace ffdasm {

struct Transition {
    Eigen::VectorXd obs;
    Eigen::VectorXd action;   // normalized to [-1, 1]
    Eigen::VectorXd goals;    // 6
    double reward = -1.0;
    double cost = 0.0;
    Eigen::VectorXd next_obs;
    bool final_step = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
        items_.reserve(std::min<std::size_t>(capacity, 1 << 20));
    }

    void push(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return items_[i]; }

    std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const {
        if (items_.empty()) throw std::logic_error("sampling from an empty buffer");
        std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
        std::vector<std::size_t> idx(batch);
        for (auto& i : idx) i = pick(rng);
        return idx;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> items_;
};

}  // namespace ffdasm
