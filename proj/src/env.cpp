#include "ffdasm/env.hpp"

#include <stdexcept>

namespace ffdasm {

void EnvConfig::validate(const KinematicChain& chain) const {
    if (workspace1.isEmpty() || workspace2.isEmpty())
        throw std::invalid_argument("workspaces must be non-empty boxes");
    if (threshold1 <= 0 || threshold2 <= 0) throw std::invalid_argument("thresholds must be positive");
    if (kappa < 0) throw std::invalid_argument("kappa must be non-negative");
    if (gamma_r < 0 || gamma_r >= 1 || gamma_c < 0 || gamma_c >= 1)
        throw std::invalid_argument("discount factors must lie in [0, 1)");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (home1.size() != chain.arm1.dof() || home2.size() != chain.arm2.dof())
        throw std::invalid_argument("home configuration does not match chain dof");
}

Eigen::VectorXd Observation::vector() const {
    Eigen::VectorXd v(theta1.size() + theta_dot1.size() + theta2.size() + theta_dot2.size() + 6);
    v << theta1, theta_dot1, theta2, theta_dot2, p_e1, p_e2;
    return v;
}

Observation Observation::from_state(const SystemState& s) {
    Observation o;
    o.theta1 = s.theta1;
    o.theta_dot1 = s.theta_dot1;
    o.theta2 = s.theta2;
    o.theta_dot2 = s.theta_dot2;
    o.p_e1 = s.p_e1;
    o.p_e2 = s.p_e2;
    return o;
}

CmdpEnv::CmdpEnv(Simulator sim, EnvConfig cfg) : sim_(std::move(sim)), cfg_(std::move(cfg)) {
    cfg_.validate(sim_.chain());
    state_ = sim_.make_state(cfg_.home1, cfg_.home2);
    base_pos0_ = state_.base_pos;
    base_quat0_ = state_.base_quat;
    goals_ = {state_.p_e1, state_.p_e2};
}

Eigen::Vector3d CmdpEnv::sample_goal(const Eigen::AlignedBox3d& box) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double keepout = sim_.limits().keepout_radius;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Eigen::Vector3d u(uni(rng_), uni(rng_), uni(rng_));
        Eigen::Vector3d g = box.min() + u.cwiseProduct(box.sizes());
        if ((g - base_pos0_).norm() > keepout) return g;
    }
    throw std::runtime_error("goal sampling failed: workspace inside keep-out region");
}

std::pair<Observation, GoalPair> CmdpEnv::reset(std::uint64_t seed,
                                                const std::optional<GoalPair>& override_goals) {
    rng_.seed(seed);
    sim_.seed(seed ^ 0x9e3779b97f4a7c15ull);
    state_ = sim_.make_state(cfg_.home1, cfg_.home2);
    base_pos0_ = state_.base_pos;
    base_quat0_ = state_.base_quat;
    step_ = 0;
    if (override_goals) {
        goals_ = *override_goals;
    } else {
        goals_.g1 = sample_goal(cfg_.workspace1);
        goals_.g2 = sample_goal(cfg_.workspace2);
    }
    return {Observation::from_state(state_), goals_};
}

double CmdpEnv::reward(const Observation& obs, const GoalPair& goals) const {
    const bool ok = (obs.p_e1 - goals.g1).norm() <= cfg_.threshold1 &&
                    (obs.p_e2 - goals.g2).norm() <= cfg_.threshold2;
    return ok ? 0.0 : -1.0;
}

double CmdpEnv::base_deviation(const SystemState& s) const {
    const double trans = (s.base_pos - base_pos0_).norm();
    const double angle = quat_angle(s.base_quat, base_quat0_);
    return trans + cfg_.orientation_weight * angle;
}

double CmdpEnv::cost(const SystemState& state, int t) const {
    if (t < 0) throw std::invalid_argument("step index must be non-negative");
    return cfg_.kappa * base_deviation(state) * static_cast<double>(t);
}

Eigen::VectorXd CmdpEnv::scale_action(const Eigen::VectorXd& normalized) const {
    return normalized.cwiseProduct(sim_.limits().max_rate);
}

StepResult CmdpEnv::env_step(const Eigen::VectorXd& action) {
    if (action.size() != action_dim()) throw std::invalid_argument("action length mismatch");
    if (exhausted()) throw std::logic_error("episode exhausted; call reset");

    const double step_cost = cost(state_, step_);
    StepInfo info;
    state_ = sim_.step(state_, action, &info);
    ++step_;

    StepResult out;
    out.obs = Observation::from_state(state_);
    out.reward = reward(out.obs, goals_);
    out.cost = step_cost;
    out.collision = info.collision;
    out.success = out.reward == 0.0;
    return out;
}

}  // namespace ffdasm
