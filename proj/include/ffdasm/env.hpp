#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>

#include "ffdasm/dynamics.hpp"

namespace ffdasm {

struct EnvConfig {
    Eigen::AlignedBox3d workspace1, workspace2;  // goal sampling boxes (world)
    double threshold1 = 0.05;                    // U_e1 (m)
    double threshold2 = 0.05;                    // U_e2 (m)
    double kappa = 1.0;                          // cost scale
    double orientation_weight = 0.5;             // rad -> m weight in the base deviation
    double gamma_r = 0.98;
    double gamma_c = 0.98;
    int horizon = 60;                            // T, fixed episode length
    Eigen::VectorXd home1, home2;                // training start configuration

    void validate(const KinematicChain& chain) const;
};

struct Observation {
    Eigen::VectorXd theta1, theta_dot1, theta2, theta_dot2;
    Eigen::Vector3d p_e1, p_e2;

    Eigen::VectorXd vector() const;  // [theta1, td1, theta2, td2, p_e1, p_e2]
    static Observation from_state(const SystemState& s);
};

struct GoalPair {
    Eigen::Vector3d g1, g2;
    Eigen::VectorXd vector() const {
        Eigen::VectorXd v(6);
        v << g1, g2;
        return v;
    }
};

struct StepResult {
    Observation obs;
    double reward = -1.0;  // in {0, -1}
    double cost = 0.0;
    bool collision = false;
    bool success = false;
};

/// Goal-conditioned constrained MDP around the free-floating simulator:
/// sparse reach reward, time-weighted base-motion cost, fixed-length
/// episodes. One instance per thread.
class CmdpEnv {
public:
    CmdpEnv(Simulator sim, EnvConfig cfg);

    const EnvConfig& config() const { return cfg_; }
    const Simulator& simulator() const { return sim_; }
    const SystemState& state() const { return state_; }
    int action_dim() const { return sim_.dof(); }
    int observation_dim() const { return 2 * sim_.dof() + 6; }
    int step_index() const { return step_; }
    bool exhausted() const { return step_ >= cfg_.horizon; }

    std::pair<Observation, GoalPair> reset(std::uint64_t seed,
                                           const std::optional<GoalPair>& override_goals = {});

    /// Reward is a pure function of (end-effector positions, goals): 0 iff
    /// both errors are within their thresholds, else -1.
    double reward(const Observation& obs, const GoalPair& goals) const;

    /// c_t = kappa * ||base pose deviation from reset|| * t, evaluated at the
    /// pre-step state with the pre-step index.
    double cost(const SystemState& state, int t) const;

    StepResult env_step(const Eigen::VectorXd& action);

    const GoalPair& goals() const { return goals_; }
    /// Desired joint rates corresponding to a normalized action in [-1, 1].
    Eigen::VectorXd scale_action(const Eigen::VectorXd& normalized) const;

private:
    Eigen::Vector3d sample_goal(const Eigen::AlignedBox3d& box);
    double base_deviation(const SystemState& s) const;

    Simulator sim_;
    EnvConfig cfg_;
    SystemState state_;
    Eigen::Vector3d base_pos0_;
    Eigen::Quaterniond base_quat0_;
    GoalPair goals_;
    int step_ = 0;
    std::mt19937_64 rng_{0};
};

}  // namespace ffdasm
