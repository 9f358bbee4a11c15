#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ffdasm/checkpoint.hpp"
#include "ffdasm/env.hpp"
#include "ffdasm/nn.hpp"
#include "ffdasm/replay.hpp"

namespace ffdasm {

enum class ConstraintMode { Penalty, Lagrangian };

struct AgentConfig {
    double gamma_r = 0.98;
    double gamma_c = 0.98;
    double cost_limit = 30.0;  // C_s
    ConstraintMode mode = ConstraintMode::Penalty;
    double lambda_p = 0.5;
    double lambda_l_init = 0.0;
    double zeta = 0.01;
    double sigma_a = 0.2;          // exploration noise, normalized action units
    double epsilon_random = 0.2;   // uniform random action probability
    int batch_size = 128;
    int updates_per_episode = 40;  // N
    double polyak = 0.995;
    int episodes = 400;            // M
    std::size_t buffer_capacity = 200000;
    std::vector<int> hidden = {64, 64, 64};
    double lr_critic = 1e-3;
    double lr_policy = 1e-4;
    bool her = true;
    int eval_episodes = 20;

    void validate() const;
};

struct EpisodeLog {
    int episode = 0;
    double mean_e1 = 0, mean_e2 = 0;
    double final_e1 = 0, final_e2 = 0;
    bool success = false;
    double cost_value = 0;  // sum gamma_c^t c_t
    double lambda = 0;
    double critic_loss = 0, cost_critic_loss = 0, policy_loss = 0;
};

struct EvalStats {
    double success_rate = 0;
    double mean_e1 = 0, mean_e2 = 0;
    double std_e1 = 0, std_e2 = 0;
    double mean_cost_value = 0;
    int episodes = 0;
};

struct TrainResult {
    std::vector<EpisodeLog> log;
    EvalStats final_eval;
};

/// Goal-conditioned deterministic policy with a reward critic and a cost
/// critic; penalty- or Lagrangian-mode constrained policy updates plus
/// final-strategy hindsight relabeling.
class CherAgent {
public:
    struct Batch {
        Eigen::MatrixXd obs_goals;       // (obs+6) x B
        Eigen::MatrixXd actions;         // act x B
        Eigen::MatrixXd next_obs_goals;  // (obs+6) x B
        Eigen::VectorXd rewards, costs;
        int size() const { return static_cast<int>(rewards.size()); }
    };

    CherAgent(int obs_dim, int action_dim, AgentConfig cfg, std::uint64_t seed);

    const AgentConfig& config() const { return cfg_; }
    double lambda() const;
    double lambda_l() const { return lambda_l_; }
    int obs_dim() const { return obs_dim_; }
    int action_dim() const { return action_dim_; }

    nn::DenseNet& policy() { return policy_; }
    nn::DenseNet& reward_critic() { return critic_r_; }
    nn::DenseNet& cost_critic() { return critic_c_; }
    const nn::DenseNet& policy_target() const { return policy_target_; }

    Eigen::VectorXd act(const Eigen::VectorXd& obs, const Eigen::VectorXd& goals, bool explore);

    /// TD targets y_t = r + gamma_r * Qr'(s', pi'(s',g), g), clipped to
    /// [-1/(1-gamma_r), 0].
    Eigen::VectorXd critic_target(const Batch& batch) const;
    Eigen::VectorXd cost_critic_target(const Batch& batch) const;

    std::pair<double, double> update_critics(const Batch& batch);
    double update_policy_penalty(const Batch& batch, double lambda_p);
    double update_policy_lagrangian(const Batch& batch) {
        return update_policy_penalty(batch, lambda_l_);
    }
    double update_multiplier(const Batch& batch);
    void polyak_targets();

    /// Policy objective E[-Qr + lambda (Qc - C_s)] on the batch, and its
    /// gradient w.r.t. policy parameters (critics frozen).
    double policy_objective(const Batch& batch, double lambda,
                            nn::DenseNet::Gradients* grads = nullptr) const;

    /// Returns a copy of the episode with goals replaced by the final
    /// end-effector positions and rewards recomputed; s, a, s', c untouched.
    static std::vector<Transition> her_relabel(
        const std::vector<Transition>& episode,
        const std::function<double(const Eigen::VectorXd& next_obs,
                                   const Eigen::VectorXd& goals)>& reward_fn);

    TrainResult train(CmdpEnv& env, std::uint64_t run_seed,
                      const std::string& checkpoint_path = {});
    EvalStats evaluate(CmdpEnv& env, int episodes, std::uint64_t seed);

    Batch assemble(const ReplayBuffer& buffer, const std::vector<std::size_t>& idx) const;
    Batch sample_batch(const ReplayBuffer& buffer);

    void save(const std::string& path) const;
    static CherAgent load(const std::string& path, const AgentConfig& cfg, std::uint64_t seed);

private:
    int obs_dim_ = 0, action_dim_ = 0;
    AgentConfig cfg_;
    nn::DenseNet policy_, critic_r_, critic_c_;
    nn::DenseNet policy_target_, critic_r_target_, critic_c_target_;
    nn::AdamState opt_policy_, opt_critic_r_, opt_critic_c_;
    double lambda_l_ = 0.0;
    std::mt19937_64 rng_{0};
};

}  // namespace ffdasm
