#include "ffdasm/agent.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ffdasm {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2);
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return x;
}

}  // namespace

void AgentConfig::validate() const {
    if (gamma_r < 0 || gamma_r >= 1 || gamma_c < 0 || gamma_c >= 1)
        throw std::invalid_argument("discount factors must lie in [0, 1)");
    if (lambda_p < 0 || lambda_l_init < 0) throw std::invalid_argument("multipliers must be >= 0");
    if (zeta <= 0) throw std::invalid_argument("zeta must be positive");
    if (batch_size < 1 || updates_per_episode < 0 || episodes < 1)
        throw std::invalid_argument("batch/updates/episodes must be positive");
    if (polyak < 0 || polyak > 1) throw std::invalid_argument("polyak rate outside [0, 1]");
    if (sigma_a < 0 || epsilon_random < 0 || epsilon_random > 1)
        throw std::invalid_argument("exploration parameters out of range");
}

CherAgent::CherAgent(int obs_dim, int action_dim, AgentConfig cfg, std::uint64_t seed)
    : obs_dim_(obs_dim), action_dim_(action_dim), cfg_(std::move(cfg)), rng_(seed) {
    cfg_.validate();
    const int in_sg = obs_dim_ + 6;
    std::vector<int> pw{in_sg};
    pw.insert(pw.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    pw.push_back(action_dim_);
    std::vector<int> cw{in_sg + action_dim_};
    cw.insert(cw.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    cw.push_back(1);

    policy_ = nn::DenseNet(pw, nn::Activation::Relu, nn::Activation::Tanh);
    critic_r_ = nn::DenseNet(cw, nn::Activation::Relu, nn::Activation::Identity);
    critic_c_ = nn::DenseNet(cw, nn::Activation::Relu, nn::Activation::Identity);
    nn::orthogonal_init(policy_, mix_seed(seed, 1));
    nn::orthogonal_init(critic_r_, mix_seed(seed, 2));
    nn::orthogonal_init(critic_c_, mix_seed(seed, 3));
    policy_target_ = policy_;
    critic_r_target_ = critic_r_;
    critic_c_target_ = critic_c_;
    opt_policy_ = nn::AdamState(policy_, {.lr = cfg_.lr_policy});
    opt_critic_r_ = nn::AdamState(critic_r_, {.lr = cfg_.lr_critic});
    opt_critic_c_ = nn::AdamState(critic_c_, {.lr = cfg_.lr_critic});
    lambda_l_ = cfg_.lambda_l_init;
}

double CherAgent::lambda() const {
    return cfg_.mode == ConstraintMode::Penalty ? cfg_.lambda_p : lambda_l_;
}

Eigen::VectorXd CherAgent::act(const Eigen::VectorXd& obs, const Eigen::VectorXd& goals,
                               bool explore) {
    if (obs.size() != obs_dim_ || goals.size() != 6)
        throw std::invalid_argument("act: observation/goal width mismatch");
    Eigen::VectorXd x(obs_dim_ + 6);
    x << obs, goals;
    Eigen::VectorXd a = policy_.forward(x);
    if (!explore) return a;

    if (cfg_.epsilon_random > 0) {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        if (coin(rng_) < cfg_.epsilon_random) {
            std::uniform_real_distribution<double> uni(-1.0, 1.0);
            for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = uni(rng_);
            return a;
        }
    }
    if (cfg_.sigma_a > 0) {
        std::normal_distribution<double> gauss(0.0, cfg_.sigma_a);
        for (Eigen::Index i = 0; i < a.size(); ++i)
            a[i] = std::clamp(a[i] + gauss(rng_), -1.0, 1.0);
    }
    return a;
}

Eigen::VectorXd CherAgent::critic_target(const Batch& batch) const {
    const int b = batch.size();
    const Eigen::MatrixXd a_next = policy_target_.forward(batch.next_obs_goals);
    Eigen::MatrixXd u(batch.next_obs_goals.rows() + action_dim_, b);
    u << batch.next_obs_goals, a_next;
    const Eigen::MatrixXd qn = critic_r_target_.forward(u);
    const double floor = -1.0 / (1.0 - cfg_.gamma_r);
    Eigen::VectorXd y = batch.rewards + cfg_.gamma_r * qn.row(0).transpose();
    return y.cwiseMax(floor).cwiseMin(0.0);
}

Eigen::VectorXd CherAgent::cost_critic_target(const Batch& batch) const {
    const int b = batch.size();
    const Eigen::MatrixXd a_next = policy_target_.forward(batch.next_obs_goals);
    Eigen::MatrixXd u(batch.next_obs_goals.rows() + action_dim_, b);
    u << batch.next_obs_goals, a_next;
    const Eigen::MatrixXd qn = critic_c_target_.forward(u);
    // costs are non-negative, so the true Qc is as well
    Eigen::VectorXd y = batch.costs + cfg_.gamma_c * qn.row(0).transpose();
    return y.cwiseMax(0.0);
}

std::pair<double, double> CherAgent::update_critics(const Batch& batch) {
    const int b = batch.size();
    const Eigen::VectorXd y_r = critic_target(batch);
    const Eigen::VectorXd y_c = cost_critic_target(batch);
    Eigen::MatrixXd u(batch.obs_goals.rows() + action_dim_, b);
    u << batch.obs_goals, batch.actions;

    auto fit = [&](nn::DenseNet& net, nn::AdamState& opt, const Eigen::VectorXd& y) {
        nn::DenseNet::Cache cache;
        const Eigen::MatrixXd q = net.forward(u, cache);
        const Eigen::RowVectorXd err = q.row(0) - y.transpose();
        const double loss = 0.5 * err.squaredNorm() / b;
        if (!std::isfinite(loss)) throw std::runtime_error("critic loss diverged (NaN)");
        auto grads = net.zero_gradients();
        net.backward(u, cache, err / b, grads);
        opt.step(net, grads);
        return loss;
    };
    const double loss_r = fit(critic_r_, opt_critic_r_, y_r);
    const double loss_c = fit(critic_c_, opt_critic_c_, y_c);
    return {loss_r, loss_c};
}

double CherAgent::policy_objective(const Batch& batch, double lambda,
                                   nn::DenseNet::Gradients* grads) const {
    const int b = batch.size();
    nn::DenseNet::Cache pcache;
    const Eigen::MatrixXd a = policy_.forward(batch.obs_goals, pcache);
    Eigen::MatrixXd u(batch.obs_goals.rows() + action_dim_, b);
    u << batch.obs_goals, a;

    nn::DenseNet::Cache rcache, ccache;
    const Eigen::MatrixXd qr = critic_r_.forward(u, rcache);
    const Eigen::MatrixXd qc = critic_c_.forward(u, ccache);
    const double loss =
        (-qr.row(0).array() + lambda * (qc.row(0).array() - cfg_.cost_limit)).mean();

    if (grads) {
        auto scratch_r = critic_r_.zero_gradients();
        const Eigen::MatrixXd up_r = Eigen::MatrixXd::Constant(1, b, -1.0 / b);
        Eigen::MatrixXd d_input = critic_r_.backward(u, rcache, up_r, scratch_r);
        if (lambda != 0.0) {
            auto scratch_c = critic_c_.zero_gradients();
            const Eigen::MatrixXd up_c = Eigen::MatrixXd::Constant(1, b, lambda / b);
            d_input += critic_c_.backward(u, ccache, up_c, scratch_c);
        }
        const Eigen::MatrixXd d_action = d_input.bottomRows(action_dim_);
        *grads = policy_.zero_gradients();
        policy_.backward(batch.obs_goals, pcache, d_action, *grads);
    }
    return loss;
}

double CherAgent::update_policy_penalty(const Batch& batch, double lambda_p) {
    nn::DenseNet::Gradients grads;
    const double loss = policy_objective(batch, lambda_p, &grads);
    if (!std::isfinite(loss)) throw std::runtime_error("policy loss diverged (NaN)");
    opt_policy_.step(policy_, grads);
    return loss;
}

double CherAgent::update_multiplier(const Batch& batch) {
    const int b = batch.size();
    nn::DenseNet::Cache pcache;
    const Eigen::MatrixXd a = policy_.forward(batch.obs_goals, pcache);
    Eigen::MatrixXd u(batch.obs_goals.rows() + action_dim_, b);
    u << batch.obs_goals, a;
    const Eigen::MatrixXd qc = critic_c_.forward(u);
    const double violation = (qc.row(0).array() - cfg_.cost_limit).mean();
    lambda_l_ = std::max(0.0, lambda_l_ + cfg_.zeta * violation);
    return lambda_l_;
}

void CherAgent::polyak_targets() {
    nn::polyak_update(policy_target_, policy_, cfg_.polyak);
    nn::polyak_update(critic_r_target_, critic_r_, cfg_.polyak);
    nn::polyak_update(critic_c_target_, critic_c_, cfg_.polyak);
}

std::vector<Transition> CherAgent::her_relabel(
    const std::vector<Transition>& episode,
    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& reward_fn) {
    if (episode.empty()) throw std::invalid_argument("her_relabel: empty episode");
    const Eigen::VectorXd achieved = episode.back().next_obs.tail(6);
    std::vector<Transition> out;
    out.reserve(episode.size());
    for (const Transition& t : episode) {
        Transition r = t;
        r.goals = achieved;
        r.reward = reward_fn(r.next_obs, r.goals);
        out.push_back(std::move(r));
    }
    return out;
}

CherAgent::Batch CherAgent::assemble(const ReplayBuffer& buffer,
                                     const std::vector<std::size_t>& idx) const {
    Batch b;
    const int n = static_cast<int>(idx.size());
    b.obs_goals.resize(obs_dim_ + 6, n);
    b.next_obs_goals.resize(obs_dim_ + 6, n);
    b.actions.resize(action_dim_, n);
    b.rewards.resize(n);
    b.costs.resize(n);
    for (int i = 0; i < n; ++i) {
        const Transition& t = buffer.at(idx[static_cast<std::size_t>(i)]);
        b.obs_goals.col(i) << t.obs, t.goals;
        b.next_obs_goals.col(i) << t.next_obs, t.goals;
        b.actions.col(i) = t.action;
        b.rewards[i] = t.reward;
        b.costs[i] = t.cost;
    }
    return b;
}

CherAgent::Batch CherAgent::sample_batch(const ReplayBuffer& buffer) {
    return assemble(buffer, buffer.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng_));
}

TrainResult CherAgent::train(CmdpEnv& env, std::uint64_t run_seed,
                             const std::string& checkpoint_path) {
    if (env.observation_dim() != obs_dim_ || env.action_dim() != action_dim_)
        throw std::invalid_argument("agent/environment dimension mismatch");
    ReplayBuffer buffer(cfg_.buffer_capacity);
    TrainResult result;
    result.log.reserve(static_cast<std::size_t>(cfg_.episodes));
    const int horizon = env.config().horizon;

    for (int m = 0; m < cfg_.episodes; ++m) {
        auto [obs, goals] = env.reset(mix_seed(run_seed, static_cast<std::uint64_t>(m)));
        const Eigen::VectorXd goal_vec = goals.vector();

        std::vector<Transition> episode;
        episode.reserve(static_cast<std::size_t>(horizon));
        EpisodeLog log;
        log.episode = m;
        double sum_e1 = 0, sum_e2 = 0, gc = 1.0;
        Observation cur = obs;
        for (int t = 0; t < horizon; ++t) {
            const Eigen::VectorXd a = act(cur.vector(), goal_vec, /*explore=*/true);
            const StepResult res = env.env_step(env.scale_action(a));
            Transition tr;
            tr.obs = cur.vector();
            tr.action = a;
            tr.goals = goal_vec;
            tr.reward = res.reward;
            tr.cost = res.cost;
            tr.next_obs = res.obs.vector();
            tr.final_step = (t + 1 == horizon);
            episode.push_back(std::move(tr));

            sum_e1 += (res.obs.p_e1 - goals.g1).norm();
            sum_e2 += (res.obs.p_e2 - goals.g2).norm();
            log.cost_value += gc * res.cost;
            gc *= cfg_.gamma_c;
            if (t + 1 == horizon) {
                log.final_e1 = (res.obs.p_e1 - goals.g1).norm();
                log.final_e2 = (res.obs.p_e2 - goals.g2).norm();
                log.success = res.success;
            }
            cur = res.obs;
        }
        log.mean_e1 = sum_e1 / horizon;
        log.mean_e2 = sum_e2 / horizon;

        std::vector<Transition> relabeled;
        if (cfg_.her) {
            relabeled = her_relabel(episode, [&env](const Eigen::VectorXd& next_obs,
                                                    const Eigen::VectorXd& g) {
                Observation o;
                o.p_e1 = next_obs.segment(next_obs.size() - 6, 3);
                o.p_e2 = next_obs.tail(3);
                return env.reward(o, GoalPair{g.head(3), g.tail(3)});
            });
        }
        for (std::size_t t = 0; t < episode.size(); ++t) {
            buffer.push(std::move(episode[t]));
            if (cfg_.her) buffer.push(std::move(relabeled[t]));
        }

        double lr_sum = 0, lc_sum = 0, lp_sum = 0;
        for (int n = 0; n < cfg_.updates_per_episode; ++n) {
            const Batch batch = sample_batch(buffer);
            const auto [lr, lc] = update_critics(batch);
            double lp = 0;
            if (cfg_.mode == ConstraintMode::Penalty) {
                lp = update_policy_penalty(batch, cfg_.lambda_p);
            } else {
                lp = update_policy_lagrangian(batch);
                update_multiplier(batch);
            }
            polyak_targets();
            lr_sum += lr;
            lc_sum += lc;
            lp_sum += lp;
        }
        const double denom = std::max(1, cfg_.updates_per_episode);
        log.critic_loss = lr_sum / denom;
        log.cost_critic_loss = lc_sum / denom;
        log.policy_loss = lp_sum / denom;
        log.lambda = lambda();
        result.log.push_back(log);

        if (!checkpoint_path.empty() && cfg_.episodes >= 4 && (m + 1) % (cfg_.episodes / 4) == 0)
            save(checkpoint_path);
    }

    if (!checkpoint_path.empty()) save(checkpoint_path);
    result.final_eval = evaluate(env, cfg_.eval_episodes, mix_seed(run_seed, 0xe7a1u));
    return result;
}

EvalStats CherAgent::evaluate(CmdpEnv& env, int episodes, std::uint64_t seed) {
    if (episodes <= 0) throw std::invalid_argument("evaluate: need at least one episode");
    EvalStats stats;
    stats.episodes = episodes;
    std::vector<double> e1s, e2s;
    const int horizon = env.config().horizon;
    for (int k = 0; k < episodes; ++k) {
        auto [obs, goals] = env.reset(mix_seed(seed, static_cast<std::uint64_t>(k)));
        const Eigen::VectorXd goal_vec = goals.vector();
        Observation cur = obs;
        double cost_value = 0, gc = 1.0;
        bool success = false;
        double fe1 = 0, fe2 = 0;
        for (int t = 0; t < horizon; ++t) {
            const Eigen::VectorXd a = act(cur.vector(), goal_vec, /*explore=*/false);
            const StepResult res = env.env_step(env.scale_action(a));
            cost_value += gc * res.cost;
            gc *= cfg_.gamma_c;
            if (t + 1 == horizon) {
                success = res.success;
                fe1 = (res.obs.p_e1 - goals.g1).norm();
                fe2 = (res.obs.p_e2 - goals.g2).norm();
            }
            cur = res.obs;
        }
        stats.success_rate += success ? 1.0 : 0.0;
        stats.mean_cost_value += cost_value;
        e1s.push_back(fe1);
        e2s.push_back(fe2);
    }
    stats.success_rate /= episodes;
    stats.mean_cost_value /= episodes;
    auto mean_std = [](const std::vector<double>& v) {
        double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double s2 = 0;
        for (double x : v) s2 += (x - m) * (x - m);
        return std::make_pair(m, std::sqrt(s2 / static_cast<double>(v.size())));
    };
    std::tie(stats.mean_e1, stats.std_e1) = mean_std(e1s);
    std::tie(stats.mean_e2, stats.std_e2) = mean_std(e2s);
    return stats;
}

void CherAgent::save(const std::string& path) const {
    nn::Checkpoint ckpt;
    ckpt.add_net("policy", policy_);
    ckpt.add_net("policy_target", policy_target_);
    ckpt.add_net("critic_r", critic_r_);
    ckpt.add_net("critic_r_target", critic_r_target_);
    ckpt.add_net("critic_c", critic_c_);
    ckpt.add_net("critic_c_target", critic_c_target_);
    ckpt.add_scalar("lambda_l", lambda_l_);
    ckpt.save(path);
}

CherAgent CherAgent::load(const std::string& path, const AgentConfig& cfg, std::uint64_t seed) {
    const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
    const nn::DenseNet policy = ckpt.read_net("policy");
    const int in_sg = policy.input_width();
    const int action_dim = policy.output_width();
    CherAgent agent(in_sg - 6, action_dim, cfg, seed);
    agent.policy_ = policy;
    agent.policy_target_ = ckpt.read_net("policy_target");
    agent.critic_r_ = ckpt.read_net("critic_r");
    agent.critic_r_target_ = ckpt.read_net("critic_r_target");
    agent.critic_c_ = ckpt.read_net("critic_c");
    agent.critic_c_target_ = ckpt.read_net("critic_c_target");
    agent.lambda_l_ = ckpt.scalar("lambda_l");
    agent.opt_policy_ = nn::AdamState(agent.policy_, {.lr = cfg.lr_policy});
    agent.opt_critic_r_ = nn::AdamState(agent.critic_r_, {.lr = cfg.lr_critic});
    agent.opt_critic_c_ = nn::AdamState(agent.critic_c_, {.lr = cfg.lr_critic});
    return agent;
}

}  // namespace ffdasm
