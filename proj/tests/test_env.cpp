#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ffdasm/config.hpp"
#include "ffdasm/env.hpp"

using namespace ffdasm;

namespace {
CmdpEnv make_env() { return default_planar_config().make_env(); }
}  // namespace

TEST_CASE("reset: deterministic under seed, goals in workspace and outside keep-out") {
    CmdpEnv env = make_env();
    const auto [obs_a, goals_a] = env.reset(77);
    CmdpEnv env2 = make_env();
    const auto [obs_b, goals_b] = env2.reset(77);
    CHECK((goals_a.g1 - goals_b.g1).norm() == 0.0);
    CHECK((goals_a.g2 - goals_b.g2).norm() == 0.0);
    CHECK((obs_a.vector() - obs_b.vector()).norm() == 0.0);

    const EnvConfig& cfg = env.config();
    const double keepout = env.simulator().limits().keepout_radius;
    for (int i = 0; i < 10000; ++i) {
        const auto [obs, goals] = env.reset(i);
        CHECK(cfg.workspace1.contains(goals.g1));
        CHECK(cfg.workspace2.contains(goals.g2));
        CHECK(goals.g1.norm() > keepout);
        CHECK(goals.g2.norm() > keepout);
    }
}

TEST_CASE("reset: explicit goal override is returned untouched") {
    CmdpEnv env = make_env();
    GoalPair forced{Eigen::Vector3d(0.1, 1.4, 0.0), Eigen::Vector3d(-0.1, 1.5, 0.0)};
    const auto [obs, goals] = env.reset(3, forced);
    CHECK((goals.g1 - forced.g1).norm() == 0.0);
    CHECK((goals.g2 - forced.g2).norm() == 0.0);
}

TEST_CASE("reward: sparse thresholds, boundary inclusive") {
    CmdpEnv env = make_env();
    env.reset(1);
    Observation obs = Observation::from_state(env.state());
    GoalPair goals;

    goals.g1 = obs.p_e1 + Eigen::Vector3d(0.03, 0, 0);
    goals.g2 = obs.p_e2 + Eigen::Vector3d(0, 0.04, 0);
    CHECK(env.reward(obs, goals) == 0.0);

    goals.g1 = obs.p_e1 + Eigen::Vector3d(0.06, 0, 0);
    goals.g2 = obs.p_e2 + Eigen::Vector3d(0.01, 0, 0);
    CHECK(env.reward(obs, goals) == -1.0);

    goals.g1 = obs.p_e1 + Eigen::Vector3d(0.05, 0, 0);  // exactly at the threshold
    goals.g2 = obs.p_e2;
    CHECK(env.reward(obs, goals) == 0.0);
}

TEST_CASE("cost: zero at start, zero index, hand arithmetic") {
    CmdpEnv env = make_env();
    env.reset(5);
    CHECK(env.cost(env.state(), 0) == 0.0);
    CHECK(env.cost(env.state(), 10) == 0.0);  // base has not moved yet

    SystemState moved = env.state();
    moved.base_pos += Eigen::Vector3d(0.1, 0, 0);
    CHECK(env.cost(moved, 10) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(env.cost(moved, 0) == 0.0);
    CHECK_THROWS_AS(env.cost(moved, -1), std::invalid_argument);
}

TEST_CASE("env_step: first step cost is zero; flags and bounds over a rollout") {
    CmdpEnv env = make_env();
    env.reset(11);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    double reward_sum = 0.0, discounted_cost = 0.0, gc = 1.0;
    for (int t = 0; t < env.config().horizon; ++t) {
        Eigen::VectorXd a(env.action_dim());
        for (int i = 0; i < a.size(); ++i) a[i] = uni(rng);
        const StepResult res = env.env_step(env.scale_action(a));
        if (t == 0) CHECK(res.cost == 0.0);
        CHECK((res.reward == 0.0 || res.reward == -1.0));
        CHECK(res.cost >= 0.0);
        CHECK(res.success == (res.reward == 0.0));
        reward_sum += res.reward;
        discounted_cost += gc * res.cost;
        gc *= env.config().gamma_c;
    }
    CHECK(reward_sum >= -env.config().horizon);
    CHECK(reward_sum <= 0.0);
    CHECK(std::isfinite(discounted_cost));
    CHECK_THROWS_AS(env.env_step(Eigen::VectorXd::Zero(env.action_dim())), std::logic_error);
}

TEST_CASE("env_step: zero action with satisfied goals keeps reward at zero") {
    CmdpEnv env = make_env();
    env.reset(2);
    GoalPair at_home{env.state().p_e1, env.state().p_e2};
    env.reset(2, at_home);
    const StepResult res = env.env_step(Eigen::VectorXd::Zero(env.action_dim()));
    CHECK(res.reward == 0.0);
    CHECK(res.success);
}

TEST_CASE("env_step: action length mismatch is an input error") {
    CmdpEnv env = make_env();
    env.reset(0);
    CHECK_THROWS_AS(env.env_step(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("observation round-trips the simulator state exactly") {
    CmdpEnv env = make_env();
    env.reset(9);
    for (int t = 0; t < 5; ++t)
        env.env_step(env.scale_action(Eigen::VectorXd::Constant(env.action_dim(), 0.4)));
    const Observation obs = Observation::from_state(env.state());
    CHECK((obs.theta1 - env.state().theta1).norm() == 0.0);
    CHECK((obs.theta_dot2 - env.state().theta_dot2).norm() == 0.0);
    CHECK((obs.p_e1 - env.state().p_e1).norm() == 0.0);
    const Eigen::VectorXd v = obs.vector();
    CHECK(v.size() == env.observation_dim());
    CHECK(v.size() == 2 * env.action_dim() + 6);
}

TEST_CASE("reward purity: recomputation needs only end-effectors and goals") {
    CmdpEnv env = make_env();
    env.reset(21);
    env.env_step(env.scale_action(Eigen::VectorXd::Constant(4, 0.3)));
    const Observation obs = Observation::from_state(env.state());
    // substituting goals (hindsight relabeling) touches no simulator state
    GoalPair her{obs.p_e1, obs.p_e2};
    CHECK(env.reward(obs, her) == 0.0);
    GoalPair far{obs.p_e1 + Eigen::Vector3d(1, 0, 0), obs.p_e2};
    CHECK(env.reward(obs, far) == -1.0);
}
