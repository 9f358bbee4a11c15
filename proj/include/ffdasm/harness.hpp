#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "ffdasm/agent.hpp"
#include "ffdasm/ekf.hpp"
#include "ffdasm/encoder.hpp"
#include "ffdasm/env.hpp"
#include "ffdasm/pointcloud.hpp"

namespace ffdasm {

struct EpisodeMetrics {
    std::vector<double> e1, e2;  // per-step errors (m)
    bool success = false;        // final-step errors within thresholds
    double cost_value = 0.0;     // sum gamma_c^t c_t
    int convergence_step = -1;   // first step from which both errors stay within thresholds
    double t_bound = std::numeric_limits<double>::infinity();
    bool diverged = false;
};

/// Smallest T_B with d_e <= integral_t^{T_B} (ee_speed - target_speed) dtau
/// (trapezoid rule, linear interpolation inside the bracketing interval);
/// +infinity when the deficit is never covered. Throws on negative d_e.
double theorem1_bound(const std::vector<double>& times, const std::vector<double>& ee_speed,
                      const std::vector<double>& target_speed, double initial_gap);

/// Least-squares slope over the final third; positive slope = divergence.
bool detect_divergence(const std::vector<double>& error_sum);

struct TrackScenarioConfig {
    double omega = 0.5;    // rad/s
    double radius = 0.15;  // m
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d center = Eigen::Vector3d(0.0, 1.5, 0.0);
    double phase_1 = 0.0;  // target phases on the circle (rad)
    double phase_2 = 3.141592653589793;
    ShapeSpec object_shape{ShapeKind::Box, Eigen::Vector3d(0.3, 0.2, 0.12)};
    int cloud_points = 128;
    double cloud_noise = 0.005;       // m, on sampled surface points
    double measurement_noise = 0.005;  // m, on target-point measurements
    int pose_interval = 10;            // control steps between pose estimates
    int steps = 400;
    double rate_cap = -1.0;  // joint-rate cap for this run (<= 0 keeps training limits)
    bool use_encoder = false;
    std::string encoder_checkpoint;
    std::uint64_t seed = 0;
};

struct ArmTrackStats {
    double t_bound = std::numeric_limits<double>::infinity();
    bool premise_ok = false;  // v_t <= ee speed throughout
    bool bound_ok = false;    // error at T_B within threshold + epsilon
    double error_at_bound = 0.0;
};

struct TrackingResult {
    EpisodeMetrics metrics;
    std::vector<double> times;
    std::vector<double> spin_estimates;   // estimated rate after each pose update
    double epsilon_pg = 0.0;              // 95th-percentile one-step EKF error, burn-in
    ArmTrackStats arm1, arm2;
    double mean_tail_error = 0.0;         // mean e1+e2 over the final quarter
    SystemState final_state;
    std::vector<SystemState> state_trace;
    std::vector<Eigen::Vector3d> true_target1, true_target2, goal1, goal2;
};

/// Full perception -> prediction -> planning loop on a spinning object:
/// point-cloud rotation estimates at the configured interval, EKF target
/// prediction each control step, predicted targets fed to the policy as
/// goals.
TrackingResult run_tracking_scenario(CmdpEnv& env, CherAgent& agent,
                                     const TrackScenarioConfig& sc);

struct EvalOptions {
    int episodes = 20;
    bool randomize_start = false;
    double base_mass_scale = 1.0;
    std::uint64_t seed = 1234;
};

struct EvalReport {
    EvalStats stats;
    double base_mass_scale = 1.0;
};

/// Evaluation episodes with freshly sampled goals; optionally randomized
/// start configurations and a scaled base mass (robustness sweeps).
EvalReport evaluate_policy(const Simulator& sim, const EnvConfig& env_cfg, CherAgent& agent,
                           const EvalOptions& opts);

void write_training_log(const std::string& path, const std::vector<EpisodeLog>& log);
void write_tracking_trace(const std::string& path, const TrackingResult& result);
void write_trajectory_trace(const std::string& path, const std::vector<SystemState>& states);

}  // namespace ffdasm
