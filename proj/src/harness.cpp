#include "ffdasm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ffdasm/csv.hpp"
#include "ffdasm/rotation.hpp"

namespace ffdasm {

namespace {

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double idx = q * (static_cast<double>(v.size()) - 1);
    const auto lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] * (1 - frac) + v[hi] * frac;
}

Eigen::Vector3d noisy(const Eigen::Vector3d& p, double sigma, std::mt19937_64& rng) {
    if (sigma <= 0) return p;
    std::normal_distribution<double> gauss(0.0, sigma);
    return p + Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
}

// In-plane basis for a unit axis, same construction as build_plane_frame.
std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const Eigen::Vector3d& axis) {
    int best = 0;
    double best_dot = std::abs(axis.x());
    for (int i = 1; i < 3; ++i)
        if (std::abs(axis[i]) < best_dot - 1e-15) {
            best_dot = std::abs(axis[i]);
            best = i;
        }
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[best] = 1.0;
    const Eigen::Vector3d u = (e - e.dot(axis) * axis).normalized();
    return {u, axis.cross(u)};
}

double interpolate_at(const std::vector<double>& times, const std::vector<double>& values,
                      double t) {
    if (times.empty()) return 0.0;
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return values[lo] * (1 - w) + values[hi] * w;
}

}  // namespace

double theorem1_bound(const std::vector<double>& times, const std::vector<double>& ee_speed,
                      const std::vector<double>& target_speed, double initial_gap) {
    if (initial_gap < 0) throw std::invalid_argument("theorem1_bound: negative initial gap");
    if (times.size() != ee_speed.size() || times.size() != target_speed.size())
        throw std::invalid_argument("theorem1_bound: profile lengths differ");
    if (times.size() < 2) return std::numeric_limits<double>::infinity();
    if (initial_gap == 0) return times.front();

    double acc = 0.0;
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double dt = times[i] - times[i - 1];
        const double f0 = ee_speed[i - 1] - target_speed[i - 1];
        const double f1 = ee_speed[i] - target_speed[i];
        const double inc = 0.5 * (f0 + f1) * dt;
        if (acc + inc >= initial_gap) {
            // linear interpolation of the cumulative trapezoid inside the step
            const double need = initial_gap - acc;
            const double frac = (inc > 0) ? need / inc : 1.0;
            return times[i - 1] + frac * dt;
        }
        acc += inc;
    }
    return std::numeric_limits<double>::infinity();
}

bool detect_divergence(const std::vector<double>& error_sum) {
    const std::size_t n = error_sum.size();
    if (n < 6) return false;
    const std::size_t start = n - n / 3;
    const std::size_t m = n - start;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = start; i < n; ++i) {
        const double x = static_cast<double>(i - start);
        sx += x;
        sy += error_sum[i];
        sxx += x * x;
        sxy += x * error_sum[i];
    }
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    if (denom == 0) return false;
    const double slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
    return slope > 0;
}

TrackingResult run_tracking_scenario(CmdpEnv& env, CherAgent& agent,
                                     const TrackScenarioConfig& sc) {
    if (sc.omega < 0 || sc.radius <= 0)
        throw std::invalid_argument("scenario: omega must be >= 0 and radius > 0");
    const EnvConfig& ecfg = env.config();
    const Simulator& base_sim = env.simulator();
    ActuationLimits limits = base_sim.limits();
    const Eigen::VectorXd trained_rate = limits.max_rate;
    if (sc.rate_cap > 0) limits.max_rate = limits.max_rate.cwiseMin(sc.rate_cap);
    Simulator sim(base_sim.chain(), limits, base_sim.params());
    sim.seed(sc.seed ^ 0xabcdef12345ull);

    const double dt = sim.params().dt;
    const Eigen::Vector3d axis = sc.axis.normalized();
    const auto [u0, v0] = plane_basis(axis);
    const Eigen::Vector3d off1 =
        sc.radius * (std::cos(sc.phase_1) * u0 + std::sin(sc.phase_1) * v0);
    const Eigen::Vector3d off2 =
        sc.radius * (std::cos(sc.phase_2) * u0 + std::sin(sc.phase_2) * v0);
    auto true_target = [&](const Eigen::Vector3d& off, double t) {
        return Eigen::Vector3d(sc.center + rodrigues(axis, sc.omega * t) * off);
    };

    std::mt19937_64 rng(sc.seed);
    const PointCloud object_template =
        sample_surface_raw(sc.object_shape, sc.cloud_points, 0.0, sc.seed ^ 0x77ull);
    auto frame_cloud = [&](double t) {
        PointCloud c;
        const Eigen::Matrix3d r = rodrigues(axis, sc.omega * t);
        c.points = (r * object_template.points).colwise() + sc.center;
        c.normals = r * object_template.normals;
        if (sc.cloud_noise > 0) {
            std::normal_distribution<double> gauss(0.0, sc.cloud_noise);
            for (int i = 0; i < c.size(); ++i)
                c.points.col(i) += Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        }
        return c;
    };

    PointNetEncoder encoder;
    if (sc.use_encoder) {
        if (sc.encoder_checkpoint.empty())
            throw std::invalid_argument("scenario: encoder route needs a checkpoint");
        encoder = PointNetEncoder::load(sc.encoder_checkpoint);
    }

    SystemState state = sim.make_state(ecfg.home1, ecfg.home2);
    const Eigen::Vector3d base_pos0 = state.base_pos;
    const Eigen::Quaterniond base_quat0 = state.base_quat;

    TrackingResult out;
    out.state_trace.reserve(static_cast<std::size_t>(sc.steps) + 1);
    out.state_trace.push_back(state);

    std::vector<RotationEstimate> rel_window;
    double spin_estimate = 0.0;
    bool have_spin = false;
    PlaneFrame frame1, frame2;
    bool have_frames = false;
    TargetEkf::Params ekf_params;
    ekf_params.dt = dt;
    ekf_params.measurement_noise =
        Eigen::Matrix2d::Identity() * std::max(1e-8, sc.measurement_noise * sc.measurement_noise);
    TargetEkf ekf1(ekf_params), ekf2(ekf_params);
    std::vector<Eigen::Vector3d> meas_win1, meas_win2;
    Eigen::Vector3d pending_pred1 = Eigen::Vector3d::Zero(), pending_pred2 = pending_pred1;
    bool have_pred = false;
    std::vector<double> pred_errors;
    const int burn_in = std::max(20, sc.steps / 5);

    double gc = 1.0;
    for (int i = 0; i < sc.steps; ++i) {
        const double t = i * dt;
        const Eigen::Vector3d t1 = true_target(off1, t);
        const Eigen::Vector3d t2 = true_target(off2, t);
        const Eigen::Vector3d m1 = noisy(t1, sc.measurement_noise, rng);
        const Eigen::Vector3d m2 = noisy(t2, sc.measurement_noise, rng);
        meas_win1.push_back(m1);
        meas_win2.push_back(m2);
        if (meas_win1.size() > 64) {
            meas_win1.erase(meas_win1.begin());
            meas_win2.erase(meas_win2.begin());
        }

        if (have_pred && i <= burn_in) {
            pred_errors.push_back((pending_pred1 - t1).norm());
            pred_errors.push_back((pending_pred2 - t2).norm());
        }

        // pose estimation at the configured interval
        if (i > 0 && i % sc.pose_interval == 0) {
            const double t_prev = (i - sc.pose_interval) * dt;
            const PointCloud prev = frame_cloud(t_prev);
            const PointCloud cur = frame_cloud(t);
            Eigen::Matrix3d rel;
            if (sc.use_encoder) {
                rel = encoder.estimate(prev, cur).rotation;
            } else {
                rel = kabsch_estimate(prev, cur);
            }
            rel_window.push_back(axis_angle_from_rotation(rel));
            if (rel_window.size() > 5) rel_window.erase(rel_window.begin());
            try {
                const RateEstimate rate =
                    angular_rate(rel_window, sc.pose_interval * dt);
                spin_estimate = rate.rate;
                have_spin = true;
                out.spin_estimates.push_back(spin_estimate);
                if (!have_frames && meas_win1.size() >= 8) {
                    const Eigen::Vector3d n = rate.axis;
                    try {
                        frame1 = build_plane_frame(n, meas_win1);
                        frame2 = build_plane_frame(n, meas_win2);
                        have_frames = true;
                    } catch (const std::invalid_argument&) {
                        have_frames = false;  // degenerate geometry, retry later
                    }
                }
            } catch (const std::runtime_error&) {
                // all-degenerate window: object is effectively static
                spin_estimate = 0.0;
                have_spin = true;
                out.spin_estimates.push_back(0.0);
            }
            if (!have_frames && have_spin && std::abs(spin_estimate) < 0.05 &&
                meas_win1.size() >= 8) {
                // static target: any plane through the point works
                auto static_frame = [&](const std::vector<Eigen::Vector3d>& win) {
                    PlaneFrame f;
                    f.axis = Eigen::Vector3d::UnitZ();
                    auto [u, v] = plane_basis(f.axis);
                    f.u = u;
                    f.v = v;
                    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
                    for (const auto& p : win) mean += p;
                    mean /= static_cast<double>(win.size());
                    f.center = f.u.dot(mean) * f.u + f.v.dot(mean) * f.v;
                    f.axial_offset = f.axis.dot(mean);
                    f.radius = 0.0;
                    return f;
                };
                frame1 = static_frame(meas_win1);
                frame2 = static_frame(meas_win2);
                have_frames = true;
            }
            if (have_frames) {
                ekf1.set_spin_rate(spin_estimate);
                ekf2.set_spin_rate(spin_estimate);
            }
        }

        Eigen::Vector3d goal1 = m1, goal2 = m2;
        if (have_frames) {
            const Eigen::Vector2d z1 = project(m1, frame1);
            const Eigen::Vector2d z2 = project(m2, frame2);
            if (!ekf1.initialized()) {
                ekf1.initialize(z1, frame1.radius);
                ekf2.initialize(z2, frame2.radius);
            } else {
                ekf1.predict();
                ekf1.update(z1);
                ekf2.predict();
                ekf2.update(z2);
                goal1 = predict_target(ekf1, frame1);
                goal2 = predict_target(ekf2, frame2);
                pending_pred1 = goal1;
                pending_pred2 = goal2;
                have_pred = true;
            }
        }

        Eigen::VectorXd goals(6);
        goals << goal1, goal2;
        const Eigen::VectorXd obs = Observation::from_state(state).vector();
        const Eigen::VectorXd a = agent.act(obs, goals, /*explore=*/false);
        const Eigen::VectorXd action = a.cwiseProduct(trained_rate);

        const double step_cost =
            ecfg.kappa * ((state.base_pos - base_pos0).norm() +
                          ecfg.orientation_weight * quat_angle(state.base_quat, base_quat0)) *
            static_cast<double>(i);
        out.metrics.cost_value += gc * step_cost;
        gc *= ecfg.gamma_c;

        state = sim.step(state, action);
        out.state_trace.push_back(state);

        const double t_next = (i + 1) * dt;
        const Eigen::Vector3d nt1 = true_target(off1, t_next);
        const Eigen::Vector3d nt2 = true_target(off2, t_next);
        out.times.push_back(t_next);
        out.metrics.e1.push_back((state.p_e1 - nt1).norm());
        out.metrics.e2.push_back((state.p_e2 - nt2).norm());
        out.true_target1.push_back(nt1);
        out.true_target2.push_back(nt2);
        out.goal1.push_back(goal1);
        out.goal2.push_back(goal2);
    }

    out.final_state = state;
    out.epsilon_pg = percentile(pred_errors, 0.95);

    const std::size_t n = out.metrics.e1.size();
    out.metrics.success = n > 0 && out.metrics.e1.back() <= ecfg.threshold1 &&
                          out.metrics.e2.back() <= ecfg.threshold2;
    for (std::size_t i = n; i-- > 0;) {
        if (out.metrics.e1[i] <= ecfg.threshold1 && out.metrics.e2[i] <= ecfg.threshold2)
            out.metrics.convergence_step = static_cast<int>(i);
        else
            break;
    }

    std::vector<double> esum(n);
    for (std::size_t i = 0; i < n; ++i) esum[i] = out.metrics.e1[i] + out.metrics.e2[i];
    out.metrics.diverged = detect_divergence(esum);
    const std::size_t tail = std::max<std::size_t>(1, n / 4);
    out.mean_tail_error =
        std::accumulate(esum.end() - static_cast<std::ptrdiff_t>(tail), esum.end(), 0.0) /
        static_cast<double>(tail);

    // Theorem-1 diagnostics per arm
    const double target_speed = sc.omega * sc.radius;
    auto arm_stats = [&](const std::vector<double>& err, bool arm1) {
        ArmTrackStats st;
        std::vector<double> times(n), speed(n), vt(n, target_speed);
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::Vector3d cur =
                arm1 ? out.state_trace[i + 1].p_e1 : out.state_trace[i + 1].p_e2;
            const Eigen::Vector3d prev = arm1 ? out.state_trace[i].p_e1 : out.state_trace[i].p_e2;
            speed[i] = (cur - prev).norm() / dt;
            times[i] = out.times[i];
        }
        const Eigen::Vector3d start_ee = arm1 ? out.state_trace[0].p_e1 : out.state_trace[0].p_e2;
        const Eigen::Vector3d start_target = arm1 ? true_target(off1, 0.0) : true_target(off2, 0.0);
        const double gap = (start_ee - start_target).norm();
        st.t_bound = theorem1_bound(times, speed, vt, gap);
        st.premise_ok = std::all_of(speed.begin(), speed.end(),
                                    [&](double s) { return target_speed <= s + 1e-12; });
        if (std::isfinite(st.t_bound)) {
            st.error_at_bound = interpolate_at(times, err, st.t_bound);
            const double thresh = arm1 ? ecfg.threshold1 : ecfg.threshold2;
            st.bound_ok = st.error_at_bound <= thresh + std::max(out.epsilon_pg, 1e-3);
        }
        return st;
    };
    out.arm1 = arm_stats(out.metrics.e1, true);
    out.arm2 = arm_stats(out.metrics.e2, false);
    out.metrics.t_bound = std::max(out.arm1.t_bound, out.arm2.t_bound);
    return out;
}

EvalReport evaluate_policy(const Simulator& sim, const EnvConfig& env_cfg, CherAgent& agent,
                           const EvalOptions& opts) {
    if (opts.episodes <= 0) throw std::invalid_argument("evaluate_policy: empty report");
    KinematicChain chain = sim.chain();
    chain.base_mass *= opts.base_mass_scale;
    chain.base_inertia *= opts.base_mass_scale;
    Simulator scaled(chain, sim.limits(), sim.params());
    CmdpEnv env(scaled, env_cfg);

    std::mt19937_64 rng(opts.seed);
    EvalReport report;
    report.base_mass_scale = opts.base_mass_scale;
    std::vector<double> e1s, e2s;
    int successes = 0;
    double cost_sum = 0;

    for (int k = 0; k < opts.episodes; ++k) {
        auto [obs, goals] = env.reset(opts.seed + static_cast<std::uint64_t>(k) * 7919u);
        SystemState start = env.state();
        if (opts.randomize_start) {
            std::uniform_real_distribution<double> jitter(-0.5, 0.5);
            for (int attempt = 0; attempt < 100; ++attempt) {
                Eigen::VectorXd h1 = env_cfg.home1, h2 = env_cfg.home2;
                for (Eigen::Index i = 0; i < h1.size(); ++i) h1[i] = wrap_angle(h1[i] + jitter(rng));
                for (Eigen::Index i = 0; i < h2.size(); ++i) h2[i] = wrap_angle(h2[i] + jitter(rng));
                const SystemState cand = scaled.make_state(h1, h2);
                if (!scaled.in_keepout(cand)) {
                    start = cand;
                    break;
                }
            }
        }

        SystemState state = start;
        const Eigen::Vector3d base_pos0 = state.base_pos;
        const Eigen::Quaterniond base_quat0 = state.base_quat;
        Simulator rollout_sim = scaled;
        rollout_sim.seed(opts.seed + static_cast<std::uint64_t>(k));
        const Eigen::VectorXd goal_vec = goals.vector();
        double cost_value = 0, gcost = 1.0;
        for (int t = 0; t < env_cfg.horizon; ++t) {
            const Eigen::VectorXd a =
                agent.act(Observation::from_state(state).vector(), goal_vec, false);
            const double dev = (state.base_pos - base_pos0).norm() +
                               env_cfg.orientation_weight * quat_angle(state.base_quat, base_quat0);
            cost_value += gcost * env_cfg.kappa * dev * static_cast<double>(t);
            gcost *= env_cfg.gamma_c;
            state = rollout_sim.step(state, a.cwiseProduct(rollout_sim.limits().max_rate));
        }
        const double fe1 = (state.p_e1 - goals.g1).norm();
        const double fe2 = (state.p_e2 - goals.g2).norm();
        e1s.push_back(fe1);
        e2s.push_back(fe2);
        cost_sum += cost_value;
        if (fe1 <= env_cfg.threshold1 && fe2 <= env_cfg.threshold2) ++successes;
    }

    auto mean_std = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double s2 = 0;
        for (double x : v) s2 += (x - m) * (x - m);
        return std::make_pair(m, std::sqrt(s2 / static_cast<double>(v.size())));
    };
    report.stats.episodes = opts.episodes;
    report.stats.success_rate = static_cast<double>(successes) / opts.episodes;
    report.stats.mean_cost_value = cost_sum / opts.episodes;
    std::tie(report.stats.mean_e1, report.stats.std_e1) = mean_std(e1s);
    std::tie(report.stats.mean_e2, report.stats.std_e2) = mean_std(e2s);
    return report;
}

void write_training_log(const std::string& path, const std::vector<EpisodeLog>& log) {
    CsvWriter csv(path, {"episode", "mean_e1", "mean_e2", "success_rate", "cost_value", "lambda",
                         "critic_loss", "cost_critic_loss", "policy_loss"});
    double rolling = 0;
    std::vector<double> window;
    for (const auto& l : log) {
        window.push_back(l.success ? 1.0 : 0.0);
        if (window.size() > 20) window.erase(window.begin());
        rolling = std::accumulate(window.begin(), window.end(), 0.0) /
                  static_cast<double>(window.size());
        csv.row({static_cast<double>(l.episode), l.mean_e1, l.mean_e2, rolling, l.cost_value,
                 l.lambda, l.critic_loss, l.cost_critic_loss, l.policy_loss});
    }
}

void write_tracking_trace(const std::string& path, const TrackingResult& result) {
    CsvWriter csv(path, {"t", "e1", "e2", "goal1_x", "goal1_y", "goal1_z", "goal2_x", "goal2_y",
                         "goal2_z", "target1_x", "target1_y", "target1_z", "target2_x",
                         "target2_y", "target2_z"});
    for (std::size_t i = 0; i < result.times.size(); ++i) {
        csv.row({result.times[i], result.metrics.e1[i], result.metrics.e2[i],
                 result.goal1[i].x(), result.goal1[i].y(), result.goal1[i].z(),
                 result.goal2[i].x(), result.goal2[i].y(), result.goal2[i].z(),
                 result.true_target1[i].x(), result.true_target1[i].y(),
                 result.true_target1[i].z(), result.true_target2[i].x(),
                 result.true_target2[i].y(), result.true_target2[i].z()});
    }
}

void write_trajectory_trace(const std::string& path, const std::vector<SystemState>& states) {
    if (states.empty()) throw std::invalid_argument("empty trajectory");
    const int n1 = static_cast<int>(states.front().theta1.size());
    const int n2 = static_cast<int>(states.front().theta2.size());
    std::vector<std::string> header{"t", "base_pos_x", "base_pos_y", "base_pos_z",
                                    "base_quat_w", "base_quat_x", "base_quat_y", "base_quat_z"};
    for (int i = 0; i < n1 + n2; ++i) header.push_back("theta_" + std::to_string(i));
    for (int i = 0; i < n1 + n2; ++i) header.push_back("theta_dot_" + std::to_string(i));
    header.insert(header.end(), {"p_e1_x", "p_e1_y", "p_e1_z", "p_e2_x", "p_e2_y", "p_e2_z"});
    CsvWriter csv(path, header);
    for (const auto& s : states) {
        std::vector<double> row{s.t, s.base_pos.x(), s.base_pos.y(), s.base_pos.z(),
                                s.base_quat.w(), s.base_quat.x(), s.base_quat.y(),
                                s.base_quat.z()};
        for (Eigen::Index i = 0; i < s.theta1.size(); ++i) row.push_back(s.theta1[i]);
        for (Eigen::Index i = 0; i < s.theta2.size(); ++i) row.push_back(s.theta2[i]);
        for (Eigen::Index i = 0; i < s.theta_dot1.size(); ++i) row.push_back(s.theta_dot1[i]);
        for (Eigen::Index i = 0; i < s.theta_dot2.size(); ++i) row.push_back(s.theta_dot2[i]);
        for (int i = 0; i < 3; ++i) row.push_back(s.p_e1[i]);
        for (int i = 0; i < 3; ++i) row.push_back(s.p_e2[i]);
        csv.row(row);
    }
}

}  // namespace ffdasm
