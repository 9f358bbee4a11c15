#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "ffdasm/config.hpp"
#include "ffdasm/csv.hpp"
#include "ffdasm/harness.hpp"

namespace fs = std::filesystem;
using namespace ffdasm;

namespace {

// exit codes: 0 ok, 2 flag/parse error, 3 config error, 4 missing file, 5 runtime failure
constexpr int kExitParse = 2;
constexpr int kExitConfig = 3;
constexpr int kExitMissing = 4;
constexpr int kExitRuntime = 5;

FullConfig load_or_default(const std::string& path, const std::string& preset) {
    if (!path.empty()) {
        if (!fs::exists(path)) throw std::ios_base::failure("config file not found: " + path);
        return load_config(path);
    }
    return preset == "ur5_full" ? default_full_config() : default_planar_config();
}

std::string variant_label(const AgentConfig& agent) {
    std::ostringstream os;
    if (agent.mode == ConstraintMode::Penalty)
        os << "cher-p_lambda" << agent.lambda_p;
    else
        os << "cher-l_zeta" << agent.zeta;
    if (!agent.her) os << "_noher";
    return os.str();
}

void write_eval_summary(const std::string& path, const std::string& variant, std::uint64_t seed,
                        const EvalStats& stats) {
    {
        CsvWriter csv(path, {"variant", "seed", "success_rate", "mean_e1", "std_e1", "mean_e2",
                             "std_e2", "cost_value", "episodes"});
    }
    std::ofstream os(path, std::ios::app);  // variant is a string column
    os.precision(17);
    os << variant << ',' << seed << ',' << stats.success_rate << ',' << stats.mean_e1 << ','
       << stats.std_e1 << ',' << stats.mean_e2 << ',' << stats.std_e2 << ','
       << stats.mean_cost_value << ',' << stats.episodes << '\n';
}

int cmd_train(const std::string& config_path, const std::string& mode, std::uint64_t seed,
              std::string out_dir, int episodes_override, double lambda_override, int her_flag) {
    FullConfig cfg = load_or_default(config_path, "planar");
    if (mode == "penalty")
        cfg.agent.mode = ConstraintMode::Penalty;
    else if (mode == "lagrangian")
        cfg.agent.mode = ConstraintMode::Lagrangian;
    else if (!mode.empty())
        throw ConfigError("--mode must be penalty or lagrangian");
    if (episodes_override > 0) cfg.agent.episodes = episodes_override;
    if (lambda_override >= 0) cfg.agent.lambda_p = lambda_override;
    if (her_flag == 0) cfg.agent.her = false;
    if (her_flag == 1) cfg.agent.her = true;
    cfg.agent.validate();

    if (out_dir.empty()) out_dir = "runs/" + variant_label(cfg.agent) + "_seed" + std::to_string(seed);
    fs::create_directories(out_dir + "/checkpoints");
    fs::create_directories(out_dir + "/traces");
    save_config(cfg, out_dir + "/config.json");

    CmdpEnv env = cfg.make_env();
    cfg.agent.gamma_r = cfg.env.gamma_r;
    cfg.agent.gamma_c = cfg.env.gamma_c;
    CherAgent agent(env.observation_dim(), env.action_dim(), cfg.agent, seed);
    const TrainResult result = agent.train(env, seed, out_dir + "/checkpoints/agent.ckpt");

    write_training_log(out_dir + "/traces/training_log.csv", result.log);
    write_eval_summary(out_dir + "/eval_summary.csv", variant_label(cfg.agent), seed,
                       result.final_eval);
    std::ostringstream report;
    report << "variant: " << variant_label(cfg.agent) << "\nseed: " << seed
           << "\nepisodes: " << cfg.agent.episodes
           << "\nfinal eval success rate: " << result.final_eval.success_rate
           << "\nfinal eval e1: " << result.final_eval.mean_e1 << " +- " << result.final_eval.std_e1
           << "\nfinal eval e2: " << result.final_eval.mean_e2 << " +- " << result.final_eval.std_e2
           << "\nfinal eval cost value: " << result.final_eval.mean_cost_value << "\n";
    std::ofstream(out_dir + "/report.txt") << report.str();
    std::cout << report.str();
    return 0;
}

int cmd_eval(const std::string& checkpoint, int episodes, const std::string& config_path,
             bool randomize_start, double base_mass_scale, std::uint64_t seed,
             const std::string& out_csv) {
    if (!fs::exists(checkpoint)) throw std::ios_base::failure("checkpoint not found: " + checkpoint);
    FullConfig cfg = load_or_default(config_path, "planar");
    CherAgent agent = CherAgent::load(checkpoint, cfg.agent, seed);

    EvalOptions opts;
    opts.episodes = episodes;
    opts.randomize_start = randomize_start;
    opts.base_mass_scale = base_mass_scale;
    opts.seed = seed;
    const EvalReport report = evaluate_policy(cfg.make_simulator(), cfg.env, agent, opts);

    std::cout << "episodes: " << episodes << "\nbase mass scale: " << base_mass_scale
              << "\nsuccess rate: " << report.stats.success_rate
              << "\ne1: " << report.stats.mean_e1 << " +- " << report.stats.std_e1
              << "\ne2: " << report.stats.mean_e2 << " +- " << report.stats.std_e2
              << "\ncost value: " << report.stats.mean_cost_value << "\n";
    if (!out_csv.empty())
        write_eval_summary(out_csv, variant_label(cfg.agent), seed, report.stats);
    return 0;
}

int cmd_track(double omega, double radius, const std::string& checkpoint,
              const std::string& config_path, int steps, double noise, double rate_cap,
              const std::string& encoder_ckpt, std::string out_dir, std::uint64_t seed) {
    if (!fs::exists(checkpoint)) throw std::ios_base::failure("checkpoint not found: " + checkpoint);
    if (!encoder_ckpt.empty() && !fs::exists(encoder_ckpt))
        throw std::ios_base::failure("encoder checkpoint not found: " + encoder_ckpt);
    FullConfig cfg = load_or_default(config_path, "planar");
    CherAgent agent = CherAgent::load(checkpoint, cfg.agent, seed);
    CmdpEnv env = cfg.make_env();

    TrackScenarioConfig sc;
    sc.omega = omega;
    sc.radius = radius;
    sc.steps = steps;
    sc.measurement_noise = noise;
    sc.rate_cap = rate_cap;
    sc.seed = seed;
    if (!encoder_ckpt.empty()) {
        sc.use_encoder = true;
        sc.encoder_checkpoint = encoder_ckpt;
    }
    const TrackingResult result = run_tracking_scenario(env, agent, sc);

    if (out_dir.empty()) out_dir = "runs/track_omega" + std::to_string(omega);
    fs::create_directories(out_dir + "/traces");
    save_config(cfg, out_dir + "/config.json");
    write_tracking_trace(out_dir + "/traces/tracking.csv", result);
    write_trajectory_trace(out_dir + "/traces/trajectory.csv", result.state_trace);

    std::ostringstream report;
    report << "omega: " << omega << " rad/s, radius: " << radius << " m\n"
           << "steps: " << steps << "\n"
           << "final e1: " << result.metrics.e1.back()
           << ", final e2: " << result.metrics.e2.back() << "\n"
           << "mean tail e1+e2: " << result.mean_tail_error << "\n"
           << "diverged: " << (result.metrics.diverged ? "yes" : "no") << "\n"
           << "epsilon_pg (95th pct one-step EKF error): " << result.epsilon_pg << "\n"
           << "theorem-1 T_B arm1: " << result.arm1.t_bound
           << " (premise " << (result.arm1.premise_ok ? "holds" : "violated") << ")\n"
           << "theorem-1 T_B arm2: " << result.arm2.t_bound
           << " (premise " << (result.arm2.premise_ok ? "holds" : "violated") << ")\n";
    std::ofstream(out_dir + "/report.txt") << report.str();
    std::cout << report.str();
    return 0;
}

int cmd_pose_demo(const std::string& shape_name, double noise, int points, int trials,
                  bool do_train, int epochs, std::string out_dir, std::uint64_t seed) {
    ShapeSpec shape;
    if (shape_name == "box")
        shape = {ShapeKind::Box, Eigen::Vector3d(1.0, 0.7, 0.4)};
    else if (shape_name == "cylinder")
        shape = {ShapeKind::Cylinder, Eigen::Vector3d(0.5, 1.0, 0.0)};
    else if (shape_name == "sphere")
        shape = {ShapeKind::Sphere, Eigen::Vector3d(1.0, 0.0, 0.0)};
    else
        throw ConfigError("--shape must be box, cylinder or sphere");

    if (out_dir.empty()) out_dir = "runs/pose_demo";
    fs::create_directories(out_dir);

    std::mt19937_64 rng(seed);
    CsvWriter csv(out_dir + "/kabsch_errors.csv", {"trial", "true_angle", "kabsch_error"});
    double worst = 0;
    for (int i = 0; i < trials; ++i) {
        const PointCloud cloud = sample_surface(shape, points, noise, rng());
        auto [a, b, r_true] = make_rotation_pair(cloud, rng, noise);
        const Eigen::Matrix3d r_est = kabsch_estimate(a, b);
        const double err = geodesic_loss(r_true, r_est);
        worst = std::max(worst, err);
        csv.row({static_cast<double>(i), axis_angle_from_rotation(r_true).angle, err});
    }
    std::cout << "kabsch: " << trials << " trials, noise " << noise
              << ", worst geodesic error " << worst << " rad\n";

    if (do_train) {
        EncoderTrainConfig tc;
        tc.shape = shape;
        tc.points = points;
        tc.noise_sigma = noise;
        tc.epochs = epochs;
        tc.seed = seed;
        PointNetEncoder encoder(EncoderConfig{}, seed);
        const EncoderTrainResult result = train_encoder(encoder, tc);
        encoder.save(out_dir + "/encoder.ckpt");
        CsvWriter loss_csv(out_dir + "/encoder_loss.csv", {"epoch", "train_loss"});
        for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
            loss_csv.row({static_cast<double>(e), result.loss_curve[e]});
        std::cout << "encoder: trained " << epochs << " epochs, holdout mean geodesic error "
                  << result.holdout_mean_geodesic << " rad\ncheckpoint: " << out_dir
                  << "/encoder.ckpt\n";
    }
    return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_path) {
    if (!fs::exists(in_dir)) throw std::ios_base::failure("input directory not found: " + in_dir);
    struct Row {
        double success = 0, e1 = 0, e2 = 0, cost = 0;
        int n = 0;
    };
    std::map<std::string, Row> variants;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
        if (!entry.is_regular_file() || entry.path().filename() != "eval_summary.csv") continue;
        std::ifstream is(entry.path());
        std::string line;
        std::getline(is, line);  // header
        while (std::getline(is, line)) {
            std::istringstream ls(line);
            std::string variant, field;
            std::getline(ls, variant, ',');
            std::vector<double> vals;
            while (std::getline(ls, field, ',')) vals.push_back(std::stod(field));
            if (vals.size() < 7) continue;
            Row& r = variants[variant];
            r.success += vals[1];
            r.e1 += vals[2];
            r.e2 += vals[4];
            r.cost += vals[6];
            r.n += 1;
        }
    }
    if (variants.empty()) throw std::runtime_error("no eval_summary.csv files under " + in_dir);

    {
        CsvWriter csv(out_path, {"variant", "runs", "success_rate", "mean_e1", "mean_e2",
                                 "mean_cost_value"});
    }
    std::ofstream os(out_path, std::ios::app);
    os.precision(10);
    std::cout << "variant, runs, success_rate, mean_e1, mean_e2, mean_cost_value\n";
    for (auto& [name, r] : variants) {
        os << name << ',' << r.n << ',' << r.success / r.n << ',' << r.e1 / r.n << ','
           << r.e2 / r.n << ',' << r.cost / r.n << '\n';
        std::cout << name << ", " << r.n << ", " << r.success / r.n << ", " << r.e1 / r.n << ", "
                  << r.e2 / r.n << ", " << r.cost / r.n << "\n";
    }
    const auto p0 = variants.find("cher-p_lambda0");
    const auto p05 = variants.find("cher-p_lambda0.5");
    if (p0 != variants.end() && p05 != variants.end()) {
        const double c0 = p0->second.cost / p0->second.n;
        const double c05 = p05->second.cost / p05->second.n;
        std::cout << "cost ordering lambda_p=0.5 <= lambda_p=0: "
                  << (c05 <= c0 ? "holds" : "violated") << " (" << c05 << " vs " << c0 << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"free-floating dual-arm tracking laboratory"};
    app.require_subcommand(1);

    std::string config_path, checkpoint, out_dir, mode, encoder_ckpt, in_dir, out_path;
    std::string shape_name = "box";
    std::uint64_t seed = 0;
    int episodes = 20, steps = 400, points = 128, trials = 100, epochs = 25;
    int episodes_override = -1;
    double lambda_override = -1, omega = 0.5, radius = 0.15, noise = 0.005, rate_cap = -1;
    double base_mass_scale = 1.0;
    bool randomize_start = false, do_train_encoder = false;
    int her_flag = -1;

    auto* train = app.add_subcommand("train", "train a CHER policy");
    train->add_option("--config", config_path, "config JSON");
    train->add_option("--mode", mode, "penalty|lagrangian");
    train->add_option("--seed", seed, "run seed");
    train->add_option("--out", out_dir, "run directory");
    train->add_option("--episodes", episodes_override, "episode override");
    train->add_option("--lambda-p", lambda_override, "penalty coefficient override");
    train->add_flag("--her,!--no-her", her_flag, "toggle hindsight relabeling");

    auto* eval = app.add_subcommand("eval", "evaluate a trained policy");
    eval->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();
    eval->add_option("--episodes", episodes, "evaluation episodes");
    eval->add_option("--config", config_path, "config JSON");
    eval->add_option("--seed", seed, "evaluation seed");
    eval->add_option("--base-mass-scale", base_mass_scale, "base mass scaling (robustness sweep)");
    eval->add_flag("--randomize-start", randomize_start, "randomize start configuration");
    eval->add_option("--out", out_path, "eval summary CSV");

    auto* track = app.add_subcommand("track", "track targets on a spinning object");
    track->add_option("--omega", omega, "spin speed (rad/s)")->required();
    track->add_option("--radius", radius, "rotation radius (m)");
    track->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();
    track->add_option("--config", config_path, "config JSON");
    track->add_option("--steps", steps, "control steps");
    track->add_option("--noise", noise, "measurement noise sigma (m)");
    track->add_option("--rate-cap", rate_cap, "joint-rate cap for this run (rad/s)");
    track->add_option("--encoder", encoder_ckpt, "use the learned pose encoder");
    track->add_option("--out", out_dir, "run directory");
    track->add_option("--seed", seed, "scenario seed");

    auto* pose = app.add_subcommand("pose-demo", "rotation estimation demo");
    pose->add_option("--shape", shape_name, "box|cylinder|sphere");
    pose->add_option("--noise", noise, "point noise sigma");
    pose->add_option("--points", points, "points per cloud");
    pose->add_option("--trials", trials, "kabsch trials");
    pose->add_flag("--train-encoder", do_train_encoder, "train the learned encoder");
    pose->add_option("--epochs", epochs, "encoder training epochs");
    pose->add_option("--out", out_dir, "output directory");
    pose->add_option("--seed", seed, "seed");

    auto* report = app.add_subcommand("report", "aggregate run results into a table");
    report->add_option("--in", in_dir, "directory of runs")->required();
    report->add_option("--out", out_path, "output table CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return (e.get_exit_code() == 0) ? 0 : kExitParse;
    }

    try {
        if (train->parsed())
            return cmd_train(config_path, mode, seed, out_dir, episodes_override, lambda_override,
                             her_flag);
        if (eval->parsed())
            return cmd_eval(checkpoint, episodes, config_path, randomize_start, base_mass_scale,
                            seed, out_path);
        if (track->parsed())
            return cmd_track(omega, radius, checkpoint, config_path, steps, noise, rate_cap,
                             encoder_ckpt, out_dir, seed);
        if (pose->parsed())
            return cmd_pose_demo(shape_name, noise, points, trials, do_train_encoder, epochs,
                                 out_dir, seed);
        if (report->parsed()) return cmd_report(in_dir, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "missing file: " << e.what() << "\n";
        return kExitMissing;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
