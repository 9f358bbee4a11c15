#include "ffdasm/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

namespace ffdasm {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + key + "' in " + where);
    }
}

double get_num(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& key, int fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    return obj[key].get<int>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
    return obj[key].get<bool>();
}

Eigen::Vector3d get_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(where + " must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::VectorXd get_vecn(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

Eigen::AlignedBox3d get_box(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError(where + " must be [[min.xyz], [max.xyz]]");
    return {get_vec3(j[0], where + " min"), get_vec3(j[1], where + " max")};
}

void apply_limits(const json& j, ActuationLimits& limits, int dof) {
    check_keys(j, {"max_angle", "max_rate", "max_torque", "kp", "kd", "keepout_radius"},
               "limits");
    limits.max_angle = Eigen::VectorXd::Constant(dof, get_num(j, "max_angle", limits.max_angle[0]));
    limits.max_rate = Eigen::VectorXd::Constant(dof, get_num(j, "max_rate", limits.max_rate[0]));
    limits.max_torque = get_num(j, "max_torque", limits.max_torque);
    limits.kp = get_num(j, "kp", limits.kp);
    limits.kd = get_num(j, "kd", limits.kd);
    limits.keepout_radius = get_num(j, "keepout_radius", limits.keepout_radius);
}

void apply_sim(const json& j, SimParams& sim) {
    check_keys(j, {"dt", "substeps", "noise_sigma"}, "sim");
    sim.dt = get_num(j, "dt", sim.dt);
    sim.substeps = get_int(j, "substeps", sim.substeps);
    sim.noise_sigma = get_num(j, "noise_sigma", sim.noise_sigma);
}

void apply_env(const json& j, EnvConfig& env) {
    check_keys(j,
               {"workspace1", "workspace2", "threshold1", "threshold2", "kappa",
                "orientation_weight", "gamma_r", "gamma_c", "horizon", "home1", "home2"},
               "env");
    if (j.contains("workspace1")) env.workspace1 = get_box(j["workspace1"], "env.workspace1");
    if (j.contains("workspace2")) env.workspace2 = get_box(j["workspace2"], "env.workspace2");
    env.threshold1 = get_num(j, "threshold1", env.threshold1);
    env.threshold2 = get_num(j, "threshold2", env.threshold2);
    env.kappa = get_num(j, "kappa", env.kappa);
    env.orientation_weight = get_num(j, "orientation_weight", env.orientation_weight);
    env.gamma_r = get_num(j, "gamma_r", env.gamma_r);
    env.gamma_c = get_num(j, "gamma_c", env.gamma_c);
    env.horizon = get_int(j, "horizon", env.horizon);
    if (j.contains("home1")) env.home1 = get_vecn(j["home1"], "env.home1");
    if (j.contains("home2")) env.home2 = get_vecn(j["home2"], "env.home2");
}

void apply_agent(const json& j, AgentConfig& agent) {
    check_keys(j,
               {"mode", "lambda_p", "lambda_l_init", "zeta", "cost_limit", "sigma_a",
                "epsilon_random", "batch_size", "updates_per_episode", "polyak", "episodes",
                "buffer_capacity", "hidden", "lr_critic", "lr_policy", "her", "eval_episodes"},
               "agent");
    if (j.contains("mode")) {
        const std::string mode = j["mode"].get<std::string>();
        if (mode == "penalty")
            agent.mode = ConstraintMode::Penalty;
        else if (mode == "lagrangian")
            agent.mode = ConstraintMode::Lagrangian;
        else
            throw ConfigError("agent.mode must be 'penalty' or 'lagrangian'");
    }
    agent.lambda_p = get_num(j, "lambda_p", agent.lambda_p);
    agent.lambda_l_init = get_num(j, "lambda_l_init", agent.lambda_l_init);
    agent.zeta = get_num(j, "zeta", agent.zeta);
    agent.cost_limit = get_num(j, "cost_limit", agent.cost_limit);
    agent.sigma_a = get_num(j, "sigma_a", agent.sigma_a);
    agent.epsilon_random = get_num(j, "epsilon_random", agent.epsilon_random);
    agent.batch_size = get_int(j, "batch_size", agent.batch_size);
    agent.updates_per_episode = get_int(j, "updates_per_episode", agent.updates_per_episode);
    agent.polyak = get_num(j, "polyak", agent.polyak);
    agent.episodes = get_int(j, "episodes", agent.episodes);
    if (j.contains("buffer_capacity"))
        agent.buffer_capacity = static_cast<std::size_t>(j["buffer_capacity"].get<std::int64_t>());
    if (j.contains("hidden")) {
        agent.hidden.clear();
        for (const auto& h : j["hidden"]) agent.hidden.push_back(h.get<int>());
    }
    agent.lr_critic = get_num(j, "lr_critic", agent.lr_critic);
    agent.lr_policy = get_num(j, "lr_policy", agent.lr_policy);
    agent.her = get_bool(j, "her", agent.her);
    agent.eval_episodes = get_int(j, "eval_episodes", agent.eval_episodes);
}

}  // namespace

FullConfig default_planar_config() {
    FullConfig cfg;
    cfg.chain = make_planar_chain();
    cfg.limits = ActuationLimits::uniform(cfg.chain.dof());
    cfg.limits.keepout_radius = 0.25;
    cfg.sim = SimParams{};
    cfg.env.workspace1 =
        Eigen::AlignedBox3d(Eigen::Vector3d(-0.2, 1.1, 0.0), Eigen::Vector3d(0.8, 1.9, 0.0));
    cfg.env.workspace2 =
        Eigen::AlignedBox3d(Eigen::Vector3d(-0.8, 1.1, 0.0), Eigen::Vector3d(0.2, 1.9, 0.0));
    cfg.env.horizon = 60;
    cfg.env.home1 = (Eigen::VectorXd(2) << 0.5, -1.0).finished();
    cfg.env.home2 = (Eigen::VectorXd(2) << -0.5, 1.0).finished();
    cfg.agent.hidden = {64, 64, 64};
    cfg.agent.episodes = 400;
    cfg.agent.cost_limit = 30.0;
    cfg.source_json = "{\"chain\": {\"preset\": \"planar\"}}";
    return cfg;
}

FullConfig default_full_config() {
    FullConfig cfg;
    cfg.chain = make_full_chain();
    cfg.limits = ActuationLimits::uniform(cfg.chain.dof());
    cfg.limits.keepout_radius = 0.45;
    cfg.sim = SimParams{};
    cfg.env.workspace1 = Eigen::AlignedBox3d(Eigen::Vector3d(0.75, -0.25, -0.25),
                                             Eigen::Vector3d(1.25, 0.25, 0.25));
    cfg.env.workspace2 = Eigen::AlignedBox3d(Eigen::Vector3d(-1.25, -0.25, -0.25),
                                             Eigen::Vector3d(-0.75, 0.25, 0.25));
    cfg.env.horizon = 100;
    cfg.env.home1 = (Eigen::VectorXd(6) << 0.0, -1.0, 1.2, -0.2, 0.5, 0.0).finished();
    cfg.env.home2 = (Eigen::VectorXd(6) << 0.0, -1.0, 1.2, -0.2, 0.5, 0.0).finished();
    cfg.agent.hidden = {256, 256, 256};
    cfg.agent.episodes = 50;
    cfg.agent.cost_limit = 60.0;
    cfg.source_json = "{\"chain\": {\"preset\": \"ur5_full\"}}";
    return cfg;
}

FullConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    json root;
    try {
        root = json::parse(is, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    check_keys(root, {"chain", "limits", "sim", "env", "agent"}, "config root");

    std::string preset = "planar";
    if (root.contains("chain")) {
        const json& jc = root["chain"];
        check_keys(jc,
                   {"preset", "link1_length", "link2_length", "link1_mass", "link2_mass",
                    "base_mass", "base_side"},
                   "chain");
        if (jc.contains("preset")) preset = jc["preset"].get<std::string>();
    }

    FullConfig cfg;
    if (preset == "planar") {
        cfg = default_planar_config();
        if (root.contains("chain")) {
            const json& jc = root["chain"];
            cfg.chain = make_planar_chain(
                get_num(jc, "link1_length", 1.2), get_num(jc, "link2_length", 1.0),
                get_num(jc, "link1_mass", 2.0), get_num(jc, "link2_mass", 1.0),
                get_num(jc, "base_mass", 100.0), get_num(jc, "base_side", 0.6));
        }
    } else if (preset == "ur5_full") {
        cfg = default_full_config();
        if (root.contains("chain")) {
            const json& jc = root["chain"];
            const double base_mass = get_num(jc, "base_mass", cfg.chain.base_mass);
            cfg.chain.base_inertia *= base_mass / cfg.chain.base_mass;
            cfg.chain.base_mass = base_mass;
        }
    } else {
        throw ConfigError("chain.preset must be 'planar' or 'ur5_full'");
    }

    try {
        if (root.contains("limits")) apply_limits(root["limits"], cfg.limits, cfg.chain.dof());
        if (root.contains("sim")) apply_sim(root["sim"], cfg.sim);
        if (root.contains("env")) apply_env(root["env"], cfg.env);
        if (root.contains("agent")) apply_agent(root["agent"], cfg.agent);
        cfg.limits.validate(cfg.chain.dof());
        cfg.env.validate(cfg.chain);
        cfg.agent.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid config value: ") + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    cfg.source_json = root.dump(2);
    return cfg;
}

void save_config(const FullConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << cfg.source_json << '\n';
}

}  // namespace ffdasm
