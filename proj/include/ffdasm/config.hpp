#pragma once

#include <stdexcept>
#include <string>

#include "ffdasm/agent.hpp"
#include "ffdasm/dynamics.hpp"
#include "ffdasm/env.hpp"

namespace ffdasm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FullConfig {
    KinematicChain chain;
    ActuationLimits limits;
    SimParams sim;
    EnvConfig env;
    AgentConfig agent;
    std::string source_json;  // resolved configuration, for provenance copies

    Simulator make_simulator() const { return Simulator(chain, limits, sim); }
    CmdpEnv make_env() const { return CmdpEnv(make_simulator(), env); }
};

/// Strict loader: unknown keys are rejected (ConfigError); missing keys fall
/// back to preset defaults. Throws ConfigError on malformed JSON or invalid
/// values, std::runtime_error if the file cannot be read.
FullConfig load_config(const std::string& path);

FullConfig default_planar_config();
FullConfig default_full_config();

void save_config(const FullConfig& cfg, const std::string& path);

}  // namespace ffdasm
