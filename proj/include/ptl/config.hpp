#ifndef PTL_CONFIG_HPP
#define PTL_CONFIG_HPP

#include <filesystem>
#include <string>

#include "ptl/data.hpp"
#include "ptl/harness.hpp"

namespace ptl {

/// JSON config file with nested sections mapping 1:1 onto ExperimentConfig /
/// TriggerSpec / TrainConfig / AugmentSpec / SyntheticSpec. Every field has a
/// default (the struct initializers); unknown keys are rejected so typos
/// cannot silently fall back to defaults.
struct FullConfig {
  ExperimentConfig experiment;
  SyntheticSpec synthetic;
};

const char* trigger_kind_name(TriggerKind k);
TriggerKind trigger_kind_from_name(const std::string& name);
const char* phase_policy_name(PhasePolicy p);
PhasePolicy phase_policy_from_name(const std::string& name);
const char* optimizer_name(Optimizer o);
Optimizer optimizer_from_name(const std::string& name);

FullConfig parse_config(const std::string& json_text);
FullConfig load_config(const std::filesystem::path& path);

/// Canonical serialization (sorted keys, all fields explicit). Hash of this
/// string is the config hash recorded in results.
std::string config_to_json(const FullConfig& cfg);
std::uint64_t config_hash(const FullConfig& cfg);

} // namespace ptl

#endif
