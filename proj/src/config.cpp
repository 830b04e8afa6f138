#include "safelink/config.hpp"

#include "safelink/keyfile.hpp"

namespace safelink {

SimConfig load_config(const std::filesystem::path& path) {
  const KeyFile file = load_keyfile(path);
  SimConfig cfg;
  cfg.rvfl.input_dim = 2;  // endpoint-space classifier

  for (const KeySection& section : file.sections) {
    if (section.name == "workspace" || section.name == "target" ||
        section.name == "initial" || section.name == "rect" ||
        section.name == "sampling") {
      continue;  // scenario_from_keyfile consumes these below
    }
    if (section.name == "rvfl") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "groups")
          cfg.rvfl.groups = static_cast<int>(parse_integer(file, kv));
        else if (kv.key == "nodes_per_group")
          cfg.rvfl.nodes_per_group = static_cast<int>(parse_integer(file, kv));
        else if (kv.key == "ridge") cfg.rvfl.ridge = parse_real(file, kv);
        else if (kv.key == "activation_scale")
          cfg.rvfl.activation_scale = parse_real(file, kv);
        else if (kv.key == "init_range")
          cfg.rvfl.init_range = parse_real(file, kv);
        else if (kv.key == "input_scale")
          cfg.rvfl.input_scale = parse_real(file, kv);
        else if (kv.key == "seed") cfg.rvfl.seed = parse_unsigned(file, kv);
        else file.fail(kv.line, "unknown rvfl key '" + kv.key + "'");
      }
    } else if (section.name == "cost") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "c1") cfg.cost.c1 = parse_real(file, kv);
        else if (kv.key == "c2") cfg.cost.c2 = parse_real(file, kv);
        else file.fail(kv.line, "unknown cost key '" + kv.key + "'");
      }
    } else if (section.name == "filter") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "alpha1_gain")
          cfg.filter.alpha1_gain = parse_real(file, kv);
        else if (kv.key == "alpha2_gain")
          cfg.filter.alpha2_gain = parse_real(file, kv);
        else if (kv.key == "velocity_limit")
          cfg.filter.velocity_limit = parse_real(file, kv);
        else file.fail(kv.line, "unknown filter key '" + kv.key + "'");
      }
    } else if (section.name == "mpc") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "horizon")
          cfg.mpc.horizon = static_cast<int>(parse_integer(file, kv));
        else if (kv.key == "input_weight")
          cfg.mpc.input_weight = parse_real(file, kv);
        else if (kv.key == "terminal_weight")
          cfg.mpc.terminal_weight = parse_real(file, kv);
        else if (kv.key == "max_iters")
          cfg.mpc.max_iters = static_cast<int>(parse_integer(file, kv));
        else if (kv.key == "step_size")
          cfg.mpc.step_size = parse_real(file, kv);
        else file.fail(kv.line, "unknown mpc key '" + kv.key + "'");
      }
    } else if (section.name == "sim") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "dt") cfg.dt = parse_real(file, kv);
        else if (kv.key == "max_time") cfg.max_time = parse_real(file, kv);
        else if (kv.key == "goal_tolerance")
          cfg.goal_tolerance = parse_real(file, kv);
        else file.fail(kv.line, "unknown sim key '" + kv.key + "'");
      }
    } else {
      file.fail(section.line, "unknown section [" + section.name + "]");
    }
  }

  cfg.scenario = scenario_from_keyfile(file);
  cfg.mpc.dt = cfg.dt;  // one control interval drives both loops
  cfg.validate();
  return cfg;
}

}  // namespace safelink
