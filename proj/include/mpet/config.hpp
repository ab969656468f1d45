#pragma once

#include <iosfwd>
#include <string>

#include "mpet/experiments.hpp"

namespace mpet {

/// Settings of one CLI command, read from an INI file.
///
/// Only the section named after the command is read; every key is optional
/// and unknown sections or keys are rejected.
struct RunConfig {
  std::string command;  // convergence | sweep | orderrobust | brain | eigs
  SweepConfig sweep;
  OrderRobustConfig order_robust;
  ConvergenceConfig convergence;
  EigsConfig eigs;
  BrainOptions brain;
  bool brain_long = false;            // tau = 0.125 up to T = 2500 unless given
  int brain_output_every = 1;
  PreconditionerVariant brain_variant = PreconditionerVariant::SchurReduced;
  double brain_tol = 1e-8;
  int brain_maxit = 500;
  double window_half_width = 0.5;

  void validate() const;
  /// All resolved settings of the command as `section.key=value` pairs.
  std::string resolved() const;
};

bool is_command(const std::string& name);

RunConfig parse_config(const std::string& command, std::istream& in);
RunConfig load_config(const std::string& command, const std::string& path);

}  // namespace mpet
