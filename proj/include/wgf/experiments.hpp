#pragma once

#include <iosfwd>
#include <string>

#include "wgf/config.hpp"

namespace wgf {

// Where a run's files land: absolute outputs stay put, relative ones go under
// $WGF_OUTPUT_ROOT when that is set, else under the working directory.
std::string resolve_output_dir(const std::string& output);

// Runs the configured experiment end to end and writes every artifact under
// the resolved output directory:
//   run.json          config echo, fingerprint, seed, wall time, artifact list
//   metrics.json      metric entries; bit-identical across runs of one config
//   samples.csv       terminal draws, one row per sample, columns x0..x{D-1}
//   energy_trace.csv  per-step objective terms
//   chain/            the trained transport chain (chain/interval_k for filter)
// plus per-experiment extras (observations.csv, filter_density.csv,
// accuracy detail for blr). Progress lines go to *log when given.
// Returns the resolved run directory.
std::string run_experiment(const FlowConfig& c, std::ostream* log = nullptr);

}  // namespace wgf
