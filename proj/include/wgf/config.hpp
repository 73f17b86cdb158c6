#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wgf/chain_io.hpp"
#include "wgf/mcmc.hpp"

namespace wgf {

// Potential description as written in a config file. The math kinds resolve
// directly; "logistic" points at a dataset file loaded by the driver.
struct PotentialSpec {
    std::string kind = "zero";  // quadratic | mixture | logistic | sinusoid | zero
    Mat A;                      // quadratic: dim x dim SPD
    Vec b;                      // quadratic: minimum location
    std::vector<Vec> means;     // mixture: explicit component means
    std::size_t components = 0;  // mixture: draw this many means instead
    double side = 10.0;          // mixture: box half-width for drawn means
    std::string dataset;         // logistic: libsvm-format file
    std::size_t minibatch = 0;   // logistic: 0 = full batch
};

struct OuSettings {
    std::vector<double> eval_times;   // within (0, n_steps * h]
    bool baselines = false;           // also score EM + KDE on the same seed
    std::size_t em_particles = 1000;
};

struct BlrSettings {
    std::string dataset;             // libsvm-format file; required
    double split_ratio = 4.0;        // train:test
    std::size_t mc_samples = 4096;   // posterior draws for accuracy / log-lik
};

struct FilterSettings {
    double sigma = 1.0;              // observation noise std
    std::vector<double> obs_times;   // strictly increasing, all > 0
    Vec observations;  // one value per obs time; empty = simulate a latent path
    double t_final = 5.0;
    std::size_t substeps = 5;
    std::size_t train_pool = 4096;
    MhChainConfig mh;
    double grid_lo = -6.0;           // Chang-Cooper reference grid
    double grid_hi = 6.0;
    std::size_t grid_cells = 800;
};

// One experiment, fully pinned. Every field has a working default except
// `experiment` and `output`, which the file must set.
struct FlowConfig {
    std::string experiment;  // stationary | ou | blr | filter | custom
    std::size_t dim = 1;
    double inv_beta = 1.0;
    double h = 0.1;
    std::size_t n_steps = 10;
    std::size_t pool = 32768;
    std::size_t batch = 512;
    std::size_t iters = 500;
    std::vector<LrSpan> lr{{0, 5e-3}};
    std::vector<std::size_t> widths{64, 64};
    double alpha = 0.01;
    InitSpec init;  // gaussian; parse fills N(0, I) when absent
    std::uint64_t seed = 1;
    PotentialSpec potential;
    std::string output;  // run directory; relative paths land under WGF_OUTPUT_ROOT
    OuSettings ou;
    BlrSettings blr;
    FilterSettings filter;
};

// Parses and validates a config document. Unknown keys are rejected; every
// error names the offending location as a JSON pointer (e.g. "/lr/1/from").
FlowConfig parse_config(const std::string& text);
FlowConfig load_config_file(const std::string& path);

// Canonical re-serialization with all defaults materialized; two configs are
// the same run iff these agree. The fingerprint is fnv1a64 of the canonical
// form and is stamped into run manifests.
std::string config_canonical_json(const FlowConfig& c);
std::string config_fingerprint(const FlowConfig& c);

// The math potentials (quadratic / mixture / sinusoid / zero) plus "logistic",
// which loads and standardizes the whole dataset file. Drawn mixture means
// consume from rng. The blr driver does its own split and never calls this.
Potential resolve_potential(const PotentialSpec& spec, std::size_t dim,
                            double inv_beta, Rng& rng);

Gaussian resolve_init(const FlowConfig& c);
JkoRunConfig jko_config(const FlowConfig& c);

}  // namespace wgf
