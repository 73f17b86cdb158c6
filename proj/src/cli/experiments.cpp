#include "wgf/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "wgf/activations.hpp"
#include "wgf/baselines.hpp"
#include "wgf/dataset.hpp"
#include "wgf/errors.hpp"
#include "wgf/eval.hpp"
#include "wgf/kernels.hpp"
#include "wgf/mcmc.hpp"

namespace wgf {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";
// MC sizes are pinned so a config+seed fully determines metrics.json.
constexpr std::size_t kMetricSamples = 16384;
constexpr std::size_t kFilterMetricSamples = 4096;
constexpr std::size_t kSampleRows = 4096;
constexpr double kRefDt = 1e-4;  // Chang-Cooper reference integrator
constexpr double kEmDt = 1e-3;   // Euler-Maruyama baseline and latent paths

struct RunFiles {
    fs::path dir;
    std::vector<std::string> names;

    std::ofstream open(const std::string& name) {
        names.push_back(name);
        std::ofstream out(dir / name);
        if (!out) throw Error("run: cannot write " + (dir / name).string());
        return out;
    }
    void note(const std::string& name) { names.push_back(name); }
};

void write_samples_csv(RunFiles& files, const std::string& name, const Mat& x) {
    std::ofstream out = files.open(name);
    out.precision(17);
    for (std::size_t j = 0; j < x.cols; ++j)
        out << (j ? ",x" : "x") << j;
    out << '\n';
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j)
            out << (j ? "," : "") << x(i, j);
        out << '\n';
    }
}

// Accumulates per-step objective terms; one row per trained transport map.
struct EnergyTrace {
    std::ostringstream rows;

    EnergyTrace() {
        rows << "step,pretrain_iters,first_total,last_total,holdout_total,"
                "holdout_w2,holdout_potential,holdout_entropy_gain\n";
        rows.precision(17);
    }
    void add(std::size_t step, const StepStats& st) {
        rows << step << ',' << st.pretrain_iters << ',' << st.first.total << ','
             << st.last.total << ',' << st.holdout.total << ',' << st.holdout.w2
             << ',' << st.holdout.potential << ',' << st.holdout.entropy_gain
             << '\n';
    }
    void write(RunFiles& files) {
        std::ofstream out = files.open("energy_trace.csv");
        out << rows.str();
    }
};

json symkl_entry(const std::string& name, const SymklResult& r,
                 const MeasureView& p, const MeasureView& q) {
    return json{{"name", name},
                {"value", r.value},
                {"std_error", r.std_error},
                {"n_samples", r.n_samples},
                {"p", p.descriptor},
                {"q", q.descriptor},
                {"ratio_p01", r.ratio_p01},
                {"ratio_p99", r.ratio_p99}};
}

MeasureView mixture_view(const GaussianMixturePotential& p, std::size_t dim) {
    MeasureView v;
    v.sampler = [&p](Rng& rng, std::size_t n) { return mixture_sample_n(p, rng, n); };
    v.logdensity = [&p, dim](const double* x) {
        return mixture_logdensity(p, x, dim);
    };
    v.descriptor = "mixture";
    return v;
}

SamplerFn gaussian_sampler(const Gaussian& g) {
    return [&g](Rng& rng, std::size_t n) { return g.sample_n(rng, n); };
}

LogDensityFn gaussian_logdensity(const Gaussian& g) {
    return [&g](const double* x) { return g.logpdf(x); };
}

void log_step(std::ostream* log, std::size_t step, std::size_t total,
              const StepStats& st) {
    if (!log) return;
    *log << "step " << (step + 1) << "/" << total << "  holdout "
         << st.holdout.total << "  (w2 " << st.holdout.w2 << ", potential "
         << st.holdout.potential << ", entropy " << st.holdout.entropy_gain
         << ")\n";
}

// Shared tail: chain dir, terminal samples, trace, manifest skeleton.
void save_common(RunFiles& files, const FlowConfig& c, const JkoChain& chain,
                 const Gaussian& init, EnergyTrace& trace, Rng& rng) {
    save_chain(chain, (files.dir / "chain").string(), &c.init);
    files.note("chain/");
    Mat draws = init.sample_n(rng, kSampleRows);
    push_through(chain, chain.steps.size(), draws);
    write_samples_csv(files, "samples.csv", draws);
    trace.write(files);
}

json run_stationary(const FlowConfig& c, RunFiles& files, Rng& rng,
                    std::ostream* log) {
    const Potential phi = resolve_potential(c.potential, c.dim, c.inv_beta, rng);
    const Gaussian init = resolve_init(c);
    EnergyTrace trace;
    const JkoRunConfig rc = jko_config(c);
    const JkoChain chain =
        jko_run(gaussian_sampler(init), &phi, rc, rng,
                [&](std::size_t k, const StepStats& st) {
                    trace.add(k, st);
                    log_step(log, k, rc.n_steps, st);
                });

    const MeasureView flow =
        chain_view(chain, gaussian_sampler(init), gaussian_logdensity(init));
    MeasureView target;
    if (const auto* mix = std::get_if<GaussianMixturePotential>(&phi))
        target = mixture_view(*mix, c.dim);
    else
        target = gaussian_view(
            stationary_gaussian(std::get<QuadraticPotential>(phi), c.inv_beta));
    const SymklResult r = symkl_mc(flow, target, kMetricSamples, rng);
    if (log) *log << "symkl vs stationary: " << r.value << " +- " << r.std_error << '\n';

    save_common(files, c, chain, init, trace, rng);
    return json::array({symkl_entry("symkl", r, flow, target)});
}

json run_ou(const FlowConfig& c, RunFiles& files, Rng& rng, std::ostream* log) {
    const Potential phi = resolve_potential(c.potential, c.dim, c.inv_beta, rng);
    const auto& quad = std::get<QuadraticPotential>(phi);
    const Gaussian init = resolve_init(c);
    EnergyTrace trace;
    const JkoRunConfig rc = jko_config(c);
    const JkoChain chain =
        jko_run(gaussian_sampler(init), &phi, rc, rng,
                [&](std::size_t k, const StepStats& st) {
                    trace.add(k, st);
                    log_step(log, k, rc.n_steps, st);
                });

    json metrics = json::array();
    JkoChain prefix;
    prefix.h = chain.h;
    prefix.inv_beta = chain.inv_beta;
    for (const double t : c.ou.eval_times) {
        const auto upto = static_cast<std::size_t>(std::llround(t / c.h));
        while (prefix.steps.size() < upto)
            prefix.steps.push_back(chain.steps[prefix.steps.size()]);
        const Gaussian truth = ou_gaussian(quad, init, c.inv_beta, t);
        const MeasureView exact = gaussian_view(truth);
        {
            const MeasureView flow = chain_view(
                prefix, gaussian_sampler(init), gaussian_logdensity(init));
            const SymklResult r = symkl_mc(flow, exact, kMetricSamples, rng);
            json entry = symkl_entry("symkl", r, flow, exact);
            entry["time"] = t;
            metrics.push_back(std::move(entry));
            if (log)
                *log << "t=" << t << "  symkl " << r.value << " +- " << r.std_error
                     << '\n';
        }
        if (c.ou.baselines) {
            Mat particles = init.sample_n(rng, c.ou.em_particles);
            const auto steps = static_cast<std::size_t>(std::llround(t / kEmDt));
            particles = em_simulate(phi, std::move(particles), c.inv_beta, kEmDt,
                                    steps, rng);
            const MeasureView em = kde_view(kde_fit(std::move(particles)), "em_kde");
            const SymklResult r = symkl_mc(em, exact, kMetricSamples, rng);
            json entry = symkl_entry("symkl_em_kde", r, em, exact);
            entry["time"] = t;
            entry["em_particles"] = c.ou.em_particles;
            metrics.push_back(std::move(entry));
            if (log)
                *log << "t=" << t << "  em+kde symkl " << r.value << " +- "
                     << r.std_error << '\n';
        }
    }
    save_common(files, c, chain, init, trace, rng);
    return metrics;
}

// Gathers the given rows into a standalone dataset.
LabeledDataset take_rows(const LabeledDataset& ds,
                         const std::vector<std::size_t>& idx) {
    LabeledDataset out;
    out.features = Mat(idx.size(), ds.n_features());
    out.labels.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        kernels::copy(ds.features.row(idx[i]), out.features.row(i),
                      ds.n_features());
        out.labels.push_back(ds.labels[idx[i]]);
    }
    return out;
}

json run_blr(const FlowConfig& c, RunFiles& files, Rng& rng, std::ostream* log) {
    LabeledDataset full = parse_libsvm(c.blr.dataset);
    const std::size_t n = full.n();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i + 1 < n; ++i)
        std::swap(order[i], order[i + rng.uniform_index(n - i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(
        static_cast<double>(n) * c.blr.split_ratio / (c.blr.split_ratio + 1.0)));
    if (n_train == 0 || n_train == n)
        throw InvalidArgument("blr: split leaves an empty train or test set");
    const std::vector<std::size_t> train_idx(order.begin(),
                                             order.begin() + n_train);
    const std::vector<std::size_t> test_idx(order.begin() + n_train, order.end());

    // Test rows are scaled by train statistics only.
    apply_standardizer(fit_standardizer(full, train_idx), full);
    const auto train = std::make_shared<LabeledDataset>(take_rows(full, train_idx));
    const LabeledDataset test = take_rows(full, test_idx);
    const std::size_t dim = train->n_features() + 1;
    if (log)
        *log << "blr: " << train->n() << " train / " << test.n() << " test, dim "
             << dim << '\n';

    LogisticPosteriorPotential lp;
    lp.data = train;
    lp.minibatch = std::min(c.batch, train->n());
    lp.inv_beta = c.inv_beta;
    const Potential phi = lp;

    InitSpec ispec = c.init;
    if (ispec.mean.size() != dim) {
        // Config init was written for an unknown dim; broadcast its leading entry.
        const double m0 = ispec.mean.empty() ? 0.0 : ispec.mean.front();
        const double v0 = ispec.cov.rows ? ispec.cov(0, 0) : 1.0;
        ispec.mean = Vec(dim, m0);
        ispec.cov = Mat(dim, dim);
        for (std::size_t i = 0; i < dim; ++i) ispec.cov(i, i) = v0;
    }
    const Gaussian init = ispec.gaussian();

    EnergyTrace trace;
    JkoRunConfig rc = jko_config(c);
    const JkoChain chain =
        jko_run(gaussian_sampler(init), &phi, rc, rng,
                [&](std::size_t k, const StepStats& st) {
                    trace.add(k, st);
                    log_step(log, k, rc.n_steps, st);
                });

    // Posterior predictive over mc_samples parameter draws; lambda rides along
    // but only the weight block enters the margin.
    Mat draws = init.sample_n(rng, c.blr.mc_samples);
    push_through(chain, chain.steps.size(), draws);
    const std::size_t f = test.n_features();
    std::size_t correct = 0;
    double ll_sum = 0.0;
    for (std::size_t j = 0; j < test.n(); ++j) {
        const double* row = test.features.row(j);
        double p_plus = 0.0;
        for (std::size_t i = 0; i < draws.rows; ++i)
            p_plus += sigmoid(kernels::dot(draws.row(i), row, f));
        p_plus /= static_cast<double>(draws.rows);
        const int predicted = p_plus >= 0.5 ? 1 : -1;
        if (predicted == test.labels[j]) ++correct;
        const double p_label = test.labels[j] == 1 ? p_plus : 1.0 - p_plus;
        ll_sum += std::log(std::max(p_label, 1e-300));
    }
    const double accuracy =
        static_cast<double>(correct) / static_cast<double>(test.n());
    const double test_ll = ll_sum / static_cast<double>(test.n());
    if (log)
        *log << "blr: accuracy " << accuracy << ", test loglik " << test_ll << '\n';

    {
        // Save with the actually used init so sample/density reload works.
        save_chain(chain, (files.dir / "chain").string(), &ispec);
        files.note("chain/");
        write_samples_csv(files, "samples.csv", draws);
        trace.write(files);
    }
    return json::array(
        {json{{"name", "accuracy"},
              {"value", accuracy},
              {"n_samples", test.n()},
              {"mc_samples", c.blr.mc_samples}},
         json{{"name", "test_loglik"},
              {"value", test_ll},
              {"n_samples", test.n()},
              {"mc_samples", c.blr.mc_samples}}});
}

json run_filter(const FlowConfig& c, RunFiles& files, Rng& rng, std::ostream* log) {
    const FilterSettings& s = c.filter;
    const Potential phi = resolve_potential(c.potential, 1, c.inv_beta, rng);
    const Gaussian init = resolve_init(c);

    // Observations: configured values, or one simulated latent path.
    Vec latent(s.obs_times.size(),
               std::numeric_limits<double>::quiet_NaN());
    Vec observed = s.observations;
    if (observed.empty()) {
        Mat x(1, 1);
        init.sample(rng, x.data());
        double t_prev = 0.0;
        observed.resize(s.obs_times.size());
        for (std::size_t i = 0; i < s.obs_times.size(); ++i) {
            const auto steps = static_cast<std::size_t>(
                std::llround((s.obs_times[i] - t_prev) / kEmDt));
            x = em_simulate(phi, std::move(x), c.inv_beta, kEmDt, steps, rng);
            latent[i] = x(0, 0);
            observed[i] = latent[i] + s.sigma * rng.normal();
            t_prev = s.obs_times[i];
        }
    }
    {
        std::ofstream out = files.open("observations.csv");
        out.precision(17);
        out << "t,latent,observed\n";
        for (std::size_t i = 0; i < s.obs_times.size(); ++i) {
            out << s.obs_times[i] << ',';
            if (std::isfinite(latent[i])) out << latent[i];
            out << ',' << observed[i] << '\n';
        }
    }

    FilterConfig fc;
    fc.sigma = s.sigma;
    fc.obs_times = s.obs_times;
    fc.observations = Mat(observed.size(), 1);
    for (std::size_t i = 0; i < observed.size(); ++i)
        fc.observations(i, 0) = observed[i];
    fc.t_final = s.t_final;
    fc.substeps = s.substeps;
    fc.step = jko_config(c).step;
    fc.train_pool = s.train_pool;
    fc.mh = s.mh;

    EnergyTrace trace;
    const FilterState state = wgf::run_filter(
        phi, gaussian_sampler(init), gaussian_logdensity(init), fc, rng,
        [&](std::size_t interval, std::size_t substep, const StepStats& st) {
            trace.add(interval * fc.substeps + substep, st);
            if (log && substep + 1 == fc.substeps)
                *log << "interval " << (interval + 1) << " trained, holdout "
                     << st.holdout.total << '\n';
        });

    // Chang-Cooper reference on the configured grid: evolve between landmark
    // times, multiply in each observation likelihood.
    const Grid1D grid{s.grid_lo, s.grid_hi, s.grid_cells};
    Vec rho = grid_project([&](double x) { return std::exp(init.logpdf(&x)); }, grid);
    double t_prev = 0.0;
    for (std::size_t i = 0; i < s.obs_times.size(); ++i) {
        const auto steps = static_cast<std::size_t>(
            std::llround((s.obs_times[i] - t_prev) / kRefDt));
        chang_cooper_evolve(phi, c.inv_beta, grid, rho, kRefDt, steps);
        bayes_update_grid(rho, grid, observed[i], s.sigma);
        t_prev = s.obs_times[i];
    }
    if (s.t_final > t_prev) {
        const auto steps =
            static_cast<std::size_t>(std::llround((s.t_final - t_prev) / kRefDt));
        chang_cooper_evolve(phi, c.inv_beta, grid, rho, kRefDt, steps);
    }

    const MeasureView predicted = predictive_view(state, grid, s.mh);
    const MeasureView reference = grid_view(grid, rho, "chang_cooper");
    const SymklResult r = symkl_mc(predicted, reference, kFilterMetricSamples, rng);
    if (log) *log << "symkl vs reference: " << r.value << " +- " << r.std_error << '\n';

    {
        std::ofstream out = files.open("filter_density.csv");
        out.precision(17);
        out << "x,model_logdensity,reference_density\n";
        for (std::size_t j = 0; j < grid.cells; ++j) {
            const double x = grid.center(j);
            out << x << ',' << predicted.logdensity(&x) << ',' << rho[j] << '\n';
        }
    }
    const MhResult terminal = mh_sample(state, s.mh, rng);
    write_samples_csv(files, "samples.csv", terminal.terminal);
    trace.write(files);
    json intervals = json::array();
    for (std::size_t i = 0; i < state.intervals.size(); ++i) {
        const FilterInterval& iv = state.intervals[i];
        char name[32];
        std::snprintf(name, sizeof(name), "chain/interval_%02zu", i);
        save_chain(iv.chain, (files.dir / name).string(),
                   i == 0 ? &c.init : nullptr);
        files.note(std::string(name) + "/");
        intervals.push_back({{"t_begin", iv.t_begin},
                             {"t_end", iv.t_end},
                             {"observed", iv.observed},
                             {"y", iv.observed ? json(iv.y) : json()}});
    }
    {
        std::ofstream out = files.open("intervals.json");
        out << json{{"intervals", std::move(intervals)}}.dump(2) << '\n';
    }

    json entry = symkl_entry("symkl", r, predicted, reference);
    return json::array(
        {std::move(entry),
         json{{"name", "mh_acceptance_rate"}, {"value", terminal.acceptance_rate}}});
}

json run_custom(const FlowConfig& c, RunFiles& files, Rng& rng, std::ostream* log) {
    const Potential phi = resolve_potential(c.potential, c.dim, c.inv_beta, rng);
    const Gaussian init = resolve_init(c);
    EnergyTrace trace;
    const JkoRunConfig rc = jko_config(c);
    const JkoChain chain =
        jko_run(gaussian_sampler(init), &phi, rc, rng,
                [&](std::size_t k, const StepStats& st) {
                    trace.add(k, st);
                    log_step(log, k, rc.n_steps, st);
                });
    save_common(files, c, chain, init, trace, rng);
    return json::array();
}

}  // namespace

std::string resolve_output_dir(const std::string& output) {
    fs::path p(output);
    if (p.is_absolute()) return p.string();
    if (const char* root = std::getenv("WGF_OUTPUT_ROOT"))
        return (fs::path(root) / p).string();
    return p.string();
}

std::string run_experiment(const FlowConfig& c, std::ostream* log) {
    RunFiles files;
    files.dir = resolve_output_dir(c.output);
    fs::create_directories(files.dir);

    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(c.seed);
    json metrics;
    if (c.experiment == "stationary")
        metrics = run_stationary(c, files, rng, log);
    else if (c.experiment == "ou")
        metrics = run_ou(c, files, rng, log);
    else if (c.experiment == "blr")
        metrics = run_blr(c, files, rng, log);
    else if (c.experiment == "filter")
        metrics = run_filter(c, files, rng, log);
    else
        metrics = run_custom(c, files, rng, log);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    {
        std::ofstream out = files.open("metrics.json");
        out << json{{"seed", c.seed},
                    {"fingerprint", config_fingerprint(c)},
                    {"metrics", std::move(metrics)}}
                   .dump(2)
            << '\n';
    }
    {
        std::ofstream out = files.open("run.json");
        out << json{{"version", kVersion},
                    {"experiment", c.experiment},
                    {"seed", c.seed},
                    {"fingerprint", config_fingerprint(c)},
                    {"wall_time_sec", wall},
                    {"artifacts", files.names},
                    {"config", json::parse(config_canonical_json(c))}}
                   .dump(2)
            << '\n';
    }
    return files.dir.string();
}

}  // namespace wgf
