#include "wgf/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "wgf/dataset.hpp"
#include "wgf/errors.hpp"

namespace wgf {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config " + (path.empty() ? std::string("/") : path) + ": " +
                      what);
}

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

// Rejecting unknown keys catches typos before they silently become defaults.
void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) fail(path + "/" + it.key(), "unknown key");
    }
}

const json* opt(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& req(const json& obj, const std::string& path, const char* key) {
    const json* j = opt(obj, key);
    if (!j) fail(path + "/" + key, "required key is missing");
    return *j;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

double as_positive(const json& j, const std::string& path) {
    const double v = as_number(j, path);
    if (!(v > 0.0)) fail(path, "must be positive");
    return v;
}

std::size_t as_count(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 1)
        fail(path, "expected a positive integer");
    return j.get<std::size_t>();
}

std::size_t as_size(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 0)
        fail(path, "expected a nonnegative integer");
    return j.get<std::size_t>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
}

Vec as_vec(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vec v;
    v.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v.push_back(as_number(j[i], path + "/" + std::to_string(i)));
    return v;
}

// Scalar broadcasts to a constant vector; an array must have exactly dim entries.
Vec as_broadcast_vec(const json& j, const std::string& path, std::size_t dim) {
    if (j.is_number()) return Vec(dim, j.get<double>());
    Vec v = as_vec(j, path);
    if (v.size() != dim)
        fail(path, "expected " + std::to_string(dim) + " entries, got " +
                       std::to_string(v.size()));
    return v;
}

// Scalar -> s*I, array -> diagonal, array of arrays -> full matrix.
Mat as_broadcast_mat(const json& j, const std::string& path, std::size_t dim) {
    Mat m(dim, dim);
    if (j.is_number()) {
        const double s = j.get<double>();
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = s;
        return m;
    }
    if (!j.is_array() || j.empty()) fail(path, "expected a number, array, or matrix");
    if (j[0].is_number()) {
        const Vec d = as_broadcast_vec(j, path, dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = d[i];
        return m;
    }
    if (j.size() != dim) fail(path, "expected " + std::to_string(dim) + " rows");
    for (std::size_t i = 0; i < dim; ++i) {
        const Vec row =
            as_broadcast_vec(j[i], path + "/" + std::to_string(i), dim);
        for (std::size_t k = 0; k < dim; ++k) m(i, k) = row[k];
    }
    return m;
}

std::vector<LrSpan> parse_lr(const json& j, const std::string& path,
                             std::size_t n_steps) {
    std::vector<LrSpan> out;
    if (j.is_number()) {
        out.push_back({0, as_positive(j, path)});
        return out;
    }
    if (!j.is_array() || j.empty())
        fail(path, "expected a rate or a list of {from, lr} spans");
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        expect_object(j[i], p);
        check_keys(j[i], p, {"from", "lr"});
        LrSpan span;
        span.from = as_size(req(j[i], p, "from"), p + "/from");
        span.lr = as_positive(req(j[i], p, "lr"), p + "/lr");
        if (i == 0 && span.from != 0) fail(p + "/from", "first span must start at 0");
        if (i > 0 && span.from <= out.back().from)
            fail(p + "/from", "spans must be strictly increasing");
        if (span.from >= n_steps)
            fail(p + "/from", "span starts past the last step");
        out.push_back(span);
    }
    return out;
}

InitSpec parse_init(const json* j, const std::string& path, std::size_t dim) {
    InitSpec spec;
    spec.kind = "gaussian";
    if (!j) {
        spec.mean = Vec(dim, 0.0);
        spec.cov = Mat::identity(dim);
        return spec;
    }
    expect_object(*j, path);
    check_keys(*j, path, {"kind", "mean", "cov"});
    if (const json* k = opt(*j, "kind")) {
        if (as_string(*k, path + "/kind") != "gaussian")
            fail(path + "/kind", "only 'gaussian' initial measures are supported");
    }
    spec.mean = opt(*j, "mean")
                    ? as_broadcast_vec(*opt(*j, "mean"), path + "/mean", dim)
                    : Vec(dim, 0.0);
    spec.cov = opt(*j, "cov") ? as_broadcast_mat(*opt(*j, "cov"), path + "/cov", dim)
                              : Mat::identity(dim);
    try {
        (void)Gaussian(spec.mean, spec.cov);
    } catch (const Error& e) {
        fail(path + "/cov", e.what());
    }
    return spec;
}

PotentialSpec parse_potential(const json* j, const std::string& path,
                              std::size_t dim) {
    PotentialSpec spec;
    if (!j) return spec;  // "zero"
    expect_object(*j, path);
    spec.kind = as_string(req(*j, path, "kind"), path + "/kind");
    if (spec.kind == "quadratic") {
        check_keys(*j, path, {"kind", "a", "b"});
        spec.A = opt(*j, "a") ? as_broadcast_mat(*opt(*j, "a"), path + "/a", dim)
                              : Mat::identity(dim);
        spec.b = opt(*j, "b") ? as_broadcast_vec(*opt(*j, "b"), path + "/b", dim)
                              : Vec(dim, 0.0);
        try {
            make_quadratic(spec.A, spec.b);
        } catch (const Error& e) {
            fail(path + "/a", e.what());
        }
    } else if (spec.kind == "mixture") {
        check_keys(*j, path, {"kind", "means", "components", "side"});
        if (const json* m = opt(*j, "means")) {
            if (!m->is_array() || m->empty())
                fail(path + "/means", "expected a nonempty array of points");
            for (std::size_t i = 0; i < m->size(); ++i)
                spec.means.push_back(as_broadcast_vec(
                    (*m)[i], path + "/means/" + std::to_string(i), dim));
        }
        if (const json* c = opt(*j, "components"))
            spec.components = as_count(*c, path + "/components");
        if (const json* s = opt(*j, "side"))
            spec.side = as_positive(*s, path + "/side");
        if (spec.means.empty() == (spec.components == 0))
            fail(path, "give exactly one of 'means' or 'components'");
    } else if (spec.kind == "logistic") {
        check_keys(*j, path, {"kind", "dataset", "minibatch"});
        spec.dataset = as_string(req(*j, path, "dataset"), path + "/dataset");
        if (spec.dataset.empty()) fail(path + "/dataset", "path is empty");
        if (const json* m = opt(*j, "minibatch"))
            spec.minibatch = as_size(*m, path + "/minibatch");
    } else if (spec.kind == "sinusoid") {
        check_keys(*j, path, {"kind"});
        if (dim != 1) fail(path + "/kind", "sinusoid potential is 1-D");
    } else if (spec.kind == "zero") {
        check_keys(*j, path, {"kind"});
    } else {
        fail(path + "/kind", "unknown potential kind '" + spec.kind + "'");
    }
    return spec;
}

OuSettings parse_ou(const json& j, const std::string& path, const FlowConfig& c) {
    OuSettings s;
    expect_object(j, path);
    check_keys(j, path, {"eval_times", "baselines", "em_particles"});
    const Vec times = as_vec(req(j, path, "eval_times"), path + "/eval_times");
    if (times.empty()) fail(path + "/eval_times", "expected at least one time");
    const double horizon = static_cast<double>(c.n_steps) * c.h;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const std::string p = path + "/eval_times/" + std::to_string(i);
        const double t = times[i];
        if (!(t > 0.0) || t > horizon + 1e-9)
            fail(p, "time outside (0, steps*h]");
        const double k = t / c.h;
        if (std::abs(k - std::round(k)) > 1e-9)
            fail(p, "time is not a multiple of h, so no step lands on it");
        if (i > 0 && t <= times[i - 1]) fail(p, "times must be increasing");
    }
    s.eval_times = times;
    if (const json* b = opt(j, "baselines"))
        s.baselines = as_bool(*b, path + "/baselines");
    if (const json* n = opt(j, "em_particles"))
        s.em_particles = as_count(*n, path + "/em_particles");
    return s;
}

BlrSettings parse_blr(const json& j, const std::string& path) {
    BlrSettings s;
    expect_object(j, path);
    check_keys(j, path, {"dataset", "split_ratio", "mc_samples"});
    s.dataset = as_string(req(j, path, "dataset"), path + "/dataset");
    if (s.dataset.empty()) fail(path + "/dataset", "path is empty");
    if (const json* r = opt(j, "split_ratio"))
        s.split_ratio = as_positive(*r, path + "/split_ratio");
    if (const json* m = opt(j, "mc_samples"))
        s.mc_samples = as_count(*m, path + "/mc_samples");
    return s;
}

FilterSettings parse_filter(const json& j, const std::string& path) {
    FilterSettings s;
    expect_object(j, path);
    check_keys(j, path,
               {"sigma", "obs_times", "observations", "t_final", "substeps",
                "train_pool", "chains", "burn_in", "thinning", "mc_samples",
                "grid_lo", "grid_hi", "grid_cells"});
    if (const json* v = opt(j, "sigma")) s.sigma = as_positive(*v, path + "/sigma");
    s.obs_times = as_vec(req(j, path, "obs_times"), path + "/obs_times");
    for (std::size_t i = 0; i < s.obs_times.size(); ++i) {
        const std::string p = path + "/obs_times/" + std::to_string(i);
        if (!(s.obs_times[i] > 0.0)) fail(p, "observation times must be positive");
        if (i > 0 && s.obs_times[i] <= s.obs_times[i - 1])
            fail(p, "observation times must be strictly increasing");
    }
    if (const json* v = opt(j, "observations")) {
        s.observations = as_vec(*v, path + "/observations");
        if (s.observations.size() != s.obs_times.size())
            fail(path + "/observations", "expected one value per observation time");
    }
    if (const json* v = opt(j, "t_final")) s.t_final = as_positive(*v, path + "/t_final");
    if (!s.obs_times.empty() && s.t_final < s.obs_times.back())
        fail(path + "/t_final", "ends before the last observation");
    if (const json* v = opt(j, "substeps")) s.substeps = as_count(*v, path + "/substeps");
    if (const json* v = opt(j, "train_pool"))
        s.train_pool = as_count(*v, path + "/train_pool");
    if (const json* v = opt(j, "chains")) s.mh.chains = as_count(*v, path + "/chains");
    if (const json* v = opt(j, "burn_in")) s.mh.burn_in = as_size(*v, path + "/burn_in");
    if (const json* v = opt(j, "thinning"))
        s.mh.thinning = as_count(*v, path + "/thinning");
    if (const json* v = opt(j, "mc_samples"))
        s.mh.samples_per_chain = as_count(*v, path + "/mc_samples");
    if (const json* v = opt(j, "grid_lo")) s.grid_lo = as_number(*v, path + "/grid_lo");
    if (const json* v = opt(j, "grid_hi")) s.grid_hi = as_number(*v, path + "/grid_hi");
    if (!(s.grid_hi > s.grid_lo)) fail(path + "/grid_hi", "grid_hi must exceed grid_lo");
    if (const json* v = opt(j, "grid_cells")) {
        s.grid_cells = as_count(*v, path + "/grid_cells");
        if (s.grid_cells < 2) fail(path + "/grid_cells", "need at least 2 cells");
    }
    return s;
}

}  // namespace

FlowConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    expect_object(root, "");
    check_keys(root, "",
               {"experiment", "dim", "inv_beta", "h", "steps", "pool", "batch",
                "iters", "lr", "widths", "width", "layers", "alpha", "init", "seed",
                "potential", "output", "ou", "blr", "filter"});

    FlowConfig c;
    c.experiment = as_string(req(root, "", "experiment"), "/experiment");
    const bool known = c.experiment == "stationary" || c.experiment == "ou" ||
                       c.experiment == "blr" || c.experiment == "filter" ||
                       c.experiment == "custom";
    if (!known)
        fail("/experiment",
             "expected stationary | ou | blr | filter | custom, got '" +
                 c.experiment + "'");
    c.output = as_string(req(root, "", "output"), "/output");
    if (c.output.empty()) fail("/output", "path is empty");

    if (const json* v = opt(root, "dim")) c.dim = as_count(*v, "/dim");
    if (const json* v = opt(root, "inv_beta"))
        c.inv_beta = as_positive(*v, "/inv_beta");
    if (const json* v = opt(root, "h")) c.h = as_positive(*v, "/h");
    if (const json* v = opt(root, "steps")) c.n_steps = as_count(*v, "/steps");
    if (const json* v = opt(root, "pool")) c.pool = as_count(*v, "/pool");
    if (const json* v = opt(root, "batch")) c.batch = as_count(*v, "/batch");
    if (c.batch > c.pool) fail("/batch", "batch exceeds the pool size");
    if (const json* v = opt(root, "iters")) c.iters = as_count(*v, "/iters");
    if (const json* v = opt(root, "lr")) c.lr = parse_lr(*v, "/lr", c.n_steps);
    if (const json* v = opt(root, "alpha")) c.alpha = as_positive(*v, "/alpha");
    if (const json* v = opt(root, "seed")) {
        if (!v->is_number_unsigned()) fail("/seed", "expected a nonnegative integer");
        c.seed = v->get<std::uint64_t>();
    }

    const json* widths = opt(root, "widths");
    const json* width = opt(root, "width");
    const json* layers = opt(root, "layers");
    if (widths && (width || layers))
        fail("/widths", "give either 'widths' or 'width'+'layers', not both");
    if (widths) {
        if (!widths->is_array() || widths->empty())
            fail("/widths", "expected a nonempty array");
        c.widths.clear();
        for (std::size_t i = 0; i < widths->size(); ++i)
            c.widths.push_back(
                as_count((*widths)[i], "/widths/" + std::to_string(i)));
    } else if (width || layers) {
        if (!width || !layers) fail("/width", "'width' and 'layers' come together");
        c.widths.assign(as_count(*layers, "/layers"), as_count(*width, "/width"));
    }

    c.init = parse_init(opt(root, "init"), "/init", c.dim);
    c.potential = parse_potential(opt(root, "potential"), "/potential", c.dim);

    for (const char* block : {"ou", "blr", "filter"})
        if (opt(root, block) && c.experiment != block)
            fail(std::string("/") + block,
                 "settings block for a different experiment");

    if (c.experiment == "stationary") {
        if (c.potential.kind != "quadratic" && c.potential.kind != "mixture")
            fail("/potential/kind",
                 "stationary experiment needs a quadratic or mixture potential");
    } else if (c.experiment == "ou") {
        if (c.potential.kind != "quadratic")
            fail("/potential/kind", "ou experiment needs a quadratic potential");
        c.ou = parse_ou(req(root, "", "ou"), "/ou", c);
    } else if (c.experiment == "blr") {
        if (opt(root, "potential"))
            fail("/potential", "blr builds its own posterior; drop this block");
        c.blr = parse_blr(req(root, "", "blr"), "/blr");
    } else if (c.experiment == "filter") {
        if (c.dim != 1)
            fail("/dim", "filter experiment is 1-D (grid reference)");
        if (c.potential.kind == "logistic")
            fail("/potential/kind", "filter experiment needs a math potential");
        c.filter = parse_filter(req(root, "", "filter"), "/filter");
    }
    return c;
}

FlowConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

static json mat_rows(const Mat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < m.cols; ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string config_canonical_json(const FlowConfig& c) {
    json root{{"experiment", c.experiment},
              {"dim", c.dim},
              {"inv_beta", c.inv_beta},
              {"h", c.h},
              {"steps", c.n_steps},
              {"pool", c.pool},
              {"batch", c.batch},
              {"iters", c.iters},
              {"alpha", c.alpha},
              {"seed", c.seed},
              {"widths", c.widths},
              {"output", c.output}};
    json lr = json::array();
    for (const auto& span : c.lr)
        lr.push_back({{"from", span.from}, {"lr", span.lr}});
    root["lr"] = std::move(lr);
    root["init"] = {{"kind", c.init.kind},
                    {"mean", c.init.mean},
                    {"cov", mat_rows(c.init.cov)}};
    json pot{{"kind", c.potential.kind}};
    if (c.potential.kind == "quadratic") {
        pot["a"] = mat_rows(c.potential.A);
        pot["b"] = c.potential.b;
    } else if (c.potential.kind == "mixture") {
        if (!c.potential.means.empty())
            pot["means"] = c.potential.means;
        else {
            pot["components"] = c.potential.components;
            pot["side"] = c.potential.side;
        }
    } else if (c.potential.kind == "logistic") {
        pot["dataset"] = c.potential.dataset;
        pot["minibatch"] = c.potential.minibatch;
    }
    root["potential"] = std::move(pot);
    if (c.experiment == "ou")
        root["ou"] = {{"eval_times", c.ou.eval_times},
                      {"baselines", c.ou.baselines},
                      {"em_particles", c.ou.em_particles}};
    if (c.experiment == "blr")
        root["blr"] = {{"dataset", c.blr.dataset},
                       {"split_ratio", c.blr.split_ratio},
                       {"mc_samples", c.blr.mc_samples}};
    if (c.experiment == "filter")
        root["filter"] = {{"sigma", c.filter.sigma},
                          {"obs_times", c.filter.obs_times},
                          {"observations", c.filter.observations},
                          {"t_final", c.filter.t_final},
                          {"substeps", c.filter.substeps},
                          {"train_pool", c.filter.train_pool},
                          {"chains", c.filter.mh.chains},
                          {"burn_in", c.filter.mh.burn_in},
                          {"thinning", c.filter.mh.thinning},
                          {"mc_samples", c.filter.mh.samples_per_chain},
                          {"grid_lo", c.filter.grid_lo},
                          {"grid_hi", c.filter.grid_hi},
                          {"grid_cells", c.filter.grid_cells}};
    return root.dump(2);
}

std::string config_fingerprint(const FlowConfig& c) {
    const std::string text = config_canonical_json(c);
    return fnv1a64_hex(reinterpret_cast<const unsigned char*>(text.data()),
                       text.size());
}

Potential resolve_potential(const PotentialSpec& spec, std::size_t dim,
                            double inv_beta, Rng& rng) {
    if (spec.kind == "quadratic") return make_quadratic(spec.A, spec.b);
    if (spec.kind == "mixture") {
        if (!spec.means.empty()) {
            GaussianMixturePotential p;
            p.means = spec.means;
            p.inv_beta = inv_beta;
            return p;
        }
        return random_mixture(dim, spec.components, spec.side, inv_beta, rng);
    }
    if (spec.kind == "logistic") {
        auto ds = std::make_shared<LabeledDataset>(parse_libsvm(spec.dataset));
        std::vector<std::size_t> all(ds->n());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        apply_standardizer(fit_standardizer(*ds, all), *ds);
        if (dim != ds->n_features() + 1)
            throw ConfigError("config /dim: logistic model needs dim " +
                              std::to_string(ds->n_features() + 1) + " for " +
                              spec.dataset);
        LogisticPosteriorPotential p;
        p.data = std::move(ds);
        p.minibatch = spec.minibatch;
        p.inv_beta = inv_beta;
        return p;
    }
    if (spec.kind == "sinusoid") return Sinusoid1DPotential{};
    return ZeroPotential{};
}

Gaussian resolve_init(const FlowConfig& c) { return c.init.gaussian(); }

JkoRunConfig jko_config(const FlowConfig& c) {
    JkoRunConfig rc;
    rc.n_steps = c.n_steps;
    rc.pool = c.pool;
    rc.step.widths = c.widths;
    rc.step.alpha = c.alpha;
    rc.step.h = c.h;
    rc.step.inv_beta = c.inv_beta;
    rc.step.iters = c.iters;
    rc.step.batch = c.batch;
    rc.step.lr = c.lr.front().lr;
    rc.lr_schedule = c.lr;
    return rc;
}

}  // namespace wgf
