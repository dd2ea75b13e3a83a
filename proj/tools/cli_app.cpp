#include "cli_app.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>

#include "cspez/config.hpp"
#include "cspez/geometry.hpp"

namespace cspez::cli {

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> method;
    std::optional<double> epsilon;
    std::string model;
    std::string dataset;
    std::optional<std::size_t> n_configs;
    std::optional<std::size_t> n_samples;
    std::optional<std::size_t> mc_samples;
    std::vector<std::string> methods;
};

class IoError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << content;
    if (!f) throw IoError("failed writing " + path);
}

ScenarioConfig resolve_config(const Options& o) {
    ScenarioConfig c = o.config.empty() ? ScenarioConfig::defaults() : load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.workers) {
        if (*o.workers < 1) throw ConfigError("--workers must be at least 1");
        c.workers = *o.workers;
    }
    if (o.n_configs) c.compare_configs = *o.n_configs;
    if (o.n_samples) c.training_samples = *o.n_samples;
    if (o.epsilon) {
        c.plan.epsilon = *o.epsilon;
        try {
            c.plan.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (!o.dataset.empty()) c.dataset_path = o.dataset;
    if (!o.model.empty()) c.model_path = o.model;
    return c;
}

Method parse_method(const std::string& name) {
    try {
        return method_from_string(name);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::optional<MlpModel> load_model(const ScenarioConfig& c, bool required) {
    if (!c.model_path) {
        if (required) throw ConfigError("the nn method needs a surrogate model (--model or \"model\" in the config)");
        return std::nullopt;
    }
    try {
        return MlpModel::load(*c.model_path);
    } catch (const ModelError& e) {
        throw ConfigError(e.what());
    }
}

std::string require_out(const Options& o) {
    if (o.out.empty()) throw ConfigError("--out is required");
    return o.out;
}

int status_exit(SolverStatus s) {
    switch (s) {
        case SolverStatus::Success:
            return kOk;
        case SolverStatus::Infeasible:
            return kInfeasible;
        default:
            return kNumericalFailure;
    }
}

int cmd_grid(const Options& o, std::ostream& log) {
    const ScenarioConfig c = resolve_config(o);
    const std::string out = require_out(o);
    const PursuerParams p = PursuerParams::from_vector(c.belief.mean);
    validate(p);
    std::ostringstream os;
    os << "x,y,z\n";
    for (int j = 0; j < c.grid.ny; ++j) {
        for (int i = 0; i < c.grid.nx; ++i) {
            const EvaderState e{{c.grid.x(i), c.grid.y(j)}, c.evader_heading, c.evader_speed};
            os << format_double(e.position.x) << ',' << format_double(e.position.y) << ',' << format_double(ez_value(e, p))
               << '\n';
        }
    }
    write_file(out, os.str());
    log << "wrote " << c.grid.nx * c.grid.ny << " cells to " << out << '\n';
    return kOk;
}

int cmd_eval(const Options& o, std::ostream& log) {
    ScenarioConfig c = resolve_config(o);
    if (o.mc_samples) c.mc_eval = *o.mc_samples;
    const std::string out = require_out(o);
    const Method m = parse_method(o.method.value_or("linear"));
    const auto model = load_model(c, m == Method::Neural);
    std::vector<Method> methods;
    if (m != Method::MonteCarlo) methods.push_back(m);
    const LevelSetGrid g = level_set_grid(c.belief, c.evader_heading, c.evader_speed, c.grid, methods, c.mc_eval,
                                          stream_seed(c.seed, Stream::GridMonteCarlo), model ? &*model : nullptr, c.workers);
    std::ostringstream os;
    write_grid_csv(os, g);
    write_file(out, os.str());
    log << "wrote level-set grid to " << out << '\n';
    return kOk;
}

int cmd_compare(const Options& o, std::ostream& log, bool bins) {
    ScenarioConfig c = resolve_config(o);
    if (o.mc_samples) c.mc_eval = *o.mc_samples;
    const std::string out = require_out(o);
    const auto model = load_model(c, false);
    const ErrorReport r = run_compare(c, model ? &*model : nullptr);
    std::ostringstream os;
    if (bins) {
        std::map<Method, std::vector<double>> errors;
        for (const auto& [m, est] : r.estimates) errors[m] = r.abs_errors(m);
        const TraceBinReport tb = trace_binned_errors(r.traces, errors, c.trace_bins);
        write_trace_bins_csv(os, tb);
        for (const auto& [m, rho] : tb.spearman_bins) log << to_string(m) << " spearman(bins) " << rho << '\n';
    } else {
        write_metrics_csv(os, r.metrics);
        for (const auto& m : r.metrics) log << to_string(m.method) << " mse " << m.mse << " aae " << m.aae << '\n';
    }
    write_file(out, os.str());
    return kOk;
}

int cmd_label(const Options& o, std::ostream& log) {
    ScenarioConfig c = resolve_config(o);
    if (o.mc_samples) c.mc_label = *o.mc_samples;
    const std::string out = require_out(o);
    const TrainingSet ts = label_dataset(c);
    save_training_set(ts, out);
    log << "wrote " << ts.size() << " labelled configurations to " << out << '\n';
    return kOk;
}

int cmd_train(const Options& o, std::ostream& log) {
    ScenarioConfig c = resolve_config(o);
    if (o.mc_samples) c.mc_label = *o.mc_samples;
    const std::string out = require_out(o);
    TrainingSet ts;
    if (c.dataset_path) {
        try {
            ts = load_training_set(*c.dataset_path);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("cannot load dataset: ") + e.what());
        }
    } else {
        ts = label_dataset(c);
    }
    TrainReport r = train(ts, training_hyper(c));
    r.model.set_ranges(c.ranges);
    r.model.save(out);
    log << "validation mse " << r.validation_mse << " after " << r.epochs_run << " epochs (best " << r.best_epoch << ")\n";
    return kOk;
}

int cmd_plan(const Options& o, std::ostream& log) {
    ScenarioConfig c = resolve_config(o);
    if (o.mc_samples) c.mc_validate = *o.mc_samples;
    const std::string out = require_out(o);
    if (o.method) c.plan.method = parse_method(*o.method);
    if (c.plan.method == Method::MonteCarlo) throw ConfigError("the planner needs a differentiable method (linear|quadratic|nn)");
    const auto model = load_model(c, c.plan.method == Method::Neural);
    const MlpModel* mp = model ? &*model : nullptr;
    const PlanResult r = plan(c.plan, mp);
    const ValidationReport v = validate(r.trajectory, c.plan, c.mc_validate, stream_seed(c.seed, Stream::PlanValidation), 4, mp);
    const nlohmann::json j = {{"problem", problem_to_json(c.plan)}, {"result", result_to_json(r)}, {"validation", validation_to_json(v)}};
    write_file(out, j.dump(2) + "\n");
    log << "status " << to_string(r.status) << " tf " << r.tf << " max mc cspez " << v.max_mc_cspez << '\n';
    return status_exit(r.status);
}

int cmd_table2(const Options& o, std::ostream& log) {
    ScenarioConfig c = resolve_config(o);
    if (o.mc_samples) c.mc_validate = *o.mc_samples;
    const std::string out = require_out(o);
    std::vector<Method> methods;
    for (const auto& name : o.methods) methods.push_back(parse_method(name));
    for (Method m : methods) {
        if (m == Method::MonteCarlo) throw ConfigError("table2: mc is not a planning method");
    }
    bool need_model = false;
    for (Method m : methods) need_model |= m == Method::Neural;
    const auto model = load_model(c, need_model);
    const MlpModel* mp = model ? &*model : nullptr;

    std::ostringstream os;
    os << "method,epsilon,tf,max_mccspez,opt_time,status\n";
    int worst = kOk;
    for (Method m : methods) {
        for (double eps : c.thresholds) {
            PlanProblem p = c.plan;
            p.method = m;
            p.epsilon = eps;
            const PlanResult r = plan(p, mp);
            const ValidationReport v = validate(r.trajectory, p, c.mc_validate, stream_seed(c.seed, Stream::PlanValidation), 4, mp);
            os << to_string(m) << ',' << format_double(eps) << ',' << format_double(r.tf) << ',' << format_double(v.max_mc_cspez)
               << ',' << format_double(r.wall_time_s) << ',' << to_string(r.status) << '\n';
            log << to_string(m) << " eps " << eps << " tf " << r.tf << " max mc " << v.max_mc_cspez << " " << to_string(r.status)
                << '\n';
            worst = std::max(worst, status_exit(r.status));
        }
    }
    write_file(out, os.str());
    return worst;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Curve-straight probabilistic engagement zones and chance-constrained planning"};
    app.require_subcommand(1);
    Options o;
    o.methods = {"linear", "quadratic", "nn"};

    auto common = [&](CLI::App* s) {
        s->add_option("--config", o.config, "Scenario config (JSON)")->check(CLI::ExistingFile);
        s->add_option("--out", o.out, "Output file");
        s->add_option("--seed", o.seed, "Root seed");
        s->add_option("--workers", o.workers, "Worker threads");
    };
    auto* grid = app.add_subcommand("csbez-grid", "Deterministic engagement-zone function over the evader grid");
    common(grid);
    auto* eval = app.add_subcommand("cspez-eval", "Probability field over the evader grid for one method");
    common(eval);
    eval->add_option("--method", o.method, "linear|quadratic|nn|mc");
    eval->add_option("--model", o.model, "Surrogate model file");
    eval->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per cell");
    auto* compare = app.add_subcommand("compare", "Error metrics of each estimator on a held-out design");
    auto* bins = app.add_subcommand("trace-bins", "Median errors binned by covariance trace");
    for (auto* s : {compare, bins}) {
        common(s);
        s->add_option("--model", o.model, "Surrogate model file");
        s->add_option("--n-configs", o.n_configs, "Number of configurations");
        s->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per configuration");
    }
    auto* label = app.add_subcommand("label", "Monte Carlo labelled training set");
    common(label);
    label->add_option("--n-samples", o.n_samples, "Number of configurations");
    label->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per configuration");
    auto* trn = app.add_subcommand("train", "Train the surrogate network");
    common(trn);
    trn->add_option("--dataset", o.dataset, "Labelled training set (labelled in-process when absent)");
    trn->add_option("--n-samples", o.n_samples, "Number of configurations when labelling in-process");
    trn->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per configuration when labelling in-process");
    auto* pln = app.add_subcommand("plan", "Chance-constrained trajectory");
    common(pln);
    pln->add_option("--method", o.method, "linear|quadratic|nn");
    pln->add_option("--epsilon", o.epsilon, "Probability threshold");
    pln->add_option("--model", o.model, "Surrogate model file");
    pln->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples for validation");
    auto* t2 = app.add_subcommand("table2", "Planner over every method and threshold");
    common(t2);
    t2->add_option("--model", o.model, "Surrogate model file");
    t2->add_option("--methods", o.methods, "Planning methods")->delimiter(',');
    t2->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples for validation");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kConfigError;
    }

    try {
        if (*grid) return cmd_grid(o, out);
        if (*eval) return cmd_eval(o, out);
        if (*compare) return cmd_compare(o, out, false);
        if (*bins) return cmd_compare(o, out, true);
        if (*label) return cmd_label(o, out);
        if (*trn) return cmd_train(o, out);
        if (*pln) return cmd_plan(o, out);
        if (*t2) return cmd_table2(o, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const RangeConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    }
    return kConfigError;
}

}  // namespace cspez::cli
