#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "spgnm/environments.hpp"
#include "spgnm/error.hpp"
#include "spgnm/harness.hpp"
#include "spgnm/mdp_io.hpp"

namespace spgnm::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::optional<std::string> env;
    std::optional<std::string> opt;
    std::vector<std::string> opts;
    std::vector<double> lambdas;
    std::optional<std::string> config;

    std::optional<double> eta, lambda, beta, beta1, beta2, epsilon;
    std::optional<std::string> overflow;
    std::optional<double> gamma;
    std::optional<long> iters;
    std::optional<std::string> init;
    std::optional<long> record_every;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> gradient;
    std::optional<std::size_t> batch, horizon;
    bool baseline = false;
    bool timing = false;

    std::optional<std::string> out;
    std::string format = "csv";
    double threshold = 0.99;
    std::optional<std::string> export_path;
};

void add_experiment_flags(CLI::App& cmd, Flags& f) {
    cmd.add_option("--env", f.env, "built-in environment or MDP file");
    cmd.add_option("--config", f.config, "experiment config file; flags override its fields");
    cmd.add_option("--eta", f.eta, "step size");
    cmd.add_option("--lambda", f.lambda, "spg-nm scaling factor");
    cmd.add_option("--beta", f.beta, "pg-hb momentum");
    cmd.add_option("--beta1", f.beta1, "pg-adam first moment decay");
    cmd.add_option("--beta2", f.beta2, "pg-adam second moment decay");
    cmd.add_option("--epsilon", f.epsilon, "pg-adam denominator offset");
    cmd.add_option("--overflow", f.overflow, "spg-nm non-finite candidate handling")
        ->check(CLI::IsMember({"reject", "fail"}));
    cmd.add_option("--gamma", f.gamma, "discount override");
    cmd.add_option("--iters", f.iters, "iterations T");
    cmd.add_option("--init", f.init, "initial logits")->check(CLI::IsMember({"uniform", "hard"}));
    cmd.add_option("--record-every", f.record_every, "record stride");
    cmd.add_option("--seed", f.seed, "seed for sampled gradients");
    cmd.add_option("--gradient", f.gradient, "gradient mode")->check(CLI::IsMember({"exact", "sampled"}));
    cmd.add_option("--batch", f.batch, "trajectories per sampled gradient");
    cmd.add_option("--horizon", f.horizon, "steps per trajectory");
    cmd.add_flag("--baseline", f.baseline, "subtract V(s) in sampled gradients");
    cmd.add_flag("--timing", f.timing, "record wall time");
}

void add_output_flags(CLI::App& cmd, Flags& f, const std::string& out_help) {
    cmd.add_option("--out", f.out, out_help);
    cmd.add_option("--format", f.format, "trace format")->check(CLI::IsMember({"csv", "json"}));
}

void check_optimizer(const std::string& name) {
    if (is_optimizer_name(name)) return;
    std::string valid;
    for (const auto& n : optimizer_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError(fmt::format("unknown optimizer '{}'; valid identifiers: {}", name, valid));
}

std::vector<std::string> optimizer_list(const std::vector<std::string>& opts) {
    if (opts.empty()) throw UsageError("--opts needs at least one optimizer");
    std::set<std::string> seen;
    for (const auto& o : opts) {
        check_optimizer(o);
        if (!seen.insert(o).second) throw UsageError(fmt::format("optimizer '{}' listed twice", o));
    }
    return opts;
}

ExperimentConfig experiment(const Flags& f) {
    ExperimentConfig c = f.config ? load_config(*f.config) : ExperimentConfig{};
    if (f.env) c.environment = *f.env;
    if (c.environment.empty()) throw UsageError("--env is required");
    if (f.opt) c.optimizer = *f.opt;
    if (f.eta) c.hyper.eta = f.eta;
    if (f.lambda) c.hyper.lambda = f.lambda;
    if (f.beta) c.hyper.beta = f.beta;
    if (f.beta1) c.hyper.beta1 = f.beta1;
    if (f.beta2) c.hyper.beta2 = f.beta2;
    if (f.epsilon) c.hyper.epsilon = f.epsilon;
    if (f.overflow) c.hyper.overflow = overflow_policy_from_string(*f.overflow);
    if (f.gamma) c.gamma = f.gamma;
    if (f.iters) c.iterations = f.iters;
    if (f.init) c.init = InitSpec{*f.init == "hard" ? InitKind::hard : InitKind::uniform, std::nullopt};
    if (f.record_every) c.record_every = *f.record_every;
    if (f.seed) c.seed = *f.seed;
    if (f.gradient) c.gradient.sampled = *f.gradient == "sampled";
    if (f.batch) c.gradient.batch = *f.batch;
    if (f.horizon) c.gradient.horizon = *f.horizon;
    if (f.baseline) c.gradient.baseline = true;
    if (f.timing) c.record_wall_time = true;
    return c;
}

TraceFormat trace_format(const Flags& f) { return f.format == "json" ? TraceFormat::json : TraceFormat::csv; }

std::string optional_cell(const std::optional<double>& x) { return x ? fmt::format("{:.17g}", *x) : ""; }

struct Summary {
    std::string label;
    double final_objective = 0.0;
    std::optional<double> final_gap;
    std::optional<long> iterations_to_threshold;
    bool failed = false;
};

/// Attaches gaps and summarises; V* is computed once per MDP.
Summary summarise(RunTrace& trace, const TabularMdp& mdp, std::string label, std::optional<double> threshold) {
    Summary s;
    s.label = std::move(label);
    s.failed = trace.failed;
    if (trace.records.empty()) return s;
    s.final_objective = trace.records.back().reported();
    const GapSeries gaps = gap_series(trace, mdp);
    for (std::size_t i = 0; i < trace.records.size(); ++i) trace.records[i].gap = gaps.gaps[i];
    s.final_gap = gaps.gaps.back();
    if (threshold) s.iterations_to_threshold = iterations_to_threshold(trace, *threshold * gaps.optimum);
    return s;
}

std::string summary_table(const std::string& key, const std::vector<Summary>& rows) {
    std::string out = fmt::format("{},final_objective,final_gap,iterations_to_threshold,status\n", key);
    for (const auto& r : rows)
        out += fmt::format("{},{:.17g},{},{},{}\n", r.label, r.final_objective, optional_cell(r.final_gap),
                           r.iterations_to_threshold ? std::to_string(*r.iterations_to_threshold) : "",
                           r.failed ? "failed" : "ok");
    return out;
}

std::string extension(const Flags& f) { return f.format == "json" ? ".json" : ".csv"; }

int finish(const std::vector<RunTrace>& traces, std::ostream& err) {
    int status = kOk;
    for (const auto& t : traces)
        if (t.failed) {
            err << fmt::format("{} failed: {}\n", t.config.optimizer, t.failure);
            status = kFailure;
        }
    return status;
}

int cmd_run(const Flags& f, std::ostream& out, std::ostream& err) {
    if (f.opt) check_optimizer(*f.opt);
    const ResolvedProblem problem = resolve(experiment(f));
    RunTrace trace = run(problem);
    const Summary s = summarise(trace, problem.mdp, problem.config.optimizer, std::nullopt);
    if (f.out) serialize_trace(trace, trace_format(f), *f.out);
    const auto last_t = trace.records.empty() ? 0L : trace.records.back().t;
    out << fmt::format("{} on {}: t={} objective={:.10g}{}{}\n", s.label, problem.config.environment, last_t,
                       s.final_objective, s.final_gap ? fmt::format(" gap={:.6g}", *s.final_gap) : "",
                       trace.failed ? " (failed)" : "");
    return finish({trace}, err);
}

/// Runs the configs, writes one file per trace plus summary.csv under --out.
int fan_out(const Flags& f, std::vector<ExperimentConfig> configs, const std::vector<std::string>& labels,
            const std::string& key, std::ostream& out, std::ostream& err) {
    const int workers = workers_from_env();
    const TabularMdp mdp = resolve(configs.front()).mdp;
    std::vector<RunTrace> traces = compare(configs, workers);

    std::vector<Summary> rows;
    for (std::size_t i = 0; i < traces.size(); ++i) rows.push_back(summarise(traces[i], mdp, labels[i], f.threshold));
    const std::string table = summary_table(key, rows);
    if (f.out) {
        const fs::path dir(*f.out);
        fs::create_directories(dir);
        for (std::size_t i = 0; i < traces.size(); ++i)
            serialize_trace(traces[i], trace_format(f), dir / (labels[i] + extension(f)));
        write_file_atomic(dir / "summary.csv", table);
    }
    out << table;
    return finish(traces, err);
}

int cmd_compare(const Flags& f, std::ostream& out, std::ostream& err) {
    const auto opts = optimizer_list(f.opts);
    const ExperimentConfig base = experiment(f);
    std::vector<ExperimentConfig> configs;
    for (const auto& o : opts) {
        ExperimentConfig c = base;
        c.optimizer = o;
        configs.push_back(std::move(c));
    }
    return fan_out(f, std::move(configs), opts, "optimizer", out, err);
}

int cmd_sweep(const Flags& f, std::ostream& out, std::ostream& err) {
    if (f.lambdas.empty()) throw UsageError("--lambdas needs at least one value");
    ExperimentConfig base = experiment(f);
    base.optimizer = "spg-nm";
    std::vector<ExperimentConfig> configs;
    std::vector<std::string> labels;
    for (double lam : f.lambdas) {
        if (!(lam > 0.0)) throw UsageError(fmt::format("lambda must be positive, got {}", lam));
        ExperimentConfig c = base;
        c.hyper.lambda = lam;
        configs.push_back(std::move(c));
        labels.push_back(fmt::format("lambda_{:g}", lam));
    }
    if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
        throw UsageError("--lambdas lists a value twice");
    return fan_out(f, std::move(configs), labels, "run", out, err);
}

int cmd_gap(const Flags& f, std::ostream& out, std::ostream& err) {
    const auto opts = optimizer_list(f.opts);
    const ExperimentConfig base = experiment(f);
    std::vector<ExperimentConfig> configs;
    for (const auto& o : opts) {
        ExperimentConfig c = base;
        c.optimizer = o;
        configs.push_back(std::move(c));
    }
    const TabularMdp mdp = resolve(configs.front()).mdp;
    const std::vector<RunTrace> traces = compare(configs, workers_from_env());

    std::vector<GapSeries> gaps;
    std::size_t longest = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        gaps.push_back(gap_series(traces[i], mdp));
        if (traces[i].records.size() > traces[longest].records.size()) longest = i;
    }
    std::string csv = "t";
    for (const auto& o : opts) csv += ",gap_" + o;
    csv += "\n";
    for (std::size_t r = 0; r < traces[longest].records.size(); ++r) {
        csv += std::to_string(traces[longest].records[r].t);
        for (const auto& g : gaps) csv += "," + (r < g.gaps.size() ? fmt::format("{:.17g}", g.gaps[r]) : "");
        csv += "\n";
    }
    if (f.out) {
        write_file_atomic(*f.out, csv);
        for (std::size_t i = 0; i < opts.size(); ++i)
            out << fmt::format("{}: final gap {:.6g}\n", opts[i], gaps[i].gaps.empty() ? 0.0 : gaps[i].gaps.back());
    } else {
        out << csv;
    }
    return finish(traces, err);
}

int cmd_validate(const Flags& f, std::ostream& out) {
    if (!f.env) throw UsageError("--env is required");
    if (f.export_path) {
        if (!is_builtin(*f.env)) throw UsageError("--export needs a built-in environment name");
        auto mdp = builtin_environment(*f.env).mdp;
        if (f.gamma) mdp = mdp.with_discount(*f.gamma);
        save_mdp(mdp, *f.export_path);
        out << fmt::format("wrote {} to {}\n", *f.env, *f.export_path);
        return kOk;
    }
    TabularMdp mdp = [&] {
        if (is_builtin(*f.env)) return builtin_environment(*f.env).mdp;
        try {
            return read_mdp_unchecked(*f.env);
        } catch (const std::exception& e) {
            throw std::runtime_error(fmt::format("cannot read '{}': {}", *f.env, e.what()));
        }
    }();
    const ValidationReport report = validate(mdp);
    if (report.ok()) {
        out << fmt::format("{}: valid ({} states, {} actions, gamma {})\n", *f.env, mdp.n_states(), mdp.n_actions(),
                           mdp.discount());
        return kOk;
    }
    out << fmt::format("{}: invalid\n{}", *f.env, report.to_string());
    return kFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tabular softmax policy-gradient experiments."};
    app.name("spgnm");
    app.require_subcommand(1);
    Flags f;

    auto* run_cmd = app.add_subcommand("run", "run one optimizer and write its trace");
    add_experiment_flags(*run_cmd, f);
    run_cmd->add_option("--opt", f.opt, "optimizer: pg, pg-hb, apg, pg-adam, spg-nm");
    add_output_flags(*run_cmd, f, "trace file");

    auto* compare_cmd = app.add_subcommand("compare", "run several optimizers on one environment");
    add_experiment_flags(*compare_cmd, f);
    compare_cmd->add_option("--opts", f.opts, "comma-separated optimizers")->delimiter(',');
    compare_cmd->add_option("--threshold", f.threshold, "fraction of V*(rho) for iterations-to-threshold");
    add_output_flags(*compare_cmd, f, "output directory");

    auto* sweep_cmd = app.add_subcommand("sweep", "spg-nm once per lambda");
    add_experiment_flags(*sweep_cmd, f);
    sweep_cmd->add_option("--lambdas", f.lambdas, "comma-separated lambda values")->delimiter(',');
    sweep_cmd->add_option("--threshold", f.threshold, "fraction of V*(rho) for iterations-to-threshold");
    add_output_flags(*sweep_cmd, f, "output directory");

    auto* gap_cmd = app.add_subcommand("gap", "sub-optimality gap columns for several optimizers");
    add_experiment_flags(*gap_cmd, f);
    gap_cmd->add_option("--opts", f.opts, "comma-separated optimizers")->delimiter(',');
    gap_cmd->add_option("--out", f.out, "gap CSV (stdout if omitted)");

    auto* validate_cmd = app.add_subcommand("validate", "check an MDP file");
    validate_cmd->add_option("--env", f.env, "MDP file or built-in name");
    validate_cmd->add_option("--export", f.export_path, "write the built-in environment to this file instead");
    validate_cmd->add_option("--gamma", f.gamma, "discount for --export");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto parsed = app.get_subcommands();
        out << (parsed.empty() ? app.help("", CLI::AppFormatMode::All) : parsed.front()->help());
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << "run 'spgnm --help' for usage\n";
        return kUsage;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(f, out, err);
        if (compare_cmd->parsed()) return cmd_compare(f, out, err);
        if (sweep_cmd->parsed()) return cmd_sweep(f, out, err);
        if (gap_cmd->parsed()) return cmd_gap(f, out, err);
        return cmd_validate(f, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace spgnm::cli
