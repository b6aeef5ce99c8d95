#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spgnm/mdp.hpp"
#include "spgnm/optimizers.hpp"

namespace spgnm {

enum class InitKind { uniform, hard, explicit_logits };

struct InitSpec {
    InitKind kind = InitKind::uniform;
    /// Only for explicit_logits.
    std::optional<Table> logits;

    friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

struct GradientMode {
    bool sampled = false;
    std::size_t batch = 1000;
    std::size_t horizon = 100;
    bool baseline = false;

    friend bool operator==(const GradientMode&, const GradientMode&) = default;
};

/// Everything needed to reproduce one optimisation run.
struct ExperimentConfig {
    /// Built-in name or path to an MDP file.
    std::string environment;
    /// Unset: the built-in's own initialisation, uniform for files.
    std::optional<InitSpec> init;
    std::string optimizer = "pg";
    Hyper hyper;
    /// Unset: 500 for single-state problems, 5000 otherwise.
    std::optional<long> iterations;
    std::optional<double> gamma;
    long record_every = 1;
    /// Only used by the sampled gradient.
    std::uint64_t seed = 0;
    GradientMode gradient;
    /// Off by default so traces stay byte-identical across runs.
    bool record_wall_time = false;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline constexpr long kDefaultBanditIterations = 500;
inline constexpr long kDefaultMdpIterations = 5000;
inline constexpr double kGapTolerance = 1e-10;

/// Problem and starting point a config refers to.
struct ResolvedProblem {
    TabularMdp mdp;
    PolicyParams initial;
    ExperimentConfig config;  ///< every optional filled in
};

/// Loads the environment, applies the discount override and picks the
/// initial logits; throws InvalidInput for anything inconsistent.
ResolvedProblem resolve(const ExperimentConfig& config);

struct TraceRecord {
    long t = 0;
    /// V(rho) of the theta iterate.
    double objective = 0.0;
    /// SPG-NM only: V(rho) of omega.
    std::optional<double> omega_objective;
    /// Per-state values of the theta iterate.
    numvec values;
    std::optional<double> gap;
    std::optional<double> wall_ms;

    /// The curve a method reports: omega for SPG-NM, theta otherwise.
    double reported() const noexcept { return omega_objective.value_or(objective); }

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct RunTrace {
    ExperimentConfig config;
    std::vector<TraceRecord> records;
    /// The reported iterate after the last completed step.
    PolicyParams final_params;
    bool failed = false;
    std::string failure;
    /// SPG-NM acceptance counters.
    std::optional<long> accepted;
    std::optional<long> overflow_rejections;

    friend bool operator==(const RunTrace&, const RunTrace&) = default;
};

struct GapSeries {
    double optimum = 0.0;  ///< V*(rho)
    numvec gaps;
};

/// Runs T iterations; a NumericalFailure keeps the partial trace with failed = true.
RunTrace run(const ExperimentConfig& config);
RunTrace run(const ResolvedProblem& problem);

/// V*(rho) - reported objective per record, with V* from value iteration (tol 1e-10).
GapSeries gap_series(const RunTrace& trace, const TabularMdp& mdp);

/// Fills each record's gap field.
void attach_gap(RunTrace& trace, const TabularMdp& mdp);

/// First recorded t with reported objective >= target.
std::optional<long> iterations_to_threshold(const RunTrace& trace, double target);

/// SPGNM_WORKERS, default 1.
int workers_from_env();

/// Runs every config on up to `workers` threads; results keep input order.
/// All configs must share one environment and discount.
std::vector<RunTrace> compare(const std::vector<ExperimentConfig>& configs, int workers = 1);

/// One spg-nm run per lambda with everything else fixed.
std::vector<RunTrace> lambda_sweep(const ExperimentConfig& base, const std::vector<double>& lambdas,
                                   int workers = 1);

enum class TraceFormat { csv, json };

std::string trace_to_csv(const RunTrace& trace);
nlohmann::json trace_to_json(const RunTrace& trace);
RunTrace trace_from_json(const nlohmann::json& doc);
void serialize_trace(const RunTrace& trace, TraceFormat format, const std::filesystem::path& destination);

/// Experiment config documents (JSON); unknown keys are rejected.
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace spgnm
