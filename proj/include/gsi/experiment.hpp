#pragma once

// Experiment runner behind the `gsi` command line tool: configuration,
// data preparation, the five commands and their on-disk artifacts.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsi/data.hpp"
#include "gsi/eval.hpp"
#include "gsi/group.hpp"

namespace gsi {

inline constexpr const char* kToolVersion = "1.0.0";

enum class DatasetKind { synthetic, csv };
enum class SplitDomain { automatic, all_entries, observed };
enum class GroundTruth { knn, synthetic_full };
enum class GsiPrediction { appended_row, member_mean };
enum class StartMode { zero_fill, random };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::synthetic;
    std::string name; ///< defaults to "synthetic" or the file stem
    SyntheticConfig synthetic;
    std::filesystem::path path;
    std::string format = "movielens"; ///< movielens | goodbooks | custom
    CsvSchema schema = CsvSchema::movielens_100k();
    std::size_t users = 0; ///< subsample targets, 0 keeps everything
    std::size_t items = 0;
};

struct SplitConfig {
    double fraction = 0.75;
    std::uint64_t seed = 11;
    /// automatic: every entry of the imputed matrix for synthetic data, the
    /// originally observed entries for rating files.
    SplitDomain domain = SplitDomain::automatic;
};

struct GroupsConfig {
    std::vector<std::size_t> sizes{5, 10, 15, 20, 25};
    std::size_t instances = 10;
    std::uint64_t seed = 5;
    MeanDivisor divisor = MeanDivisor::rater_count;
};

struct MetricsConfig {
    std::size_t k = 20;
    double tau = 3.5;
    CandidateMode candidates = CandidateMode::exclude_jointly_observed;
};

struct RankTableConfig {
    std::vector<double> lambdas{0.001, 0.01, 0.1, 1.0, 10.0};
    std::size_t group_size = 5;
};

struct ConvergenceConfig {
    std::optional<double> lambda; ///< default: geometric midpoint of the λ grid
    StartMode start = StartMode::zero_fill;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    std::size_t knn_k = 10;
    GroundTruth ground_truth = GroundTruth::knn;
    SplitConfig split;
    SoftImputeConfig softimpute;
    AlsConfig als;
    std::vector<Method> methods{Method::gsi, Method::wbf, Method::af};
    AggregationKind af_aggregation = AggregationKind::average;
    GsiPrediction gsi_prediction = GsiPrediction::appended_row;
    GroupsConfig groups;
    MetricsConfig metrics;
    RankTableConfig rank_table;
    ConvergenceConfig convergence;
    std::filesystem::path output = "gsi-results";
    int threads = 0; ///< 0 leaves the OpenMP default

    /// Checks everything that does not depend on the loaded data.
    void validate() const;
};

/// Parses a JSON config on top of the defaults. Unknown keys and wrongly
/// typed values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Sets a dotted key ("softimpute.epsilon") from a JSON literal, or a bare
/// string when the text is not valid JSON.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Derives every seed from one value: synthetic N, split N+1, groups N+2,
/// soft-impute N+3, ALS N+4.
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

struct PreparedData {
    std::string name;
    RatingMatrix observed; ///< ingested (and subsampled) ratings
    Matrix truth;          ///< complete reference matrix
    SplitMask split;
    RatingMatrix train;
    nlohmann::json diagnostics;
};

PreparedData prepare_data(const ExperimentConfig& config);

/// `count` groups of `size` users. Groups drawn from one shuffle are
/// disjoint; a new shuffle starts when the users run out.
std::vector<Group> form_groups(std::size_t users, std::size_t size, std::size_t count, std::uint64_t seed);

struct CompletionPoint {
    ErrorReport report;
    std::size_t iterations = 0;
    bool converged = false;
    std::optional<double> estimated_rho;
    std::string status = "ok";
};

struct CompletionRun {
    std::string dataset;
    std::vector<CompletionPoint> points; ///< ascending nuclear norm, failures last
};

CompletionRun run_complete(const ExperimentConfig& config, const PreparedData& data);

struct GroupRecRow {
    Method method = Method::gsi;
    std::string group_id;
    std::size_t group_size = 0;
    double lambda = 0.0;
    std::optional<MetricsAtK> metrics; ///< absent after a numerical failure
};

struct GroupRecSummary {
    Method method = Method::gsi;
    std::optional<std::size_t> group_size; ///< absent for the all-sizes row
    std::size_t instances = 0;
    double precision = 0.0;
    std::optional<double> recall;
    double f1 = 0.0;
};

struct GroupRecRun {
    std::string dataset;
    std::vector<GroupRecRow> rows;
    std::vector<GroupRecSummary> summary;
};

GroupRecRun run_group_rec(const ExperimentConfig& config, const PreparedData& data);
std::vector<GroupRecSummary> summarize(const std::vector<GroupRecRow>& rows, const std::vector<Method>& methods);

RankTable run_rank_table(const ExperimentConfig& config, const PreparedData& data);

struct ConvergenceRun {
    std::string dataset;
    double lambda = 0.0;
    double epsilon = 0.0;
    ConvergenceTrace trace;
    ConvergenceSeries series;
    std::optional<LineFit> fit;
    std::size_t rank = 0;
};

ConvergenceRun run_convergence(const ExperimentConfig& config, const PreparedData& data);

enum class Command { complete, group_rec, rank_table, convergence, synth };
Command parse_command(std::string_view name);
std::string_view to_string(Command c);

struct RunOptions {
    bool emit_svg = false;
};

/// Runs a command end to end. Data is loaded and validated before the output
/// directory is touched; every file is written atomically and a
/// manifest.json is written last. Returns the paths written.
std::vector<std::filesystem::path> execute(Command command, const ExperimentConfig& config,
                                           const RunOptions& options = {});

/// Process exit code for an exception escaping execute().
int exit_code_for(const std::exception& e);

} // namespace gsi
