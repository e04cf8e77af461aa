#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "viper/embedder.hpp"
#include "viper/observation.hpp"
#include "viper/worldgen.hpp"

namespace viper {

struct RetrievalIndex {
  std::vector<GlobalDescriptor> database;
  std::vector<GlobalDescriptor> queries;
};

// Core of the metric, operating on per-query top-1 scores and correctness:
// rank queries by score (descending, stable), take the longest all-correct
// prefix, divide by the number of queries that have a true match at all.
double recall_from_scores(const std::vector<double>& scores, const std::vector<char>& correct,
                          std::size_t queries_with_match);

// Recall at 100% precision over top-1 cosine retrievals.
double recall_at_full_precision(const RetrievalIndex& index, const PairLabeler& labeler);

// T x T matrix: recalls[i][j] = metric of the model trained after environment
// i, evaluated on environment j's test split.
struct EvalMatrix {
  std::size_t envs = 0;
  std::vector<double> recalls;  // row-major
  std::optional<std::vector<double>> baseline;  // untrained-model recall per env

  double at(std::size_t i, std::size_t j) const { return recalls[i * envs + j]; }
  double& at(std::size_t i, std::size_t j) { return recalls[i * envs + j]; }
};

// Test split within each environment: even seq_index goes to the database,
// odd to the queries.
RetrievalIndex build_index(const EmbedderParams& params, const Dataset& dataset,
                           std::uint32_t env);

EvalMatrix build_eval_matrix(const std::vector<EmbedderParams>& checkpoints,
                             const Dataset& dataset,
                             const EmbedderParams* baseline_model = nullptr);

struct SummaryMetrics {
  double ap = 0.0;
  std::optional<double> bwt;                // needs T >= 2
  std::optional<double> fwt;                // baseline-adjusted when available
  std::optional<double> fwt_zero_baseline;  // same sum with b_j = 0
};

SummaryMetrics summary_metrics(const EvalMatrix& matrix);

// Writes <prefix>_matrix.csv, <prefix>_summary.json, <prefix>_long.csv.
void emit_report(const EvalMatrix& matrix, const SummaryMetrics& metrics,
                 const std::filesystem::path& out_prefix, const std::string& config_digest);

}  // namespace viper
