#include "viper/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

namespace viper {
namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double recall_from_scores(const std::vector<double>& scores, const std::vector<char>& correct,
                          std::size_t queries_with_match) {
  if (scores.size() != correct.size()) {
    throw ContractError("recall: scores/correct length mismatch");
  }
  if (queries_with_match == 0) {
    throw ContractError("recall: no query has a true match in the database");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];  // ties keep query order
  });
  std::size_t prefix = 0;
  for (std::size_t idx : order) {
    if (!correct[idx]) break;
    ++prefix;
  }
  return static_cast<double>(prefix) / static_cast<double>(queries_with_match);
}

double recall_at_full_precision(const RetrievalIndex& index, const PairLabeler& labeler) {
  if (index.database.empty()) throw ContractError("recall: empty database");
  if (index.queries.empty()) throw ContractError("recall: empty query set");
  {
    std::set<std::pair<std::uint32_t, std::uint32_t>> db_keys;
    for (const GlobalDescriptor& d : index.database) {
      db_keys.insert({d.tag.env_id, d.tag.seq_index});
    }
    for (const GlobalDescriptor& q : index.queries) {
      if (db_keys.count({q.tag.env_id, q.tag.seq_index})) {
        throw ContractError("recall: database and query sets overlap");
      }
    }
  }

  std::vector<double> scores;
  std::vector<char> correct;
  std::size_t with_match = 0;
  scores.reserve(index.queries.size());
  correct.reserve(index.queries.size());
  for (const GlobalDescriptor& q : index.queries) {
    std::size_t best = 0;
    double best_score = ops::dot(q.values, index.database[0].values);
    for (std::size_t k = 1; k < index.database.size(); ++k) {
      const double s = ops::dot(q.values, index.database[k].values);
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    bool has_match = false;
    for (const GlobalDescriptor& d : index.database) {
      if (labeler(q.tag, d.tag) == PairLabel::Positive) {
        has_match = true;
        break;
      }
    }
    if (has_match) ++with_match;
    scores.push_back(best_score);
    correct.push_back(labeler(q.tag, index.database[best].tag) == PairLabel::Positive ? 1
                                                                                      : 0);
  }
  return recall_from_scores(scores, correct, with_match);
}

RetrievalIndex build_index(const EmbedderParams& params, const Dataset& dataset,
                           std::uint32_t env) {
  RetrievalIndex index;
  for (const Observation* obs : dataset.environment(env)) {
    GlobalDescriptor desc = embed(params, *obs);
    if (obs->tag.seq_index % 2 == 0) {
      index.database.push_back(std::move(desc));
    } else {
      index.queries.push_back(std::move(desc));
    }
  }
  return index;
}

EvalMatrix build_eval_matrix(const std::vector<EmbedderParams>& checkpoints,
                             const Dataset& dataset, const EmbedderParams* baseline_model) {
  if (checkpoints.empty()) throw ContractError("eval: no checkpoints");
  const std::size_t T = checkpoints.size();
  if (T != dataset.num_envs()) {
    throw IncompatibilityError("eval: " + std::to_string(T) + " checkpoints vs " +
                               std::to_string(dataset.num_envs()) + " environments");
  }
  EvalMatrix matrix;
  matrix.envs = T;
  matrix.recalls.assign(T * T, 0.0);
  const PairLabeler labeler = dataset.labeler();
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t j = 0; j < T; ++j) {
      const RetrievalIndex index =
          build_index(checkpoints[i], dataset, static_cast<std::uint32_t>(j));
      matrix.at(i, j) = recall_at_full_precision(index, labeler);
    }
  }
  if (baseline_model) {
    std::vector<double> base(T, 0.0);
    for (std::size_t j = 0; j < T; ++j) {
      const RetrievalIndex index =
          build_index(*baseline_model, dataset, static_cast<std::uint32_t>(j));
      base[j] = recall_at_full_precision(index, labeler);
    }
    matrix.baseline = std::move(base);
  }
  return matrix;
}

SummaryMetrics summary_metrics(const EvalMatrix& matrix) {
  const std::size_t T = matrix.envs;
  if (T == 0) throw ContractError("summary_metrics: empty matrix");
  SummaryMetrics m;
  double ap = 0.0;
  for (std::size_t j = 0; j < T; ++j) ap += matrix.at(T - 1, j);
  m.ap = ap / static_cast<double>(T);
  if (T < 2) return m;  // BWT/FWT undefined for a single environment

  double bwt = 0.0;
  for (std::size_t j = 0; j + 1 < T; ++j) bwt += matrix.at(T - 1, j) - matrix.at(j, j);
  m.bwt = bwt / static_cast<double>(T - 1);

  double fwt_zero = 0.0;
  for (std::size_t j = 1; j < T; ++j) fwt_zero += matrix.at(j - 1, j);
  m.fwt_zero_baseline = fwt_zero / static_cast<double>(T - 1);

  if (matrix.baseline) {
    double fwt = 0.0;
    for (std::size_t j = 1; j < T; ++j) fwt += matrix.at(j - 1, j) - (*matrix.baseline)[j];
    m.fwt = fwt / static_cast<double>(T - 1);
  } else {
    m.fwt = m.fwt_zero_baseline;
  }
  return m;
}

void emit_report(const EvalMatrix& matrix, const SummaryMetrics& metrics,
                 const std::filesystem::path& out_prefix, const std::string& config_digest) {
  const std::size_t T = matrix.envs;
  const std::string prefix = out_prefix.string();
  {
    std::ofstream out(prefix + "_matrix.csv");
    if (!out) throw Error("cannot write " + prefix + "_matrix.csv");
    out << "trained_after";
    for (std::size_t j = 0; j < T; ++j) out << ",env_" << j;
    out << "\n";
    for (std::size_t i = 0; i < T; ++i) {
      out << "after_env_" << i;
      for (std::size_t j = 0; j < T; ++j) out << "," << fmt_double(matrix.at(i, j));
      out << "\n";
    }
  }
  {
    std::ofstream out(prefix + "_long.csv");
    if (!out) throw Error("cannot write " + prefix + "_long.csv");
    out << "trained_after,evaluated_on,recall\n";
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t j = 0; j < T; ++j) {
        out << i << "," << j << "," << fmt_double(matrix.at(i, j)) << "\n";
      }
    }
  }
  {
    nlohmann::json summary;
    summary["ap"] = metrics.ap;
    if (metrics.bwt) summary["bwt"] = *metrics.bwt;
    if (metrics.fwt) summary["fwt"] = *metrics.fwt;
    if (metrics.fwt_zero_baseline) summary["fwt_zero_baseline"] = *metrics.fwt_zero_baseline;
    if (matrix.baseline) summary["baseline"] = *matrix.baseline;
    summary["config_digest"] = config_digest;
    std::ofstream out(prefix + "_summary.json");
    if (!out) throw Error("cannot write " + prefix + "_summary.json");
    out << summary.dump(2) << "\n";
  }
}

}  // namespace viper
