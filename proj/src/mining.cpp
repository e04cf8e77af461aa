#include "viper/mining.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace viper {

std::vector<double> similarities(const GlobalDescriptor& desc,
                                 const std::vector<GlobalDescriptor>& others) {
  std::vector<double> out;
  out.reserve(others.size());
  for (const GlobalDescriptor& o : others) out.push_back(ops::dot(desc.values, o.values));
  return out;
}

double triplet_loss(double s_ap, double s_an, double delta) {
  return std::max(s_an - s_ap + delta, 0.0);
}

ad::Var triplet_loss(const ad::Var& s_ap, const ad::Var& s_an, double delta) {
  return ad::max0(ad::add(ad::sub(s_an, s_ap), delta));
}

std::pair<std::size_t, std::size_t> mine_random(std::size_t m, std::size_t n,
                                                rng::Engine& rng) {
  if (m == 0 || n == 0) throw ContractError("mine_random: empty candidate list");
  const std::size_t i = rng.below(m);
  const std::size_t j = rng.below(n);
  return {i, j};
}

std::pair<std::size_t, std::size_t> mine_hard(const std::vector<double>& s_ap,
                                              const std::vector<double>& s_an) {
  if (s_ap.empty() || s_an.empty()) throw ContractError("mine_hard: empty candidate list");
  std::size_t i = 0, j = 0;
  for (std::size_t k = 1; k < s_ap.size(); ++k) {
    if (s_ap[k] < s_ap[i]) i = k;
  }
  for (std::size_t k = 1; k < s_an.size(); ++k) {
    if (s_an[k] > s_an[j]) j = k;
  }
  return {i, j};
}

MiningState::MiningState(double td, double te) : t_d(td), t_e(te) {
  if (!(td > te && te > 0.0)) {
    throw ContractError("mining: thresholds must satisfy T_d > T_e > 0");
  }
}

namespace {

// Indices of `values` sorted by the given comparison, stable on ties.
template <typename Cmp>
std::vector<std::size_t> sorted_order(const std::vector<double>& values, Cmp cmp) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cmp(values[a], values[b]); });
  return order;
}

}  // namespace

MineResult mine_adaptive(const MiningState& state, const std::vector<double>& s_ap,
                         const std::vector<double>& s_an, double delta) {
  if (s_ap.empty() || s_an.empty()) {
    throw ContractError("mine_adaptive: empty candidate list");
  }
  // rank 0 = hardest: negatives descending, positives ascending
  const std::vector<std::size_t> neg_order =
      sorted_order(s_an, [](double a, double b) { return a > b; });
  const std::vector<std::size_t> pos_order =
      sorted_order(s_ap, [](double a, double b) { return a < b; });

  MineResult result;
  result.state = state;
  std::size_t pos_rank = std::min(state.pos_rank, pos_order.size() - 1);
  std::size_t neg_rank = std::min(state.neg_rank, neg_order.size() - 1);

  const double loss =
      triplet_loss(s_ap[pos_order[pos_rank]], s_an[neg_order[neg_rank]], delta);

  if (state.prev_loss.has_value()) {
    const double delta_loss = loss - *state.prev_loss;
    if (delta_loss > state.t_d) {
      // training difficulty too high: step both ranks toward easier samples
      if (pos_rank + 1 < pos_order.size()) ++pos_rank;
      if (neg_rank + 1 < neg_order.size()) ++neg_rank;
    } else if (-delta_loss > state.t_e) {
      // loss dropping fast: step both ranks toward harder samples
      if (pos_rank > 0) --pos_rank;
      if (neg_rank > 0) --neg_rank;
    }
  }

  result.state.pos_rank = pos_rank;
  result.state.neg_rank = neg_rank;
  result.state.prev_loss = loss;
  result.pos_index = pos_order[pos_rank];
  result.neg_index = neg_order[neg_rank];
  return result;
}

}  // namespace viper
