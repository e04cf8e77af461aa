#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "viper/autodiff.hpp"
#include "viper/observation.hpp"
#include "viper/rng.hpp"

namespace viper {

// Training unit: one anchor, m same-place positives, n different-place
// negatives (per the pair-label rule).
struct Triplet {
  Observation anchor;
  std::vector<Observation> positives;
  std::vector<Observation> negatives;
};

// Cosine similarities of unit-norm descriptors; plain dot products.
std::vector<double> similarities(const GlobalDescriptor& desc,
                                 const std::vector<GlobalDescriptor>& others);

// Hinge max(s_an - s_ap + delta, 0).
double triplet_loss(double s_ap, double s_an, double delta);
ad::Var triplet_loss(const ad::Var& s_ap, const ad::Var& s_an, double delta);

// Uniform (i, j) over [0,m) x [0,n).
std::pair<std::size_t, std::size_t> mine_random(std::size_t m, std::size_t n,
                                                rng::Engine& rng);

// argmin positive similarity, argmax negative similarity; ties take the
// lowest index.
std::pair<std::size_t, std::size_t> mine_hard(const std::vector<double>& s_ap,
                                              const std::vector<double>& s_an);

// Loss-fluctuation-driven difficulty control. Ranks live in sorted-order
// space where rank 0 is hardest for both lists (largest negative similarity,
// smallest positive similarity); easing moves both ranks up, hardening moves
// both down, clamped to the list bounds.
struct MiningState {
  std::size_t pos_rank = 0;
  std::size_t neg_rank = 0;
  std::optional<double> prev_loss;
  double t_d = 0.05;  // ease when the loss rises by more than this
  double t_e = 0.03;  // harden when it falls by more than this

  MiningState() = default;
  MiningState(double td, double te);
};

struct MineResult {
  std::size_t pos_index = 0;  // indices into the caller's original lists
  std::size_t neg_index = 0;
  MiningState state;
};

MineResult mine_adaptive(const MiningState& state, const std::vector<double>& s_ap,
                         const std::vector<double>& s_an, double delta);

}  // namespace viper
