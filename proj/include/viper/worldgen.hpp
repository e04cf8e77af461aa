#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "viper/observation.hpp"

namespace viper {

// Synthetic multi-environment place-world. Each place is a Gaussian latent
// code; each environment applies its own near-orthogonal style map; each
// visit adds fresh view noise. Patch grids are the latent sliced to P x F.
struct WorldSpec {
  std::uint32_t num_envs = 3;
  std::uint32_t places_per_env = 32;
  std::uint32_t visits_per_place = 8;
  std::uint32_t latent_dim = 384;
  std::uint32_t patch_slots = 16;   // P
  std::uint32_t raw_channels = 24;  // F
  double view_noise_sigma = 2.0;
  double env_shift_strength = 0.6;
  std::uint64_t seed = 0;
};

struct Dataset {
  WorldSpec spec;
  std::vector<Observation> observations;  // ordered by (env_id, seq_index)

  std::uint32_t num_envs() const { return spec.num_envs; }
  std::vector<const Observation*> environment(std::uint32_t env) const;
  PairLabeler labeler() const;
};

// Ground-truth pair rule: positive iff both place and environment match.
PairLabel pair_label(const PlaceTag& a, const PlaceTag& b);

// Deterministic in the spec; identical specs give bit-identical datasets.
Dataset generate(const WorldSpec& spec);

// Clean per-place styled latents for one environment, in place order. This is
// the data-side sanity oracle's reference (and generate's own building block).
std::vector<Tensor> styled_latents(const WorldSpec& spec, std::uint32_t env);

// Fraction of observations whose nearest styled latent (within their own
// environment) is their true place. Close to 1 when view noise is small.
double nearest_latent_accuracy(const Dataset& dataset);

inline constexpr std::uint32_t kDatasetVersion = 1;

void save(const Dataset& dataset, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

// Exact file size implied by the header fields.
std::size_t predicted_file_size(const WorldSpec& spec);

}  // namespace viper
