#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "viper/autodiff.hpp"
#include "viper/observation.hpp"
#include "viper/serialize.hpp"

namespace viper {

enum class Aggregator : std::uint8_t { GeM = 0, NetVLAD = 1 };

struct EmbedderConfig {
  std::size_t patch_slots = 16;     // P
  std::size_t raw_channels = 24;    // F
  std::size_t local_channels = 16;  // C
  Aggregator aggregator = Aggregator::GeM;
  double gem_p = 3.0;
  std::size_t vlad_clusters = 8;    // K
  std::size_t descriptor_dim = 32;  // d of the NetVLAD projection; GeM emits C
};

// Trainable descriptor model f: a linear patch extractor with max0, followed
// by GeM pooling or a NetVLAD-style soft-assignment aggregator, L2-normalized.
struct EmbedderParams {
  EmbedderConfig config;
  Tensor extractor_weights;    // [F x C]
  Tensor extractor_bias;       // [C]
  Tensor vlad_centroids;       // [K x C]
  Tensor vlad_assign_weights;  // [C x K]
  Tensor vlad_assign_bias;     // [K]
  Tensor vlad_projection;      // [K*C x d]; fixed at init, never trained
  bool frozen = false;

  // GeM emits the pooled channel vector, so its descriptor dimension is C;
  // the NetVLAD path projects K*C down to the configured dimension.
  std::size_t out_dim() const;

  static EmbedderParams init(const EmbedderConfig& config, std::uint64_t seed);
  EmbedderParams snapshot() const;

  // Tensors the optimizer updates; depends on the aggregator in use.
  std::vector<std::pair<std::string, Tensor*>> trainable();
  std::vector<std::pair<std::string, const Tensor*>> trainable() const;
};

// Parameter leaves registered on a tape for one training or eval pass.
struct EmbedderVars {
  ad::Var extractor_weights;
  ad::Var extractor_bias;
  ad::Var vlad_centroids;
  ad::Var vlad_assign_weights;
  ad::Var vlad_assign_bias;
  ad::Var vlad_projection;
  std::vector<std::pair<std::string, ad::Var>> named;  // mirrors trainable()
};

EmbedderVars make_vars(ad::Tape& tape, const EmbedderParams& params, bool trainable);

// Per-patch linear map plus max0; output [P x C].
ad::Var extract_local(ad::Tape& tape, const EmbedderVars& vars, const Tensor& patches);

// Channelwise generalized mean over patches; features must be nonnegative.
ad::Var gem_pool(const ad::Var& features, double p);

// Soft-assignment residual blocks V(k) = sum_p a_k(x_p) (x_p - c_k), [K x C].
ad::Var vlad_residuals(ad::Tape& tape, const ad::Var& assignments, const ad::Var& features,
                       const ad::Var& centroids);

// Full NetVLAD-lite pipeline: assignment logits, residuals, per-block intra
// normalization, flatten, fixed projection to the configured dimension.
ad::Var netvlad_aggregate(ad::Tape& tape, const EmbedderVars& vars, const ad::Var& features);

ad::Var embed_on_tape(ad::Tape& tape, const EmbedderVars& vars, const EmbedderConfig& config,
                      const Tensor& patches);

// Convenience evaluation path; runs the identical graph on a private tape.
GlobalDescriptor embed(const EmbedderParams& params, const Observation& obs);

// Checkpoint container IO. `extras` lets callers ride additional named
// tensors (e.g. omega.* importance maps) in the same file.
void save_checkpoint(const std::filesystem::path& path, const EmbedderParams& params,
                     const io::NamedTensors& extras = {});

struct LoadedCheckpoint {
  EmbedderParams params;
  io::NamedTensors extras;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace viper
