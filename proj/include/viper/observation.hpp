#pragma once

#include <cstdint>
#include <functional>

#include "viper/tensor.hpp"

namespace viper {

// Identity of an observation: which environment, which place, and where in
// the capture sequence it sits. (env_id, seq_index) is unique per dataset.
struct PlaceTag {
  std::uint32_t env_id = 0;
  std::uint32_t place_id = 0;
  std::uint32_t seq_index = 0;
};

inline bool same_capture(const PlaceTag& a, const PlaceTag& b) {
  return a.env_id == b.env_id && a.seq_index == b.seq_index;
}

// One observation: a P x F patch-feature grid plus its tag.
struct Observation {
  PlaceTag tag;
  Tensor patches;
};

// Unit-norm global descriptor carrying the source observation's tag.
struct GlobalDescriptor {
  Tensor values;
  PlaceTag tag;
};

enum class PairLabel : std::uint8_t { Positive, Negative, Ignore };

// On-demand pair labeling over observation metadata; equivalent to a dense
// place-adjacency matrix without the quadratic storage.
using PairLabeler = std::function<PairLabel(const PlaceTag&, const PlaceTag&)>;

}  // namespace viper
