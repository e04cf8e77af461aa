#include "viper/worldgen.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "viper/rng.hpp"
#include "viper/serialize.hpp"

namespace viper {
namespace {

constexpr std::uint64_t kLatentStream = 0x100;
constexpr std::uint64_t kStyleStream = 0x200;
constexpr std::uint64_t kNoiseStream = 0x300;

void validate_spec(const WorldSpec& s) {
  if (s.num_envs < 2) throw ContractError("worldgen: num_envs must be >= 2");
  if (s.places_per_env < 4) throw ContractError("worldgen: places_per_env must be >= 4");
  if (s.visits_per_place < 2) throw ContractError("worldgen: visits_per_place must be >= 2");
  if (s.latent_dim != s.patch_slots * s.raw_channels) {
    throw ContractError("worldgen: latent_dim must equal patch_slots * raw_channels");
  }
  if (s.view_noise_sigma < 0.0) throw ContractError("worldgen: view_noise_sigma must be >= 0");
  if (s.env_shift_strength < 0.0) {
    throw ContractError("worldgen: env_shift_strength must be >= 0");
  }
}

// Environment style map A = (1 - alpha) I + alpha G / sqrt(L): blends identity
// with a random near-isometry, giving each environment its own covariance.
std::vector<double> style_map(const WorldSpec& spec, std::uint32_t env) {
  const std::size_t L = spec.latent_dim;
  std::vector<double> a(L * L);
  rng::Engine eng(rng::derive_seed(spec.seed, kStyleStream + env));
  const double alpha = spec.env_shift_strength;
  const double scale = alpha / std::sqrt(static_cast<double>(L));
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      a[i * L + j] = eng.normal() * scale + (i == j ? 1.0 - alpha : 0.0);
    }
  }
  return a;
}

}  // namespace

std::vector<const Observation*> Dataset::environment(std::uint32_t env) const {
  std::vector<const Observation*> out;
  for (const Observation& o : observations) {
    if (o.tag.env_id == env) out.push_back(&o);
  }
  return out;
}

PairLabeler Dataset::labeler() const {
  return [](const PlaceTag& a, const PlaceTag& b) { return pair_label(a, b); };
}

PairLabel pair_label(const PlaceTag& a, const PlaceTag& b) {
  return (a.env_id == b.env_id && a.place_id == b.place_id) ? PairLabel::Positive
                                                            : PairLabel::Negative;
}

std::vector<Tensor> styled_latents(const WorldSpec& spec, std::uint32_t env) {
  const std::size_t L = spec.latent_dim;
  rng::Engine latent_eng(rng::derive_seed(spec.seed, kLatentStream + env));
  std::vector<Tensor> latents;
  latents.reserve(spec.places_per_env);
  for (std::uint32_t p = 0; p < spec.places_per_env; ++p) {
    Tensor z({L});
    for (std::size_t i = 0; i < L; ++i) z.at(i) = latent_eng.normal();
    latents.push_back(std::move(z));
  }
  const std::vector<double> a = style_map(spec, env);
  std::vector<Tensor> styled;
  styled.reserve(spec.places_per_env);
  for (const Tensor& z : latents) {
    Tensor s({L});
    for (std::size_t i = 0; i < L; ++i) {
      double acc = 0.0;
      const double* arow = a.data() + i * L;
      for (std::size_t j = 0; j < L; ++j) acc += arow[j] * z.at(j);
      s.at(i) = acc;
    }
    styled.push_back(std::move(s));
  }
  return styled;
}

Dataset generate(const WorldSpec& spec) {
  validate_spec(spec);
  Dataset ds;
  ds.spec = spec;
  const std::size_t L = spec.latent_dim;
  const std::uint32_t places = spec.places_per_env;

  for (std::uint32_t env = 0; env < spec.num_envs; ++env) {
    const std::vector<Tensor> styled = styled_latents(spec, env);
    rng::Engine noise_eng(rng::derive_seed(spec.seed, kNoiseStream + env));
    // Boustrophedon traversal: even rounds walk places forward, odd rounds
    // backward, so every place lands on both seq-index parities.
    for (std::uint32_t round = 0; round < spec.visits_per_place; ++round) {
      for (std::uint32_t pos = 0; pos < places; ++pos) {
        const std::uint32_t place = (round % 2 == 0) ? pos : places - 1 - pos;
        Observation obs;
        obs.tag = {env, place, round * places + pos};
        Tensor patches({spec.patch_slots, spec.raw_channels});
        const Tensor& base = styled[place];
        for (std::size_t i = 0; i < L; ++i) {
          const double v = base.at(i) + spec.view_noise_sigma * noise_eng.normal();
          // values are stored as f32 on disk; quantize now so save/load
          // round-trips bit-exactly
          patches.at(i) = static_cast<double>(static_cast<float>(v));
        }
        obs.patches = std::move(patches);
        ds.observations.push_back(std::move(obs));
      }
    }
  }
  return ds;
}

double nearest_latent_accuracy(const Dataset& dataset) {
  std::size_t correct = 0;
  for (std::uint32_t env = 0; env < dataset.spec.num_envs; ++env) {
    const std::vector<Tensor> prototypes = styled_latents(dataset.spec, env);
    for (const Observation* obs : dataset.environment(env)) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t best_place = 0;
      for (std::uint32_t p = 0; p < prototypes.size(); ++p) {
        double dist = 0.0;
        for (std::size_t i = 0; i < obs->patches.size(); ++i) {
          const double d = obs->patches.at(i) - prototypes[p].at(i);
          dist += d * d;
        }
        if (dist < best) {
          best = dist;
          best_place = p;
        }
      }
      if (best_place == obs->tag.place_id) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.observations.size());
}

std::size_t predicted_file_size(const WorldSpec& spec) {
  const std::size_t header = 4 + 4 + 6 * 4 + 2 * 8 + 8 + 8;
  const std::size_t count = static_cast<std::size_t>(spec.num_envs) * spec.places_per_env *
                            spec.visits_per_place;
  const std::size_t per_obs = 3 * 4 + static_cast<std::size_t>(spec.patch_slots) *
                                          spec.raw_channels * 4;
  return header + count * per_obs;
}

void save(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open dataset for writing: " + path.string());
  io::Writer w(out);
  const WorldSpec& s = dataset.spec;
  w.bytes("VPWD", 4);
  w.u32(kDatasetVersion);
  w.u32(s.num_envs);
  w.u32(s.places_per_env);
  w.u32(s.visits_per_place);
  w.u32(s.latent_dim);
  w.u32(s.patch_slots);
  w.u32(s.raw_channels);
  w.f64(s.view_noise_sigma);
  w.f64(s.env_shift_strength);
  w.u64(s.seed);
  w.u64(dataset.observations.size());
  for (const Observation& o : dataset.observations) {
    w.u32(o.tag.env_id);
    w.u32(o.tag.place_id);
    w.u32(o.tag.seq_index);
    for (std::size_t i = 0; i < o.patches.size(); ++i) {
      w.f32(static_cast<float>(o.patches.at(i)));
    }
  }
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset: " + path.string());
  io::Reader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "VPWD", 4) != 0) {
    throw FormatError("bad dataset magic, expected VPWD", 0);
  }
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw IncompatibilityError("unsupported dataset version " + std::to_string(version) +
                               " (byte offset 4)");
  }
  Dataset ds;
  WorldSpec& s = ds.spec;
  s.num_envs = r.u32();
  s.places_per_env = r.u32();
  s.visits_per_place = r.u32();
  s.latent_dim = r.u32();
  s.patch_slots = r.u32();
  s.raw_channels = r.u32();
  s.view_noise_sigma = r.f64();
  s.env_shift_strength = r.f64();
  s.seed = r.u64();
  if (s.latent_dim != s.patch_slots * s.raw_channels) {
    throw FormatError("inconsistent patch grid dimensions in header", 8);
  }
  const std::uint64_t count = r.u64();
  const std::uint64_t expected = static_cast<std::uint64_t>(s.num_envs) * s.places_per_env *
                                 s.visits_per_place;
  if (count != expected) {
    throw FormatError("observation count " + std::to_string(count) +
                          " does not match header-implied " + std::to_string(expected),
                      56);
  }
  ds.observations.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Observation o;
    o.tag.env_id = r.u32();
    o.tag.place_id = r.u32();
    o.tag.seq_index = r.u32();
    if (o.tag.env_id >= s.num_envs || o.tag.place_id >= s.places_per_env) {
      throw FormatError("observation tag out of range", r.offset() - 12);
    }
    Tensor patches({s.patch_slots, s.raw_channels});
    for (std::size_t i = 0; i < patches.size(); ++i) {
      patches.at(i) = static_cast<double>(r.f32());
    }
    o.patches = std::move(patches);
    ds.observations.push_back(std::move(o));
  }
  if (!r.at_eof()) {
    throw FormatError("trailing bytes after last observation", r.offset());
  }
  return ds;
}

}  // namespace viper
