#include "viper/embedder.hpp"

#include <cmath>
#include <fstream>

#include "viper/rng.hpp"

namespace viper {
namespace {

void validate_config(const EmbedderConfig& c) {
  if (c.patch_slots == 0 || c.raw_channels == 0 || c.local_channels == 0) {
    throw ShapeError("embedder: patch_slots, raw_channels, local_channels must be positive");
  }
  if (c.gem_p < 1.0) throw DomainError("embedder: gem_p must be >= 1");
  if (c.aggregator == Aggregator::NetVLAD && c.vlad_clusters < 2) {
    throw ShapeError("embedder: NetVLAD needs at least 2 clusters");
  }
  if (c.descriptor_dim == 0) throw ShapeError("embedder: descriptor_dim must be positive");
}

Tensor gaussian(rng::Engine& eng, std::vector<std::size_t> shape, double stddev) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = eng.normal() * stddev;
  return t;
}

}  // namespace

std::size_t EmbedderParams::out_dim() const {
  return config.aggregator == Aggregator::GeM ? config.local_channels : config.descriptor_dim;
}

EmbedderParams EmbedderParams::init(const EmbedderConfig& config, std::uint64_t seed) {
  validate_config(config);
  rng::Engine eng(rng::derive_seed(seed, 0xE0BEDDE5));
  const std::size_t F = config.raw_channels, C = config.local_channels;
  const std::size_t K = config.vlad_clusters, d = config.descriptor_dim;

  EmbedderParams p;
  p.config = config;
  p.extractor_weights = gaussian(eng, {F, C}, std::sqrt(2.0 / static_cast<double>(F)));
  p.extractor_bias = Tensor::full({C}, 0.01);
  p.vlad_centroids = gaussian(eng, {K, C}, 0.5);
  for (std::size_t i = 0; i < p.vlad_centroids.size(); ++i) p.vlad_centroids.at(i) += 0.5;
  p.vlad_assign_weights = gaussian(eng, {C, K}, std::sqrt(2.0 / static_cast<double>(C)));
  p.vlad_assign_bias = Tensor({K});
  p.vlad_projection =
      gaussian(eng, {K * C, d}, 1.0 / std::sqrt(static_cast<double>(K * C)));
  for (auto& [name, t] : p.trainable()) {
    (void)name;
    t->requires_grad = true;
  }
  return p;
}

EmbedderParams EmbedderParams::snapshot() const {
  EmbedderParams copy = *this;
  copy.frozen = true;
  for (auto& [name, t] : copy.trainable()) {
    (void)name;
    t->requires_grad = false;
    t->grad.reset();
  }
  return copy;
}

std::vector<std::pair<std::string, Tensor*>> EmbedderParams::trainable() {
  std::vector<std::pair<std::string, Tensor*>> out{
      {"extractor_weights", &extractor_weights},
      {"extractor_bias", &extractor_bias},
  };
  if (config.aggregator == Aggregator::NetVLAD) {
    out.emplace_back("vlad_centroids", &vlad_centroids);
    out.emplace_back("vlad_assign_weights", &vlad_assign_weights);
    out.emplace_back("vlad_assign_bias", &vlad_assign_bias);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> EmbedderParams::trainable() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<EmbedderParams*>(this)->trainable()) {
    out.emplace_back(name, t);
  }
  return out;
}

EmbedderVars make_vars(ad::Tape& tape, const EmbedderParams& params, bool trainable) {
  const bool grad = trainable && !params.frozen;
  EmbedderVars v;
  v.extractor_weights = tape.leaf(params.extractor_weights, grad);
  v.extractor_bias = tape.leaf(params.extractor_bias, grad);
  const bool vlad_grad = grad && params.config.aggregator == Aggregator::NetVLAD;
  v.vlad_centroids = tape.leaf(params.vlad_centroids, vlad_grad);
  v.vlad_assign_weights = tape.leaf(params.vlad_assign_weights, vlad_grad);
  v.vlad_assign_bias = tape.leaf(params.vlad_assign_bias, vlad_grad);
  v.vlad_projection = tape.leaf(params.vlad_projection, false);
  v.named = {{"extractor_weights", v.extractor_weights},
             {"extractor_bias", v.extractor_bias}};
  if (params.config.aggregator == Aggregator::NetVLAD) {
    v.named.emplace_back("vlad_centroids", v.vlad_centroids);
    v.named.emplace_back("vlad_assign_weights", v.vlad_assign_weights);
    v.named.emplace_back("vlad_assign_bias", v.vlad_assign_bias);
  }
  return v;
}

ad::Var extract_local(ad::Tape& tape, const EmbedderVars& vars, const Tensor& patches) {
  if (patches.rank() != 2) {
    throw ShapeError("extract_local: patches must be [P x F], got " +
                     shape_string(patches.shape()));
  }
  const std::size_t P = patches.rows();
  const std::size_t C = vars.extractor_weights.value().cols();
  ad::Var x = tape.leaf(patches);
  ad::Var ones = tape.leaf(Tensor::full({P, 1}, 1.0));
  // bias broadcast as a rank-1 matmul keeps the backward rule inside matmul
  ad::Var bias_row = ad::reshape(vars.extractor_bias, {1, C});
  return ad::max0(ad::add(ad::matmul(x, vars.extractor_weights), ad::matmul(ones, bias_row)));
}

ad::Var gem_pool(const ad::Var& features, double p) {
  if (p < 1.0) throw DomainError("gem_pool: p must be >= 1");
  ad::Var powed = ad::pow(features, p);
  ad::Var pooled = ad::mean(powed, 0);
  return ad::pow(pooled, 1.0 / p);
}

ad::Var vlad_residuals(ad::Tape& tape, const ad::Var& assignments, const ad::Var& features,
                       const ad::Var& centroids) {
  const std::size_t K = assignments.value().cols();
  const std::size_t C = features.value().cols();
  ad::Var weighted = ad::matmul(ad::transpose(assignments), features);  // [K x C]
  ad::Var mass = ad::reshape(ad::sum(assignments, 0), {K, 1});
  ad::Var ones = tape.leaf(Tensor::full({1, C}, 1.0));
  ad::Var scale = ad::matmul(mass, ones);  // per-cluster assignment mass, broadcast
  return ad::sub(weighted, ad::mul(scale, centroids));
}

ad::Var netvlad_aggregate(ad::Tape& tape, const EmbedderVars& vars, const ad::Var& features) {
  const std::size_t P = features.value().rows();
  const std::size_t K = vars.vlad_centroids.value().rows();
  const std::size_t C = vars.vlad_centroids.value().cols();
  ad::Var ones = tape.leaf(Tensor::full({P, 1}, 1.0));
  ad::Var bias_row = ad::reshape(vars.vlad_assign_bias, {1, K});
  ad::Var logits =
      ad::add(ad::matmul(features, vars.vlad_assign_weights), ad::matmul(ones, bias_row));
  ad::Var assignments = ad::softmax_rows(logits);
  ad::Var residuals = vlad_residuals(tape, assignments, features, vars.vlad_centroids);
  ad::Var intra = ad::l2_normalize_rows(residuals, 1e-12);
  ad::Var flat = ad::reshape(intra, {1, K * C});
  ad::Var projected = ad::matmul(flat, vars.vlad_projection);
  return ad::reshape(projected, {projected.value().cols()});
}

ad::Var embed_on_tape(ad::Tape& tape, const EmbedderVars& vars, const EmbedderConfig& config,
                      const Tensor& patches) {
  ad::Var features = extract_local(tape, vars, patches);
  ad::Var global = config.aggregator == Aggregator::GeM
                       ? gem_pool(features, config.gem_p)
                       : netvlad_aggregate(tape, vars, features);
  return ad::l2_normalize(global);
}

GlobalDescriptor embed(const EmbedderParams& params, const Observation& obs) {
  ad::Tape tape;
  EmbedderVars vars = make_vars(tape, params, false);
  ad::Var desc = embed_on_tape(tape, vars, params.config, obs.patches);
  return GlobalDescriptor{desc.value(), obs.tag};
}

void save_checkpoint(const std::filesystem::path& path, const EmbedderParams& params,
                     const io::NamedTensors& extras) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  io::NamedTensors tensors;
  tensors.add("gem_p", Tensor::scalar(params.config.gem_p));
  tensors.add("patch_slots", Tensor::scalar(static_cast<double>(params.config.patch_slots)));
  tensors.add("descriptor_dim",
              Tensor::scalar(static_cast<double>(params.config.descriptor_dim)));
  tensors.add("extractor_weights", params.extractor_weights);
  tensors.add("extractor_bias", params.extractor_bias);
  tensors.add("vlad_centroids", params.vlad_centroids);
  tensors.add("vlad_assign_weights", params.vlad_assign_weights);
  tensors.add("vlad_assign_bias", params.vlad_assign_bias);
  tensors.add("vlad_projection", params.vlad_projection);
  for (const auto& [name, t] : extras.items) tensors.add(name, t);
  io::write_checkpoint(out, static_cast<std::uint8_t>(params.config.aggregator), tensors);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  io::NamedTensors tensors;
  const std::uint8_t kind = io::read_checkpoint(in, tensors);
  if (kind > 1) {
    throw FormatError("unknown aggregator kind " + std::to_string(kind), 8);
  }

  LoadedCheckpoint loaded;
  EmbedderParams& p = loaded.params;
  const auto need = [&](const std::string& name) -> const Tensor& {
    const Tensor* t = tensors.find(name);
    if (!t) throw FormatError("checkpoint missing tensor '" + name + "'", 9);
    return *t;
  };
  p.extractor_weights = need("extractor_weights");
  p.extractor_bias = need("extractor_bias");
  p.vlad_centroids = need("vlad_centroids");
  p.vlad_assign_weights = need("vlad_assign_weights");
  p.vlad_assign_bias = need("vlad_assign_bias");
  p.vlad_projection = need("vlad_projection");
  p.config.aggregator = static_cast<Aggregator>(kind);
  p.config.gem_p = need("gem_p").at(0);
  p.config.patch_slots = static_cast<std::size_t>(need("patch_slots").at(0));
  p.config.descriptor_dim = static_cast<std::size_t>(need("descriptor_dim").at(0));
  p.config.raw_channels = p.extractor_weights.rows();
  p.config.local_channels = p.extractor_weights.cols();
  p.config.vlad_clusters = p.vlad_centroids.rows();
  validate_config(p.config);
  for (auto& [name, t] : p.trainable()) {
    (void)name;
    t->requires_grad = true;
  }
  for (const auto& [name, t] : tensors.items) {
    if (name.rfind("omega.", 0) == 0) loaded.extras.add(name, t);
  }
  return loaded;
}

}  // namespace viper
