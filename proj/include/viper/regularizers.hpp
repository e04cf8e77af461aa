#pragma once

#include <string>
#include <utility>
#include <vector>

#include "viper/autodiff.hpp"
#include "viper/embedder.hpp"
#include "viper/observation.hpp"

namespace viper {

// Per-parameter importance: running mean of squared gradients of the Gram
// Frobenius norm, one tensor per trainable parameter.
struct ImportanceMap {
  std::vector<std::pair<std::string, Tensor>> omega;
  std::size_t step_count = 0;

  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
};

// Frozen state carried across an environment boundary: the snapshot the
// regularizers pull toward, and the importance weights accumulated before it.
struct FrozenReference {
  EmbedderParams params_prev;
  ImportanceMap importance_prev;
};

// 3x3 matrix of pairwise cosine similarities among anchor, selected positive,
// and selected negative descriptors (all unit-norm, all differentiable).
ad::Var gram_matrix(const ad::Var& anchor, const ad::Var& positive, const ad::Var& negative);

// Running mean update: omega <- (omega * N + g^2) / (N + 1). Parameters
// absent from `grads` decay as if their gradient were zero.
void rmas_accumulate(ImportanceMap& imp,
                     const std::vector<std::pair<std::string, Tensor>>& grads);

// Importance-weighted squared drift from the frozen snapshot, summed over all
// named parameters. Gradient flows into the current parameters only.
ad::Var rmas_loss(ad::Tape& tape, const std::vector<std::pair<std::string, ad::Var>>& current,
                  const FrozenReference& ref);

// Pairwise similarity matrix H[i][j] = g_i . g_j / sqrt(d) over a batch of
// descriptors from one model.
ad::Var pkd_similarity_matrix(const std::vector<ad::Var>& descriptors);
Tensor pkd_similarity_matrix(const std::vector<Tensor>& descriptors);

// Row-wise KL(softmax(H_prev) || softmax(H_curr)), summed over rows. H_prev
// comes from the frozen model and carries no gradient.
ad::Var pkd_loss(ad::Tape& tape, const Tensor& h_prev, const ad::Var& h_curr);
double pkd_loss(const Tensor& h_prev, const Tensor& h_curr);

}  // namespace viper
