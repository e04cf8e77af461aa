#include "viper/regularizers.hpp"

#include <cmath>

namespace viper {

Tensor* ImportanceMap::find(const std::string& name) {
  for (auto& [n, t] : omega) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor* ImportanceMap::find(const std::string& name) const {
  return const_cast<ImportanceMap*>(this)->find(name);
}

ad::Var gram_matrix(const ad::Var& anchor, const ad::Var& positive, const ad::Var& negative) {
  ad::Var stacked = ad::stack_rows({anchor, positive, negative});  // [3 x d]
  return ad::matmul(stacked, ad::transpose(stacked));
}

void rmas_accumulate(ImportanceMap& imp,
                     const std::vector<std::pair<std::string, Tensor>>& grads) {
  const double n = static_cast<double>(imp.step_count);
  const double inv = 1.0 / (n + 1.0);
  // existing entries decay as if their gradient this step were zero
  for (auto& [name, t] : imp.omega) {
    (void)name;
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) *= n * inv;
  }
  for (const auto& [name, g] : grads) {
    Tensor* slot = imp.find(name);
    if (!slot) {
      imp.omega.emplace_back(name, Tensor::zeros_like(g));
      slot = &imp.omega.back().second;
    }
    if (!slot->same_shape(g)) {
      throw ShapeError("rmas_accumulate: gradient shape mismatch for '" + name + "'");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      slot->at(i) += g.at(i) * g.at(i) * inv;
    }
  }
  imp.step_count += 1;
}

ad::Var rmas_loss(ad::Tape& tape, const std::vector<std::pair<std::string, ad::Var>>& current,
                  const FrozenReference& ref) {
  ad::Var total = tape.leaf(Tensor::scalar(0.0));
  const auto prev_named = ref.params_prev.trainable();
  for (const auto& [name, var] : current) {
    const Tensor* prev = nullptr;
    for (const auto& [pname, pt] : prev_named) {
      if (pname == name) {
        prev = pt;
        break;
      }
    }
    if (!prev) throw ShapeError("rmas_loss: reference missing parameter '" + name + "'");
    const Tensor* omega = ref.importance_prev.find(name);
    if (!omega) continue;  // zero importance contributes nothing
    if (!prev->same_shape(var.value()) || !omega->same_shape(var.value())) {
      throw ShapeError("rmas_loss: shape mismatch for '" + name + "'");
    }
    ad::Var drift = ad::sub(var, tape.leaf(*prev));
    ad::Var weighted = ad::mul(ad::mul(drift, drift), tape.leaf(*omega));
    total = ad::add(total, ad::sum(weighted));
  }
  return total;
}

ad::Var pkd_similarity_matrix(const std::vector<ad::Var>& descriptors) {
  if (descriptors.size() < 2) {
    throw ContractError("pkd_similarity_matrix: need at least 2 descriptors");
  }
  const std::size_t d = descriptors[0].value().size();
  ad::Var stacked = ad::stack_rows(descriptors);
  ad::Var gram = ad::matmul(stacked, ad::transpose(stacked));
  return ad::mul(gram, 1.0 / std::sqrt(static_cast<double>(d)));
}

Tensor pkd_similarity_matrix(const std::vector<Tensor>& descriptors) {
  if (descriptors.size() < 2) {
    throw ContractError("pkd_similarity_matrix: need at least 2 descriptors");
  }
  const std::size_t d = descriptors[0].size();
  std::vector<const Tensor*> rows;
  rows.reserve(descriptors.size());
  for (const Tensor& t : descriptors) rows.push_back(&t);
  const Tensor stacked = ops::stack_rows(rows);
  const Tensor gram = ops::matmul(stacked, ops::transpose(stacked));
  return ops::mul_scalar(gram, 1.0 / std::sqrt(static_cast<double>(d)));
}

ad::Var pkd_loss(ad::Tape& tape, const Tensor& h_prev, const ad::Var& h_curr) {
  if (!h_prev.same_shape(h_curr.value())) {
    throw ShapeError("pkd_loss: H matrices must have identical shape");
  }
  const Tensor log_p = ops::log_softmax_rows(h_prev);
  const Tensor p = ops::exp(log_p);
  ad::Var log_q = ad::log_softmax_rows(h_curr);
  ad::Var diff = ad::sub(tape.leaf(log_p), log_q);
  return ad::sum(ad::mul(tape.leaf(p), diff));
}

double pkd_loss(const Tensor& h_prev, const Tensor& h_curr) {
  if (!h_prev.same_shape(h_curr)) {
    throw ShapeError("pkd_loss: H matrices must have identical shape");
  }
  const Tensor log_p = ops::log_softmax_rows(h_prev);
  const Tensor p = ops::exp(log_p);
  const Tensor log_q = ops::log_softmax_rows(h_curr);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p.at(i) * (log_p.at(i) - log_q.at(i));
  }
  return acc;
}

}  // namespace viper
