#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <vector>

#include "viper/mining.hpp"
#include "viper/observation.hpp"
#include "viper/rng.hpp"

namespace viper {

struct BankConfig {
  std::size_t sensory_capacity = 50;   // l_sn
  std::size_t working_capacity = 40;   // l_wk
  std::size_t longterm_capacity = 10;  // l_lt
  double omega = 0.5;                  // long-term refresh ratio at boundaries
};

// Three-stage rehearsal memory: a sensory FIFO for the most recent stream, a
// probabilistically retained working list for the current environment, and an
// environment-agnostic long-term list merged at boundaries.
class MemoryBank {
 public:
  MemoryBank(BankConfig config, std::uint64_t seed);

  // Pushes onto the sensory FIFO; the evicted item (if any) is the working
  // memory candidate, accepted with probability l_wk / num_seen once full.
  void insert(const Observation& obs);

  // Environment boundary: rebuild long-term memory from round(omega * l_lt)
  // working items plus old long-term items, then clear the per-environment
  // stages and reset the counter. Caller invokes this exactly once per
  // boundary.
  void transition();

  std::size_t size() const { return sensory_.size() + working_.size() + longterm_.size(); }
  bool empty() const { return size() == 0; }
  std::size_t num_seen() const { return num_seen_; }
  const BankConfig& config() const { return cfg_; }

  const std::deque<Observation>& sensory() const { return sensory_; }
  const std::vector<Observation>& working() const { return working_; }
  const std::vector<Observation>& longterm() const { return longterm_; }

  // Stage order: sensory, working, long-term.
  std::vector<const Observation*> all_items() const;

  // One JSON record per stored observation: {stage, env_id, place_id, seq_index}.
  void dump_jsonl(std::ostream& out) const;

  void reseed(std::uint64_t seed) { rng_ = rng::Engine(seed); }

 private:
  BankConfig cfg_;
  std::deque<Observation> sensory_;
  std::vector<Observation> working_;
  std::vector<Observation> longterm_;
  std::size_t num_seen_ = 0;
  rng::Engine rng_;
};

// Ablation baseline: plain FIFO over everything, no stages, no boundary
// behavior. Capacity matches the bank's total for fair comparison.
class NaiveQueue {
 public:
  explicit NaiveQueue(std::size_t capacity);
  void insert(const Observation& obs);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Observation>& items() const { return items_; }
  std::vector<const Observation*> all_items() const;
  void dump_jsonl(std::ostream& out) const;

 private:
  std::size_t capacity_;
  std::deque<Observation> items_;
};

// Draws a rehearsal triplet: anchor uniform over the union of all stages,
// positives/negatives among stored items per the labeler. Returns nothing when
// the bank cannot supply at least one positive and one negative.
std::optional<Triplet> sample_rehearsal(const MemoryBank& bank, const PairLabeler& labeler,
                                        rng::Engine& rng, std::size_t m, std::size_t n);

}  // namespace viper
