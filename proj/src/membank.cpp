#include "viper/membank.hpp"

#include <cmath>
#include <cstdio>

namespace viper {
namespace {

void dump_record(std::ostream& out, const char* stage, const PlaceTag& tag) {
  char line[160];
  std::snprintf(line, sizeof(line),
                "{\"stage\":\"%s\",\"env_id\":%u,\"place_id\":%u,\"seq_index\":%u}\n", stage,
                tag.env_id, tag.place_id, tag.seq_index);
  out << line;
}

}  // namespace

MemoryBank::MemoryBank(BankConfig config, std::uint64_t seed)
    : cfg_(config), rng_(seed) {
  if (cfg_.sensory_capacity == 0 || cfg_.working_capacity == 0 ||
      cfg_.longterm_capacity == 0) {
    throw ContractError("membank: stage capacities must be positive");
  }
  if (cfg_.omega < 0.0 || cfg_.omega > 1.0) {
    throw ContractError("membank: omega must be in [0, 1]");
  }
}

void MemoryBank::insert(const Observation& obs) {
  ++num_seen_;
  sensory_.push_back(obs);
  if (sensory_.size() <= cfg_.sensory_capacity) return;

  Observation candidate = std::move(sensory_.front());
  sensory_.pop_front();
  if (working_.size() < cfg_.working_capacity) {
    working_.push_back(std::move(candidate));
    return;
  }
  // acceptance probability decays as the stream grows, preserving early items
  const double p =
      static_cast<double>(cfg_.working_capacity) / static_cast<double>(num_seen_);
  if (rng_.uniform01() < p) {
    working_[rng_.below(working_.size())] = std::move(candidate);
  }
}

void MemoryBank::transition() {
  const std::size_t cap = cfg_.longterm_capacity;
  const std::size_t want_working =
      static_cast<std::size_t>(std::llround(cfg_.omega * static_cast<double>(cap)));

  // Allocate the omega share from working memory, fill the rest from the old
  // long-term store, then top working back up if the old store ran short.
  std::size_t take_working = std::min(want_working, working_.size());
  const std::size_t take_longterm = std::min(cap - take_working, longterm_.size());
  take_working = std::min(cap - take_longterm, working_.size());

  std::vector<Observation> next;
  next.reserve(take_working + take_longterm);
  for (std::size_t idx : rng_.sample_indices(working_.size(), take_working)) {
    next.push_back(std::move(working_[idx]));
  }
  for (std::size_t idx : rng_.sample_indices(longterm_.size(), take_longterm)) {
    next.push_back(std::move(longterm_[idx]));
  }
  longterm_ = std::move(next);
  working_.clear();
  sensory_.clear();
  num_seen_ = 0;
}

std::vector<const Observation*> MemoryBank::all_items() const {
  std::vector<const Observation*> out;
  out.reserve(size());
  for (const Observation& o : sensory_) out.push_back(&o);
  for (const Observation& o : working_) out.push_back(&o);
  for (const Observation& o : longterm_) out.push_back(&o);
  return out;
}

void MemoryBank::dump_jsonl(std::ostream& out) const {
  for (const Observation& o : sensory_) dump_record(out, "sensory", o.tag);
  for (const Observation& o : working_) dump_record(out, "working", o.tag);
  for (const Observation& o : longterm_) dump_record(out, "longterm", o.tag);
}

NaiveQueue::NaiveQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractError("naive queue: capacity must be positive");
}

void NaiveQueue::insert(const Observation& obs) {
  items_.push_back(obs);
  if (items_.size() > capacity_) items_.pop_front();
}

std::vector<const Observation*> NaiveQueue::all_items() const {
  std::vector<const Observation*> out;
  out.reserve(items_.size());
  for (const Observation& o : items_) out.push_back(&o);
  return out;
}

void NaiveQueue::dump_jsonl(std::ostream& out) const {
  for (const Observation& o : items_) dump_record(out, "queue", o.tag);
}

std::optional<Triplet> sample_rehearsal(const MemoryBank& bank, const PairLabeler& labeler,
                                        rng::Engine& rng, std::size_t m, std::size_t n) {
  if (bank.empty()) return std::nullopt;
  const std::vector<const Observation*> items = bank.all_items();
  const Observation* anchor = items[rng.below(items.size())];

  std::vector<const Observation*> positives, negatives;
  for (const Observation* o : items) {
    if (same_capture(o->tag, anchor->tag)) continue;
    switch (labeler(anchor->tag, o->tag)) {
      case PairLabel::Positive:
        positives.push_back(o);
        break;
      case PairLabel::Negative:
        negatives.push_back(o);
        break;
      case PairLabel::Ignore:
        break;
    }
  }
  if (positives.empty() || negatives.empty()) return std::nullopt;

  Triplet triplet;
  triplet.anchor = *anchor;
  for (std::size_t idx : rng.sample_indices(positives.size(), m)) {
    triplet.positives.push_back(*positives[idx]);
  }
  for (std::size_t idx : rng.sample_indices(negatives.size(), n)) {
    triplet.negatives.push_back(*negatives[idx]);
  }
  return triplet;
}

}  // namespace viper
