#include "upsilon/strategies.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

namespace upsilon {

namespace {

std::size_t count_injective_maps(std::size_t k_id, std::size_t k_ood, std::size_t cap) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < k_ood; ++i) {
    total *= (k_id - i);
    if (total > cap) return cap + 1;
  }
  return total;
}

void enumerate_maps(std::size_t k_id, std::size_t k_ood, std::vector<std::size_t>& prefix, std::vector<bool>& used,
                    std::vector<ReassignMap>& out) {
  if (prefix.size() == k_ood) {
    out.push_back({prefix});
    return;
  }
  for (std::size_t y = 0; y < k_id; ++y) {
    if (used[y]) continue;
    used[y] = true;
    prefix.push_back(y);
    enumerate_maps(k_id, k_ood, prefix, used, out);
    prefix.pop_back();
    used[y] = false;
  }
}

}  // namespace

PseudoLabelSet label_ood(std::span<const std::size_t> ground_truth, const std::vector<bool>& ood_mask,
                         const Strategy& strategy, const LabelSpace& ls) {
  if (ground_truth.size() != ood_mask.size()) throw DimensionError("ground truth and OOD mask lengths differ");
  PseudoLabelSet out(ls.total());

  std::map<std::size_t, std::size_t> ood_rank;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (!ood_mask[i]) continue;
    if (ground_truth[i] < ls.k_id()) {
      throw std::invalid_argument("sample " + std::to_string(i) + " is flagged OOD but has ID class " +
                                  std::to_string(ground_truth[i]));
    }
    ood_rank.emplace(ground_truth[i], 0);
  }
  std::size_t next = 0;
  for (auto& [cls, rank] : ood_rank) rank = next++;

  switch (strategy.kind) {
    case StrategyKind::Baseline:
      return out;
    case StrategyKind::ReAssigned: {
      const auto& targets = strategy.reassign.targets;
      std::set<std::size_t> distinct(targets.begin(), targets.end());
      if (distinct.size() != targets.size()) throw std::invalid_argument("re-assignment map is not injective");
      for (auto t : targets) {
        if (t >= ls.k_id()) throw std::invalid_argument("re-assignment target outside ID classes");
      }
      for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        if (!ood_mask[i]) continue;
        const std::size_t ood_index = ground_truth[i] - ls.k_id();
        if (ood_index >= targets.size()) {
          throw std::invalid_argument("re-assignment map has no entry for OOD class " + std::to_string(ground_truth[i]));
        }
        out.add(i, targets[ood_index]);
      }
      return out;
    }
    case StrategyKind::OpenSet:
      if (ls.k_extra() < 1) throw std::invalid_argument("open-set labeling needs k_extra >= 1");
      for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        if (ood_mask[i]) out.add(i, ls.k_id());
      }
      return out;
    case StrategyKind::Oracle:
      if (ls.k_extra() < ood_rank.size()) {
        throw std::invalid_argument("oracle labeling needs k_extra >= " + std::to_string(ood_rank.size()) +
                                    " (distinct OOD classes), got " + std::to_string(ls.k_extra()));
      }
      for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        if (ood_mask[i]) out.add(i, ls.k_id() + ood_rank.at(ground_truth[i]));
      }
      return out;
  }
  return out;
}

std::vector<ReassignMap> sample_reassignments(std::size_t k_id, std::size_t k_ood, std::size_t count,
                                              std::uint64_t seed) {
  if (k_ood > k_id) throw std::invalid_argument("re-assignment needs k_ood <= k_id");
  std::vector<ReassignMap> out;
  if (count == 0) return out;
  const std::size_t available = count_injective_maps(k_id, k_ood, count);
  if (available <= count) {
    std::vector<std::size_t> prefix;
    std::vector<bool> used(k_id, false);
    enumerate_maps(k_id, k_ood, prefix, used, out);
    return out;
  }

  std::mt19937_64 rng(seed);
  std::set<ReassignMap> seen;
  std::vector<std::size_t> perm(k_id);
  while (out.size() < count) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    ReassignMap map{std::vector<std::size_t>(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k_ood))};
    if (seen.insert(map).second) out.push_back(std::move(map));
  }
  return out;
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Baseline: return "Baseline";
    case StrategyKind::ReAssigned: return "ReAssigned";
    case StrategyKind::OpenSet: return "OpenSet";
    case StrategyKind::Oracle: return "Oracle";
  }
  return "?";
}

StrategyKind parse_strategy_kind(std::string_view name) {
  if (name == "Baseline") return StrategyKind::Baseline;
  if (name == "ReAssigned") return StrategyKind::ReAssigned;
  if (name == "OpenSet") return StrategyKind::OpenSet;
  if (name == "Oracle") return StrategyKind::Oracle;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

}  // namespace upsilon
