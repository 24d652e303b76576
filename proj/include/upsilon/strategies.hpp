#pragma once

// Ground-truth OOD labeling strategies used by the analysis harness. These
// read the hidden OOD flags and are never part of the training method itself.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "upsilon/label_space.hpp"

namespace upsilon {

enum class StrategyKind { Baseline, ReAssigned, OpenSet, Oracle };

// OOD class rank r (0-based among OOD classes) -> ID class map[r].
struct ReassignMap {
  std::vector<std::size_t> targets;
  friend bool operator==(const ReassignMap&, const ReassignMap&) = default;
  friend auto operator<=>(const ReassignMap&, const ReassignMap&) = default;
};

struct Strategy {
  StrategyKind kind = StrategyKind::Baseline;
  ReassignMap reassign;  // used by ReAssigned only
};

// ground_truth holds global class ids: ID classes in [0, k_id), OOD classes
// from k_id upwards. Only samples with ood_mask set are labeled:
//   Baseline   -> nothing
//   ReAssigned -> targets[gt - k_id]
//   OpenSet    -> k_id
//   Oracle     -> k_id + rank of gt among the distinct OOD classes present
PseudoLabelSet label_ood(std::span<const std::size_t> ground_truth, const std::vector<bool>& ood_mask,
                         const Strategy& strategy, const LabelSpace& ls);

// Up to `count` distinct injective OOD->ID maps. When count reaches the number
// of injective maps A(k_id, k_ood), all of them are returned in lexicographic
// order; otherwise distinct maps are drawn uniformly with the seed.
std::vector<ReassignMap> sample_reassignments(std::size_t k_id, std::size_t k_ood, std::size_t count,
                                              std::uint64_t seed);

std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(std::string_view name);

}  // namespace upsilon
