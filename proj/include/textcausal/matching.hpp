#pragma once

// Optimal full matching: partition units into sets of one treated unit with
// one or more controls, or one control with one or more treated units, so
// that the summed center-to-member distance is minimal.
//
// The optimum is a minimum-cost edge cover of the bipartite treated/control
// graph. It is found as Σ_v m(v) minus a maximum-weight matching with edge
// gains m(i) + m(j) - d(i, j), where m(v) is v's cheapest incident edge. The
// matching is solved by successive shortest paths on the positive-gain edges,
// one connected component at a time.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace textcausal {

struct MatchedSet {
  std::vector<std::size_t> treated;   // unit indices as passed in
  std::vector<std::size_t> control;
  double cost = 0.0;
};

struct MatchedGroups {
  std::vector<MatchedSet> sets;
  double total_cost = 0.0;
  std::size_t dropped = 0;            // units in a problem without both arms
  std::size_t greedy_components = 0;  // components solved by the greedy fallback
};

struct MatchingOptions {
  // Positive-gain edges kept per unit (0 keeps all); the solution is exact
  // whenever no unit has more candidates than this.
  std::size_t max_candidates = 16;
  // Components with more units than this use the greedy nearest-neighbour cover.
  std::size_t exact_limit = 20000;
};

using DistanceFn = std::function<double(std::size_t, std::size_t)>;

// treated[i] marks unit i; distance(i, j) must be symmetric and nonnegative.
// Throws std::invalid_argument on a negative or non-finite distance.
MatchedGroups full_match(std::span<const int> treated, const DistanceFn& distance,
                         const MatchingOptions& options = {});

// Every unit joined to its nearest opposite-arm unit, then reduced to stars.
MatchedGroups greedy_match(std::span<const int> treated, const DistanceFn& distance);

// Unit-count-weighted mean over sets of (mean treated outcome − mean control outcome).
double matched_effect(const MatchedGroups& groups, std::span<const int> outcome);

// Structural check: sets disjoint, each with both arms, one side a single
// unit, cost equal to the summed center distances. Returns an empty string
// when valid, otherwise a description of the first violation.
std::string check_matched_groups(const MatchedGroups& groups, std::span<const int> treated,
                                 const DistanceFn& distance, double tol = 1e-9);

}  // namespace textcausal
