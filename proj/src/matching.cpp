#include "textcausal/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>

namespace textcausal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  std::size_t t;  // index into treated list
  std::size_t c;  // index into control list
  double d;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

// Maximum-weight bipartite matching by successive shortest paths.
// Returns for each left vertex the matched right vertex or npos.
std::vector<std::size_t> max_weight_matching(std::size_t n_left, std::size_t n_right,
                                             const std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>>& edges) {
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  struct Arc {
    std::size_t to;
    std::size_t rev;
    int cap;
    double cost;
  };
  const std::size_t n = n_left + n_right + 2;
  const std::size_t s = n - 2, t = n - 1;
  std::vector<std::vector<Arc>> g(n);
  auto add = [&](std::size_t u, std::size_t v, double cost) {
    g[u].push_back({v, g[v].size(), 1, cost});
    g[v].push_back({u, g[u].size() - 1, 0, -cost});
  };
  for (std::size_t l = 0; l < n_left; ++l) add(s, l, 0.0);
  for (const auto& [lr, w] : edges) add(lr.first, n_left + lr.second, -w);
  for (std::size_t r = 0; r < n_right; ++r) add(n_left + r, t, 0.0);

  // Feasible initial potentials for the layered graph.
  std::vector<double> pot(n, 0.0);
  for (const auto& [lr, w] : edges) pot[n_left + lr.second] = std::min(pot[n_left + lr.second], -w);
  for (std::size_t r = 0; r < n_right; ++r) pot[t] = std::min(pot[t], pot[n_left + r]);

  std::vector<double> dist(n);
  std::vector<std::size_t> prev_node(n), prev_arc(n);
  std::vector<char> done(n);
  using Item = std::pair<double, std::size_t>;
  for (;;) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[s] = 0.0;
    pq.push({0.0, s});
    while (!pq.empty()) {
      const auto [du, u] = pq.top();
      pq.pop();
      if (done[u]) continue;
      done[u] = 1;
      if (u == t) break;
      for (std::size_t k = 0; k < g[u].size(); ++k) {
        const Arc& a = g[u][k];
        if (a.cap <= 0 || done[a.to]) continue;
        const double rc = std::max(0.0, a.cost + pot[u] - pot[a.to]);
        if (du + rc < dist[a.to]) {
          dist[a.to] = du + rc;
          prev_node[a.to] = u;
          prev_arc[a.to] = k;
          pq.push({dist[a.to], a.to});
        }
      }
    }
    if (!done[t]) break;
    const double path_cost = dist[t] + pot[t] - pot[s];
    if (path_cost >= -1e-12) break;
    for (std::size_t v = 0; v < n; ++v) pot[v] += std::min(dist[v], dist[t]);
    for (std::size_t v = t; v != s; v = prev_node[v]) {
      Arc& a = g[prev_node[v]][prev_arc[v]];
      a.cap -= 1;
      g[v][a.rev].cap += 1;
    }
  }
  std::vector<std::size_t> match(n_left, npos);
  for (std::size_t l = 0; l < n_left; ++l) {
    for (const Arc& a : g[l]) {
      if (a.to >= n_left && a.to < n_left + n_right && a.cap == 0) match[l] = a.to - n_left;
    }
  }
  return match;
}

// Drops edges whose endpoints are both covered twice, then turns the
// remaining star forest into sets.
MatchedGroups stars_from_cover(std::vector<Edge> cover, const std::vector<std::size_t>& treated_ids,
                               const std::vector<std::size_t>& control_ids) {
  std::sort(cover.begin(), cover.end(), [](const Edge& a, const Edge& b) {
    if (a.d != b.d) return a.d > b.d;
    return std::tie(a.t, a.c) < std::tie(b.t, b.c);
  });
  cover.erase(std::unique(cover.begin(), cover.end(),
                          [](const Edge& a, const Edge& b) { return a.t == b.t && a.c == b.c; }),
              cover.end());
  std::vector<std::size_t> deg_t(treated_ids.size()), deg_c(control_ids.size());
  for (const auto& e : cover) {
    ++deg_t[e.t];
    ++deg_c[e.c];
  }
  std::vector<Edge> kept;
  for (const auto& e : cover) {  // most expensive first
    if (deg_t[e.t] >= 2 && deg_c[e.c] >= 2) {
      --deg_t[e.t];
      --deg_c[e.c];
    } else {
      kept.push_back(e);
    }
  }
  // After pruning, every edge has an endpoint of degree one: the graph is a
  // forest of stars. Group by the center (the endpoint of larger degree).
  std::map<std::pair<int, std::size_t>, MatchedSet> by_center;
  for (const auto& e : kept) {
    const bool treated_center = deg_t[e.t] > 1 || (deg_t[e.t] == 1 && deg_c[e.c] == 1);
    auto& set = by_center[treated_center ? std::make_pair(1, e.t) : std::make_pair(0, e.c)];
    if (treated_center) {
      if (set.treated.empty()) set.treated.push_back(treated_ids[e.t]);
      set.control.push_back(control_ids[e.c]);
    } else {
      if (set.control.empty()) set.control.push_back(control_ids[e.c]);
      set.treated.push_back(treated_ids[e.t]);
    }
    set.cost += e.d;
  }
  MatchedGroups out;
  for (auto& [key, set] : by_center) {
    std::sort(set.treated.begin(), set.treated.end());
    std::sort(set.control.begin(), set.control.end());
    out.total_cost += set.cost;
    out.sets.push_back(std::move(set));
  }
  std::sort(out.sets.begin(), out.sets.end(), [](const MatchedSet& a, const MatchedSet& b) {
    return std::min(a.treated.front(), a.control.front()) < std::min(b.treated.front(), b.control.front());
  });
  return out;
}

struct Problem {
  std::vector<std::size_t> treated_ids;
  std::vector<std::size_t> control_ids;
};

Problem split_arms(std::span<const int> treated) {
  Problem p;
  for (std::size_t i = 0; i < treated.size(); ++i) (treated[i] ? p.treated_ids : p.control_ids).push_back(i);
  return p;
}

double checked(double d) {
  if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("matching distance must be finite and nonnegative");
  return d;
}

MatchedGroups single_set(const Problem& p) {
  MatchedGroups out;
  out.sets.push_back({p.treated_ids, p.control_ids, 0.0});
  return out;
}

}  // namespace

MatchedGroups greedy_match(std::span<const int> treated, const DistanceFn& distance) {
  const Problem p = split_arms(treated);
  if (p.treated_ids.empty() || p.control_ids.empty()) {
    MatchedGroups out;
    out.dropped = treated.size();
    return out;
  }
  const std::size_t nt = p.treated_ids.size(), nc = p.control_ids.size();
  std::vector<Edge> best_t(nt, Edge{0, 0, kInf}), best_c(nc, Edge{0, 0, kInf});
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      const double d = checked(distance(p.treated_ids[i], p.control_ids[j]));
      if (d < best_t[i].d) best_t[i] = {i, j, d};
      if (d < best_c[j].d) best_c[j] = {i, j, d};
    }
  }
  std::vector<Edge> cover(best_t);
  cover.insert(cover.end(), best_c.begin(), best_c.end());
  return stars_from_cover(std::move(cover), p.treated_ids, p.control_ids);
}

MatchedGroups full_match(std::span<const int> treated, const DistanceFn& distance, const MatchingOptions& options) {
  const Problem p = split_arms(treated);
  if (p.treated_ids.empty() || p.control_ids.empty()) {
    MatchedGroups out;
    out.dropped = treated.size();
    return out;
  }
  const std::size_t nt = p.treated_ids.size(), nc = p.control_ids.size();

  std::vector<double> d(nt * nc);
  std::vector<double> m_t(nt, kInf), m_c(nc, kInf);
  std::vector<std::size_t> arg_t(nt), arg_c(nc);
  double max_d = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      const double v = checked(distance(p.treated_ids[i], p.control_ids[j]));
      d[i * nc + j] = v;
      max_d = std::max(max_d, v);
      if (v < m_t[i]) m_t[i] = v, arg_t[i] = j;
      if (v < m_c[j]) m_c[j] = v, arg_c[j] = i;
    }
  }
  // Indistinguishable units: one set holding everybody.
  if (max_d == 0.0) return single_set(p);

  // Positive-gain candidate edges, at most max_candidates per unit.
  auto gain = [&](std::size_t i, std::size_t j) { return m_t[i] + m_c[j] - d[i * nc + j]; };
  std::vector<std::vector<std::size_t>> cand_t(nt), cand_c(nc);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      if (gain(i, j) > 0) {
        cand_t[i].push_back(j);
        cand_c[j].push_back(i);
      }
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> edge_set;
  const std::size_t cap = options.max_candidates;
  for (std::size_t i = 0; i < nt; ++i) {
    auto& v = cand_t[i];
    if (cap && v.size() > cap) {
      std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cap), v.end(),
                        [&](std::size_t a, std::size_t b) { return gain(i, a) > gain(i, b) || (gain(i, a) == gain(i, b) && a < b); });
      v.resize(cap);
    }
    for (std::size_t j : v) edge_set.insert({i, j});
  }
  for (std::size_t j = 0; j < nc; ++j) {
    auto& v = cand_c[j];
    if (cap && v.size() > cap) {
      std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cap), v.end(),
                        [&](std::size_t a, std::size_t b) { return gain(a, j) > gain(b, j) || (gain(a, j) == gain(b, j) && a < b); });
      v.resize(cap);
    }
    for (std::size_t i : v) edge_set.insert({i, j});
  }

  // Connected components over candidate edges (controls offset by nt).
  UnionFind uf(nt + nc);
  for (const auto& [i, j] : edge_set) uf.unite(i, nt + j);
  std::map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> comp_edges;
  for (const auto& e : edge_set) comp_edges[uf.find(e.first)].push_back(e);

  MatchedGroups result;
  std::vector<char> matched_t(nt, 0), matched_c(nc, 0);
  std::vector<Edge> cover;
  for (auto& [root, edges] : comp_edges) {
    std::vector<std::size_t> lt, lc;  // component-local to global arm index
    std::map<std::size_t, std::size_t> mt, mc;
    for (const auto& [i, j] : edges) {
      if (mt.emplace(i, lt.size()).second) lt.push_back(i);
      if (mc.emplace(j, lc.size()).second) lc.push_back(j);
    }
    if (lt.size() + lc.size() > options.exact_limit) {
      ++result.greedy_components;
      continue;  // vertices fall back to their cheapest edge below
    }
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> local;
    local.reserve(edges.size());
    for (const auto& [i, j] : edges) local.push_back({{mt[i], mc[j]}, gain(i, j)});
    const auto match = max_weight_matching(lt.size(), lc.size(), local);
    for (std::size_t l = 0; l < match.size(); ++l) {
      if (match[l] == std::numeric_limits<std::size_t>::max()) continue;
      const std::size_t i = lt[l], j = lc[match[l]];
      cover.push_back({i, j, d[i * nc + j]});
      matched_t[i] = matched_c[j] = 1;
    }
  }
  for (std::size_t i = 0; i < nt; ++i) {
    if (!matched_t[i]) cover.push_back({i, arg_t[i], m_t[i]});
  }
  for (std::size_t j = 0; j < nc; ++j) {
    if (!matched_c[j]) cover.push_back({arg_c[j], j, m_c[j]});
  }
  MatchedGroups stars = stars_from_cover(std::move(cover), p.treated_ids, p.control_ids);
  stars.greedy_components = result.greedy_components;
  return stars;
}

double matched_effect(const MatchedGroups& groups, std::span<const int> outcome) {
  double num = 0.0, units = 0.0;
  for (const auto& s : groups.sets) {
    if (s.treated.empty() || s.control.empty()) continue;
    double yt = 0.0, yc = 0.0;
    for (std::size_t i : s.treated) yt += outcome[i];
    for (std::size_t j : s.control) yc += outcome[j];
    const double size = static_cast<double>(s.treated.size() + s.control.size());
    num += size * (yt / static_cast<double>(s.treated.size()) - yc / static_cast<double>(s.control.size()));
    units += size;
  }
  if (units == 0.0) throw std::invalid_argument("no matched sets to estimate from");
  return num / units;
}

std::string check_matched_groups(const MatchedGroups& groups, std::span<const int> treated,
                                 const DistanceFn& distance, double tol) {
  std::vector<char> seen(treated.size(), 0);
  double total = 0.0;
  for (std::size_t k = 0; k < groups.sets.size(); ++k) {
    const auto& s = groups.sets[k];
    const std::string where = "set " + std::to_string(k) + ": ";
    if (s.treated.empty() || s.control.empty()) return where + "missing an arm";
    for (std::size_t i : s.treated) {
      if (i >= treated.size() || !treated[i]) return where + "unit in the wrong arm";
      if (seen[i]++) return where + "unit " + std::to_string(i) + " appears twice";
    }
    for (std::size_t j : s.control) {
      if (j >= treated.size() || treated[j]) return where + "unit in the wrong arm";
      if (seen[j]++) return where + "unit " + std::to_string(j) + " appears twice";
    }
    if (groups.total_cost == 0.0 && s.cost == 0.0) continue;
    if (s.treated.size() > 1 && s.control.size() > 1) return where + "not a star";
    double cost = 0.0;
    if (s.treated.size() == 1) {
      for (std::size_t j : s.control) cost += distance(s.treated[0], j);
    } else {
      for (std::size_t i : s.treated) cost += distance(i, s.control[0]);
    }
    if (std::abs(cost - s.cost) > tol) return where + "cost mismatch";
    total += s.cost;
  }
  if (std::abs(total - groups.total_cost) > tol * std::max<double>(1.0, groups.sets.size())) {
    return "total cost mismatch";
  }
  return {};
}

}  // namespace textcausal
