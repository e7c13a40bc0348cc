#include "textcausal/structured.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace textcausal {

namespace {

constexpr int kFree = 14;  // p_c, p(u|c=0), 4 treatment, 8 outcome probabilities

double bern(double p1, int v) { return v ? p1 : 1.0 - p1; }

std::string cell_name(const char* prefix, std::initializer_list<std::pair<char, int>> parts) {
  std::string s = prefix;
  for (auto [k, v] : parts) {
    s += '_';
    s += k;
    s += std::to_string(v);
  }
  return s;
}

}  // namespace

double StructuredParams::p_cu(int c, int u) const {
  return bern(p_c, c) * bern(p_u_given_c[static_cast<std::size_t>(c)], u);
}

double StructuredParams::p_u1() const {
  return (1.0 - p_c) * p_u_given_c[0] + p_c * p_u_given_c[1];
}

void StructuredParams::validate() const {
  auto ok = [](double p) { return p > 0.0 && p < 1.0; };
  bool valid = ok(p_c) && std::all_of(p_u_given_c.begin(), p_u_given_c.end(), ok) &&
               std::all_of(p_a_given_cu.begin(), p_a_given_cu.end(), ok) &&
               std::all_of(p_y_given_acu.begin(), p_y_given_acu.end(), ok);
  if (!valid) throw std::invalid_argument("StructuredParams: probabilities must lie strictly inside (0, 1)");
}

KeyValueRecord StructuredParams::to_record() const {
  KeyValueRecord rec;
  rec.set("format", std::string("textcausal.structured.v1"));
  rec.set("seed", std::to_string(seed));
  rec.set("p_c", p_c);
  for (int c = 0; c < 2; ++c) rec.set(cell_name("p_u_given", {{'c', c}}), p_u_given_c[static_cast<std::size_t>(c)]);
  for (int c = 0; c < 2; ++c)
    for (int u = 0; u < 2; ++u) rec.set(cell_name("p_a_given", {{'c', c}, {'u', u}}), a_given(c, u));
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c)
      for (int u = 0; u < 2; ++u)
        rec.set(cell_name("p_y_given", {{'a', a}, {'c', c}, {'u', u}}), y_given(a, c, u));
  return rec;
}

StructuredParams StructuredParams::from_record(const KeyValueRecord& rec) {
  if (rec.get("format") != "textcausal.structured.v1") {
    throw std::runtime_error("structured params: unsupported format '" + rec.get("format") + "'");
  }
  StructuredParams p;
  p.seed = std::stoull(rec.get("seed"));
  p.p_c = rec.get_double("p_c");
  for (int c = 0; c < 2; ++c) p.p_u_given_c[static_cast<std::size_t>(c)] = rec.get_double(cell_name("p_u_given", {{'c', c}}));
  for (int c = 0; c < 2; ++c)
    for (int u = 0; u < 2; ++u) p.a_given(c, u) = rec.get_double(cell_name("p_a_given", {{'c', c}, {'u', u}}));
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c)
      for (int u = 0; u < 2; ++u)
        p.y_given(a, c, u) = rec.get_double(cell_name("p_y_given", {{'a', a}, {'c', c}, {'u', u}}));
  p.validate();
  return p;
}

JointTable JointTable::from_params(const StructuredParams& params) {
  JointTable t;
  for (int u = 0; u < 2; ++u)
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a)
        for (int y = 0; y < 2; ++y)
          t.at(u, c, a, y) = params.p_cu(c, u) * bern(params.a_given(c, u), a) *
                             bern(params.y_given(a, c, u), y);
  return t;
}

JointTable JointTable::from_samples(std::span<const StructuredSample> samples) {
  JointTable t;
  for (const auto& s : samples) t.at(s.u, s.c, s.a, s.y) += 1.0;
  return t;
}

namespace {
std::string level(int v) { return v < 0 ? std::string("*") : std::to_string(v); }
}  // namespace

StratumError::StratumError(int a_, int c_, int u_)
    : std::runtime_error("empty stratum: no records with a=" + level(a_) + ", c=" + level(c_) +
                         ", u=" + level(u_)),
      a(a_),
      c(c_),
      u(u_) {}

double oracle_ate(const StructuredParams& params) {
  double ate = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int u = 0; u < 2; ++u)
      ate += (params.y_given(1, c, u) - params.y_given(0, c, u)) * params.p_cu(c, u);
  return ate;
}

double naive_adjusted_ate(const StructuredParams& params) {
  double ate = 0.0;
  for (int c = 0; c < 2; ++c) {
    double arm[2];
    for (int a = 0; a < 2; ++a) {
      // p(u | c, a) ∝ p(a | c, u) p(u | c)
      double w[2];
      for (int u = 0; u < 2; ++u) w[u] = bern(params.a_given(c, u), a) * bern(params.p_u_given_c[static_cast<std::size_t>(c)], u);
      const double z = w[0] + w[1];
      arm[a] = (w[0] * params.y_given(a, c, 0) + w[1] * params.y_given(a, c, 1)) / z;
    }
    ate += (arm[1] - arm[0]) * bern(params.p_c, c);
  }
  return ate;
}

namespace {

struct Bounds {
  double lower;
  double upper;
};

// p(U=1|C=1) is tied to (p_c, p(U=1|C=0)) so that P(U=1) = 0.5 exactly.
double derived_u_given_c1(double p_c, double u_c0) { return (0.5 - (1.0 - p_c) * u_c0) / p_c; }

Bounds u_c0_bounds(double p_c, const SolverOptions& o) {
  return {std::max(o.lower, (0.5 - o.upper * p_c) / (1.0 - p_c)),
          std::min(o.upper, (0.5 - o.lower * p_c) / (1.0 - p_c))};
}

void project(std::array<double, kFree>& x, const SolverOptions& o) {
  for (double& v : x) v = std::clamp(v, o.lower, o.upper);
  const Bounds b = u_c0_bounds(x[0], o);
  x[1] = std::clamp(x[1], b.lower, b.upper);
}

Bounds bounds_for(const std::array<double, kFree>& x, int i, const SolverOptions& o) {
  return i == 1 ? u_c0_bounds(x[0], o) : Bounds{o.lower, o.upper};
}

StructuredParams unpack(const std::array<double, kFree>& x, Seed seed) {
  StructuredParams p;
  p.seed = seed;
  p.p_c = x[0];
  p.p_u_given_c = {x[1], derived_u_given_c1(x[0], x[1])};
  for (int i = 0; i < 4; ++i) p.p_a_given_cu[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(2 + i)];
  for (int i = 0; i < 8; ++i) p.p_y_given_acu[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(6 + i)];
  return p;
}

std::array<double, 2> residual(const std::array<double, kFree>& x) {
  const StructuredParams p = unpack(x, 0);
  return {oracle_ate(p) - 0.1, naive_adjusted_ate(p) + 0.1};
}

double sq(const std::array<double, 2>& g) { return g[0] * g[0] + g[1] * g[1]; }

// Projected Gauss-Newton on the two remaining equality constraints, taking
// the minimum-norm step over the variables not pinned at a bound.
bool solve_from(std::array<double, kFree>& x, const SolverOptions& o) {
  const double target = std::min(o.tol * 1e-3, 1e-9);
  std::array<double, 2> g = residual(x);
  for (int iter = 0; iter < o.max_iterations; ++iter) {
    if (std::abs(g[0]) <= target && std::abs(g[1]) <= target) return true;

    double jac[2][kFree];
    for (int i = 0; i < kFree; ++i) {
      const double hstep = 1e-7;
      auto xp = x, xm = x;
      xp[static_cast<std::size_t>(i)] += hstep;
      xm[static_cast<std::size_t>(i)] -= hstep;
      const auto gp = residual(xp);
      const auto gm = residual(xm);
      jac[0][i] = (gp[0] - gm[0]) / (2 * hstep);
      jac[1][i] = (gp[1] - gm[1]) / (2 * hstep);
    }

    std::array<bool, kFree> active{};
    active.fill(true);
    std::array<double, kFree> step{};
    bool solved = false;
    for (int pass = 0; pass < kFree; ++pass) {
      double a = 0, b = 0, d = 0;  // J J^T over the active set
      for (int i = 0; i < kFree; ++i) {
        if (!active[static_cast<std::size_t>(i)]) continue;
        a += jac[0][i] * jac[0][i];
        b += jac[0][i] * jac[1][i];
        d += jac[1][i] * jac[1][i];
      }
      const double det = a * d - b * b;
      if (!(std::abs(det) > 1e-18)) break;
      const double l0 = (d * g[0] - b * g[1]) / det;
      const double l1 = (-b * g[0] + a * g[1]) / det;
      bool changed = false;
      for (int i = 0; i < kFree; ++i) {
        const auto si = static_cast<std::size_t>(i);
        step[si] = active[si] ? -(jac[0][i] * l0 + jac[1][i] * l1) : 0.0;
        const Bounds bd = bounds_for(x, i, o);
        if (active[si] && ((x[si] <= bd.lower && step[si] < 0) || (x[si] >= bd.upper && step[si] > 0))) {
          active[si] = false;
          changed = true;
        }
      }
      if (!changed) {
        solved = true;
        break;
      }
    }
    if (!solved) return false;

    double alpha = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      auto trial = x;
      for (std::size_t i = 0; i < kFree; ++i) trial[i] += alpha * step[i];
      project(trial, o);
      const auto gt = residual(trial);
      if (sq(gt) < sq(g)) {
        x = trial;
        g = gt;
        improved = true;
        break;
      }
    }
    if (!improved) return false;
  }
  return std::abs(g[0]) <= target && std::abs(g[1]) <= target;
}

}  // namespace

StructuredParams sample_structured_params(Seed seed, const SolverOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("sample_structured_params: tol must be positive");
  Rng rng(derive_seed(seed, "structured-params"));
  double best_violation = 1e300;
  for (int restart = 0; restart < options.max_restarts; ++restart) {
    std::array<double, kFree> x{};
    for (double& v : x) v = options.lower + (options.upper - options.lower) * rng.uniform();
    project(x, options);
    if (solve_from(x, options)) {
      StructuredParams p = unpack(x, seed);
      if (std::abs(oracle_ate(p) - 0.1) <= options.tol && std::abs(naive_adjusted_ate(p) + 0.1) <= options.tol &&
          std::abs(p.p_u1() - 0.5) <= options.tol) {
        p.validate();
        return p;
      }
    }
    best_violation = std::min(best_violation, std::sqrt(sq(residual(x))));
  }
  throw SolverError("sample_structured_params: no parameterization met the constraints after " +
                    std::to_string(options.max_restarts) + " restarts (best residual norm " +
                    format_double(best_violation) + ")");
}

StructuredSample draw_structured_one(const StructuredParams& params, Seed seed, std::size_t index) {
  Rng rng(derive_seed(seed, index));
  StructuredSample s;
  s.c = rng.bernoulli(params.p_c) ? 1 : 0;
  s.u = rng.bernoulli(params.p_u_given_c[static_cast<std::size_t>(s.c)]) ? 1 : 0;
  s.a = rng.bernoulli(params.a_given(s.c, s.u)) ? 1 : 0;
  s.y = rng.bernoulli(params.y_given(s.a, s.c, s.u)) ? 1 : 0;
  return s;
}

std::vector<StructuredSample> draw_structured(const StructuredParams& params, std::size_t n, Seed seed) {
  std::vector<StructuredSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_structured_one(params, seed, i));
  return out;
}

double plug_in_ate(const JointTable& joint) {
  double total = 0.0, ate = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (int u = 0; u < 2; ++u) {
      double arm_mass[2], arm_y1[2];
      for (int a = 0; a < 2; ++a) {
        arm_y1[a] = joint.at(u, c, a, 1);
        arm_mass[a] = joint.at(u, c, a, 0) + arm_y1[a];
      }
      const double w = arm_mass[0] + arm_mass[1];
      total += w;
      if (w <= 0.0) continue;
      for (int a = 0; a < 2; ++a) {
        if (arm_mass[a] <= 0.0) throw StratumError(a, c, u);
      }
      ate += w * (arm_y1[1] / arm_mass[1] - arm_y1[0] / arm_mass[0]);
    }
  }
  if (!(total > 0.0)) throw std::invalid_argument("plug_in_ate: empty joint");
  return ate / total;
}

double plug_in_ate(std::span<const StructuredSample> samples) {
  return plug_in_ate(JointTable::from_samples(samples));
}

double c_adjusted_ate(const JointTable& joint) {
  double total = 0.0, ate = 0.0;
  for (int c = 0; c < 2; ++c) {
    double arm_mass[2] = {0, 0}, arm_y1[2] = {0, 0};
    for (int a = 0; a < 2; ++a)
      for (int u = 0; u < 2; ++u) {
        arm_y1[a] += joint.at(u, c, a, 1);
        arm_mass[a] += joint.at(u, c, a, 0) + joint.at(u, c, a, 1);
      }
    const double w = arm_mass[0] + arm_mass[1];
    total += w;
    if (w <= 0.0) continue;
    for (int a = 0; a < 2; ++a) {
      if (arm_mass[a] <= 0.0) throw StratumError(a, c, -1);
    }
    ate += w * (arm_y1[1] / arm_mass[1] - arm_y1[0] / arm_mass[0]);
  }
  if (!(total > 0.0)) throw std::invalid_argument("c_adjusted_ate: empty joint");
  return ate / total;
}

double unadjusted_ate(const JointTable& joint) {
  double arm_mass[2] = {0, 0}, arm_y1[2] = {0, 0};
  for (int u = 0; u < 2; ++u)
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a) {
        arm_y1[a] += joint.at(u, c, a, 1);
        arm_mass[a] += joint.at(u, c, a, 0) + joint.at(u, c, a, 1);
      }
  for (int a = 0; a < 2; ++a) {
    if (arm_mass[a] <= 0.0) throw StratumError(a, -1, -1);
  }
  return arm_y1[1] / arm_mass[1] - arm_y1[0] / arm_mass[0];
}

}  // namespace textcausal
