#pragma once

// Binary structured distribution p(C, U, A, Y) with C -> U, {C,U} -> A and
// {A,C,U} -> Y, constrained so that the true effect of A on Y is +0.1, the
// estimate that ignores U is -0.1, and P(U=1) = 0.5.

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "textcausal/io.hpp"
#include "textcausal/random.hpp"

namespace textcausal {

struct StructuredParams {
  double p_c = 0.5;                          // P(C=1)
  std::array<double, 2> p_u_given_c{};       // P(U=1 | C=c)
  std::array<double, 4> p_a_given_cu{};      // P(A=1 | C=c, U=u), index 2c+u
  std::array<double, 8> p_y_given_acu{};     // P(Y=1 | A=a, C=c, U=u), index 4a+2c+u
  Seed seed = 0;

  double& a_given(int c, int u) { return p_a_given_cu[2 * c + u]; }
  [[nodiscard]] double a_given(int c, int u) const { return p_a_given_cu[2 * c + u]; }
  double& y_given(int a, int c, int u) { return p_y_given_acu[4 * a + 2 * c + u]; }
  [[nodiscard]] double y_given(int a, int c, int u) const { return p_y_given_acu[4 * a + 2 * c + u]; }

  [[nodiscard]] double p_cu(int c, int u) const;
  [[nodiscard]] double p_u1() const;

  // All 15 probabilities strictly inside (0, 1).
  void validate() const;

  [[nodiscard]] KeyValueRecord to_record() const;
  static StructuredParams from_record(const KeyValueRecord& rec);

  friend bool operator==(const StructuredParams&, const StructuredParams&) = default;
};

struct StructuredSample {
  int c = 0;
  int u = 0;
  int a = 0;
  int y = 0;

  friend bool operator==(const StructuredSample&, const StructuredSample&) = default;
};

// Sixteen cell masses over (u, c, a, y); cell index 8u + 4c + 2a + y.
struct JointTable {
  std::array<double, 16> mass{};

  static constexpr std::size_t index(int u, int c, int a, int y) {
    return static_cast<std::size_t>(8 * u + 4 * c + 2 * a + y);
  }
  double& at(int u, int c, int a, int y) { return mass[index(u, c, a, y)]; }
  [[nodiscard]] double at(int u, int c, int a, int y) const { return mass[index(u, c, a, y)]; }

  static JointTable from_params(const StructuredParams& params);
  static JointTable from_samples(std::span<const StructuredSample> samples);
};

// Raised when an identification stratum has no support for one arm.
class StratumError : public std::runtime_error {
 public:
  StratumError(int a, int c, int u);
  int a, c, u;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sum over (c,u) of [P(Y=1|A=1,c,u) - P(Y=1|A=0,c,u)] p(c,u).
double oracle_ate(const StructuredParams& params);

// Same adjustment with U marginalized out of each (a, c) stratum.
double naive_adjusted_ate(const StructuredParams& params);

struct SolverOptions {
  double tol = 1e-6;
  double lower = 0.05;
  double upper = 0.95;
  int max_restarts = 200;
  int max_iterations = 200;
};

// Deterministic in (seed, options). Throws SolverError when no restart
// satisfies every constraint within tol.
StructuredParams sample_structured_params(Seed seed, const SolverOptions& options = {});

// Ancestral sampling C -> U -> A -> Y. Record i depends only on (seed, i).
std::vector<StructuredSample> draw_structured(const StructuredParams& params, std::size_t n, Seed seed);
StructuredSample draw_structured_one(const StructuredParams& params, Seed seed, std::size_t index);

// Identification formula evaluated on a (possibly unnormalized) joint.
// Throws StratumError when a (c,u) stratum with positive mass lacks one arm.
double plug_in_ate(const JointTable& joint);
double plug_in_ate(std::span<const StructuredSample> samples);

// Naive adjustment on C only, evaluated on a joint.
double c_adjusted_ate(const JointTable& joint);
// Difference of outcome means between arms.
double unadjusted_ate(const JointTable& joint);

}  // namespace textcausal
