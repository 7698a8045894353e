#pragma once

// Finite-difference validation of the analytic adjoints.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "glam/autograd.hpp"

namespace glam {

inline constexpr double kGradEps = 1e-5;
inline constexpr double kGradTolerance = 1e-4;

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every
/// element. Throws NumericError if f is not finite at a probe point.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double eps = kGradEps);

/// |a - n| / max(|a|, |n|, 1e-8), elementwise maximum.
double max_relative_error(const Tensor& analytic, const Tensor& numeric);

struct ParamReport {
  std::string name;
  std::size_t elements = 0;
  double max_rel = 0.0;
  double max_abs = 0.0;
  bool pass = false;
};

struct GradReport {
  std::string op;
  double max_rel = 0.0;
  double max_abs = 0.0;
  double tolerance = 0.0;
  bool pass = false;  // max_rel <= tolerance
  std::vector<ParamReport> params;
};

struct GradInput {
  std::string name;
  Tensor value;
};

/// Builds the op output from one Var per input.
using GradFn = std::function<Var(const std::vector<Var>&)>;

/// Compares the adjoints of `fn` with central differences. A non-scalar
/// output is reduced by a fixed random weighting drawn from `seed`.
GradReport check_op(const std::string& op, const GradFn& fn, const std::vector<GradInput>& inputs,
                    double tolerance = kGradTolerance, double eps = kGradEps, std::uint64_t seed = 7);

/// Every differentiable op, the attention module, the descriptor head and
/// the ArcFace loss on small random instances.
std::vector<GradReport> check_all(double tolerance = kGradTolerance, std::uint64_t seed = 0);

std::string gradcheck_json(const std::vector<GradReport>& reports);
std::string gradcheck_table(const std::vector<GradReport>& reports);

}  // namespace glam
