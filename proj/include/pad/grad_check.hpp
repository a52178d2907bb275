// Copyright 2026 The PAD Distillation Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

#include "pad/autodiff.hpp"

namespace pad {

struct GradCheckResult {
  double max_rel_error = 0.0;  // over smooth coordinates only
  std::size_t coordinates = 0;
  std::size_t kinks = 0;       // coordinates excluded as nondifferentiable
  bool finite = true;

  bool passed(double tolerance) const { return finite && max_rel_error <= tolerance; }
};

using ScalarFunction = std::function<Var<double>(Graph<double>&, const Var<double>&)>;

/// Compares reverse-mode gradients of f at x against central differences.
///
/// Relative error per coordinate is |analytic - numeric| / (|numeric| + 1e-8).
/// A coordinate whose forward and backward one-sided slopes disagree by more
/// than a first-order amount is a kink (L1 at zero, a max tie) and is skipped.
inline GradCheckResult gradCheck(const ScalarFunction& f, const Matrix<double>& x, double eps) {
  require(eps > 0.0, "gradCheck: eps must be positive");
  GradCheckResult result;
  result.coordinates = static_cast<std::size_t>(x.size());

  Matrix<double> analytic;
  double f0 = 0.0;
  {
    Graph<double> g;
    auto xv = g.leaf(x, true);
    auto loss = f(g, xv);
    require(loss.size() == 1, "gradCheck: f must return a scalar");
    f0 = loss.item();
    g.backward(loss);
    analytic = xv.grad();
  }

  auto evaluate = [&f](const Matrix<double>& point) {
    try {
      Graph<double> g;
      auto xv = g.constant(point);
      return f(g, xv).item();
    } catch (const NumericError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  Matrix<double> probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = x.data()[k];
    probe.data()[k] = orig + eps;
    const double fp = evaluate(probe);
    probe.data()[k] = orig - eps;
    const double fm = evaluate(probe);
    probe.data()[k] = orig;

    const double central = (fp - fm) / (2.0 * eps);
    const double forward = (fp - f0) / eps;
    const double backward = (f0 - fm) / eps;
    if (!std::isfinite(central) || !std::isfinite(analytic.data()[k])) {
      result.finite = false;
      result.max_rel_error = std::numeric_limits<double>::infinity();
      continue;
    }
    const double jump = std::abs(forward - backward);
    if (jump > 1e-3 * (1.0 + std::abs(forward) + std::abs(backward))) {
      ++result.kinks;
      continue;
    }
    const double rel = std::abs(analytic.data()[k] - central) / (std::abs(central) + 1e-8);
    result.max_rel_error = std::max(result.max_rel_error, rel);
  }
  return result;
}

}  // namespace pad
