#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rct/tensor.hpp"

namespace rct::testing {

struct GradCheckResult {
  double max_rel_err = 0;
  std::size_t checked = 0;
};

// Relative error with an absolute floor for entries whose gradient is
// numerically zero.
inline double rel_err(double a, double n) {
  double scale = std::max(std::abs(a), std::abs(n));
  if (scale < 1e-7) return std::abs(a - n) < 1e-9 ? 0.0 : std::abs(a - n) / 1e-7;
  return std::abs(a - n) / scale;
}

using LossFn = std::function<Var(Tape&, std::vector<Var>&)>;

/// Compares the taped gradient of `loss` with central differences (step h)
/// for every entry of every parameter, or for `sample` random entries per
/// parameter when `sample` > 0.
inline GradCheckResult grad_check(ParameterStore& params, const LossFn& loss, double h = 1e-5, int sample = 0,
                                  std::uint64_t seed = 1) {
  auto eval = [&] {
    Tape t(false);
    std::vector<Var> vars;
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(t.param(params[i]));
    return static_cast<double>(loss(t, vars).value()(0, 0));
  };
  params.zero_grad();
  {
    Tape t;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(t.param(params[i]));
    t.backward(loss(t, vars));
  }
  std::vector<Mat> analytic;
  for (std::size_t i = 0; i < params.size(); ++i) analytic.push_back(params[i].grad);
  GradCheckResult r;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat& v = params[i].value;
    std::vector<Eigen::Index> idx;
    if (sample > 0) {
      std::uniform_int_distribution<Eigen::Index> d(0, v.size() - 1);
      for (int k = 0; k < sample; ++k) idx.push_back(d(rng));
    } else {
      for (Eigen::Index k = 0; k < v.size(); ++k) idx.push_back(k);
    }
    for (Eigen::Index k : idx) {
      Scalar orig = v.data()[k];
      v.data()[k] = orig + static_cast<Scalar>(h);
      double up = eval();
      v.data()[k] = orig - static_cast<Scalar>(h);
      double down = eval();
      v.data()[k] = orig;
      double num = (up - down) / (2 * h);
      r.max_rel_err = std::max(r.max_rel_err, rel_err(analytic[i].data()[k], num));
      ++r.checked;
    }
  }
  params.zero_grad();
  return r;
}

}  // namespace rct::testing
