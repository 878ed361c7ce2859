#pragma once

// Finite-difference cases for every differentiable tape op.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "rct/tensor.hpp"

namespace rct::testing {

inline Mat random_mat(int r, int c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(d(rng));
  return m;
}

// Weighted sum so every output entry carries a distinct gradient.
inline Var weighted(Tape& t, Var out, const Mat& w) { return t.sum(t.mul(out, t.constant(w))); }

struct OpCase {
  const char* name;
  std::vector<std::pair<int, int>> shapes;
  bool positive = false;  // inputs drawn from [0.2, 2]
  std::function<Var(Tape&, std::vector<Var>&)> op;
};

inline std::vector<OpCase> op_cases() {
  std::vector<int> seg = {0, 2, 0, 1, 2};
  return {
      {"matmul", {{5, 4}, {4, 3}}, false, [](Tape& t, auto& v) { return t.matmul(v[0], v[1]); }},
      {"add", {{3, 4}, {3, 4}}, false, [](Tape& t, auto& v) { return t.add(v[0], v[1]); }},
      {"add_row", {{3, 4}, {1, 4}}, false, [](Tape& t, auto& v) { return t.add_row(v[0], v[1]); }},
      {"mul", {{3, 4}, {3, 4}}, false, [](Tape& t, auto& v) { return t.mul(v[0], v[1]); }},
      {"mul_col", {{5, 3}, {5, 1}}, false, [](Tape& t, auto& v) { return t.mul_col(v[0], v[1]); }},
      {"scale", {{3, 4}}, false, [](Tape& t, auto& v) { return t.scale(v[0], 2.5); }},
      {"add_scalar", {{3, 4}}, false, [](Tape& t, auto& v) { return t.add_scalar(v[0], 0.5); }},
      {"concat_rows", {{2, 3}, {3, 3}}, false, [](Tape& t, auto& v) { return t.concat_rows({v[0], v[1]}); }},
      {"gather_rows", {{4, 3}}, false, [](Tape& t, auto& v) { return t.gather_rows(v[0], {3, 0, 3, 1}); }},
      {"segment_sum", {{5, 3}}, false, [seg](Tape& t, auto& v) { return t.segment_sum(v[0], seg, 3); }},
      {"segment_softmax", {{5, 1}}, false, [seg](Tape& t, auto& v) { return t.segment_softmax(v[0], seg, 3); }},
      {"rowdot", {{4, 3}, {4, 3}}, false, [](Tape& t, auto& v) { return t.rowdot(v[0], v[1]); }},
      {"softmax_rows", {{3, 5}}, false, [](Tape& t, auto& v) { return t.softmax_rows(v[0]); }},
      {"log", {{3, 4}}, true, [](Tape& t, auto& v) { return t.log(v[0]); }},
      {"relu", {{4, 4}}, false, [](Tape& t, auto& v) { return t.relu(v[0]); }},
      {"sum", {{3, 4}}, false, [](Tape& t, auto& v) { return t.sum(v[0]); }},
      {"pick", {{3, 4}}, false, [](Tape& t, auto& v) { return t.pick(v[0], {0, 2, 2}, {1, 3, 0}); }},
      {"col", {{3, 4}}, false, [](Tape& t, auto& v) { return t.col(v[0], 2); }},
      {"dropout", {{4, 5}}, false,
       [](Tape& t, auto& v) {
         t.training = true;
         t.dropout_key = 77;
         return t.dropout(v[0], 0.3);
       }},
  };
}

/// Gradient check of one op on random inputs with a random output weighting.
inline GradCheckResult check_op(const OpCase& c, std::mt19937_64& rng) {
  ParameterStore ps;
  for (std::size_t i = 0; i < c.shapes.size(); ++i) {
    auto& p = ps.add_zeros("p" + std::to_string(i), c.shapes[i].first, c.shapes[i].second);
    p.value = c.positive ? random_mat(c.shapes[i].first, c.shapes[i].second, rng, 0.2, 2.0)
                         : random_mat(c.shapes[i].first, c.shapes[i].second, rng);
  }
  Mat w;
  auto loss = [&](Tape& t, std::vector<Var>& v) {
    Var out = c.op(t, v);
    if (w.size() == 0) w = random_mat(static_cast<int>(out.rows()), static_cast<int>(out.cols()), rng);
    return weighted(t, out, w);
  };
  return grad_check(ps, loss);
}

}  // namespace rct::testing
