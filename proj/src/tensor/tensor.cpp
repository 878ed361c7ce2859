#include "rct/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace rct {

namespace {

constexpr Scalar kLogClamp = static_cast<Scalar>(1e-12);

std::string shape(const Mat& m) { return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")"; }

[[noreturn]] void shape_error(const char* op, const Mat& a, const Mat& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape(a) + " and " + shape(b));
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(const std::string& name, int rows, int cols, std::mt19937_64& rng) {
  Parameter& p = add_zeros(name, rows, cols);
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
  return p;
}

Parameter& ParameterStore::add_zeros(const std::string& name, int rows, int cols) {
  for (const auto& p : params_)
    if (p->name == name) throw std::invalid_argument("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  p->grad = Mat::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw std::out_of_range("no parameter '" + name + "'");
}

const Parameter& ParameterStore::get(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& p : params_) {
    Parameter& q = out.add_zeros(p->name, static_cast<int>(p->value.rows()), static_cast<int>(p->value.cols()));
    q.value = p->value;
  }
  return out;
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].value.rows() != b[i].value.rows() || a[i].value.cols() != b[i].value.cols() ||
        a[i].value != b[i].value)
      return false;
  return true;
}

namespace {

constexpr const char* kMagic = "RCTCKPT1";

template <class T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("checkpoint: truncated payload");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

// Layout: magic line, tensor count line, then per tensor a text header
// `name rows cols f64|f32` and the row-major little-endian payload.
void ParameterStore::save(std::ostream& out) const {
  out << kMagic << '\n' << params_.size() << '\n';
  const char* tag = sizeof(Scalar) == 8 ? "f64" : "f32";
  for (const auto& p : params_) {
    out << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << ' ' << tag << '\n';
    for (Eigen::Index i = 0; i < p->value.size(); ++i) write_le(out, p->value.data()[i]);
    out << '\n';
  }
}

void ParameterStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  save(out);
}

void ParameterStore::load(std::istream& in) {
  std::string magic;
  std::size_t count = 0;
  if (!(in >> magic) || magic != kMagic) throw std::runtime_error("checkpoint: bad magic");
  if (!(in >> count) || count != params_.size())
    throw std::runtime_error("checkpoint: expected " + std::to_string(params_.size()) + " tensors");
  for (auto& p : params_) {
    std::string name, tag;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols >> tag)) throw std::runtime_error("checkpoint: bad tensor header");
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
      throw std::runtime_error("checkpoint: tensor '" + name + "' does not match '" + p->name + "' " +
                               shape(p->value));
    in.ignore(1);
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      if (tag == "f64") p->value.data()[i] = static_cast<Scalar>(read_le<double>(in));
      else if (tag == "f32") p->value.data()[i] = static_cast<Scalar>(read_le<float>(in));
      else throw std::runtime_error("checkpoint: unknown element type '" + tag + "'");
    }
    p->grad.setZero();
  }
}

void ParameterStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  load(in);
}

// ---------------------------------------------------------------------------
// Tape

void Tape::check_tape(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::logic_error("variable does not belong to this tape");
}

void Tape::check_finite(const Mat& m, const char* op) const {
#ifndef NDEBUG
  if (!m.allFinite()) throw std::domain_error(std::string(op) + ": non-finite value");
#else
  (void)m;
  (void)op;
#endif
}

Var Tape::push(Mat value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && record_;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size() - 1), this};
}

const Mat& Tape::value(Var v) const {
  check_tape(v);
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.external ? *n.external : n.value;
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size() - 1), this};
}

Var Tape::constant(Mat m) { return push(std::move(m), false); }

Mat& Tape::grad_slot(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.param) return n.param->grad;
  Mat& g = grads_[static_cast<std::size_t>(v.id)];
  if (g.size() == 0) g = Mat::Zero(value(v).rows(), value(v).cols());
  return g;
}

Mat Tape::grad(Var v) const {
  check_tape(v);
  if (!done_) throw std::logic_error("gradient requested before backward");
  if (const Parameter* p = nodes_[static_cast<std::size_t>(v.id)].param) return p->grad;
  const Mat& g = grads_[static_cast<std::size_t>(v.id)];
  if (g.size() == 0) return Mat::Zero(value(v).rows(), value(v).cols());
  return g;
}

void Tape::backward(Var loss) {
  check_tape(loss);
  if (done_) throw std::logic_error("backward called twice on one tape");
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  if (value(loss).size() != 1) throw ShapeError("backward: loss must be 1x1, got " + shape(value(loss)));
  done_ = true;
  grads_.assign(nodes_.size(), Mat());
  grads_[static_cast<std::size_t>(loss.id)] = Mat::Constant(1, 1, 1);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && grads_[i].size() != 0) n.backward();
  }
}

// Each op computes its value, then (when recording and some input needs a
// gradient) stores a closure that adds its output gradient into the inputs.
#define RCT_GRAD(v) grads_[static_cast<std::size_t>(v.id)]

Var Tape::matmul(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  Var out = push(A * B, needs(a) || needs(b));
  check_finite(value(out), "matmul");
  if (needs(out))
    nodes_.back().backward = [this, a, b, out] {
      const Mat& g = RCT_GRAD(out);
      if (needs(a)) grad_slot(a).noalias() += g * value(b).transpose();
      if (needs(b)) grad_slot(b).noalias() += value(a).transpose() * g;
    };
  return out;
}

Var Tape::add(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_error("add", A, B);
  Var out = push(A + B, needs(a) || needs(b));
  check_finite(value(out), "add");
  if (needs(out))
    nodes_.back().backward = [this, a, b, out] {
      const Mat& g = RCT_GRAD(out);
      if (needs(a)) grad_slot(a) += g;
      if (needs(b)) grad_slot(b) += g;
    };
  return out;
}

Var Tape::add_row(Var a, Var row) {
  const Mat& A = value(a);
  const Mat& R = value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) shape_error("add_row", A, R);
  Mat v = A;
  v.rowwise() += R.row(0);
  Var out = push(std::move(v), needs(a) || needs(row));
  check_finite(value(out), "add_row");
  if (needs(out))
    nodes_.back().backward = [this, a, row, out] {
      const Mat& g = RCT_GRAD(out);
      if (needs(a)) grad_slot(a) += g;
      if (needs(row)) grad_slot(row) += g.colwise().sum();
    };
  return out;
}

Var Tape::mul(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_error("mul", A, B);
  Var out = push(A.cwiseProduct(B), needs(a) || needs(b));
  check_finite(value(out), "mul");
  if (needs(out))
    nodes_.back().backward = [this, a, b, out] {
      const Mat& g = RCT_GRAD(out);
      if (needs(a)) grad_slot(a) += g.cwiseProduct(value(b));
      if (needs(b)) grad_slot(b) += g.cwiseProduct(value(a));
    };
  return out;
}

Var Tape::mul_col(Var a, Var col) {
  const Mat& A = value(a);
  const Mat& C = value(col);
  if (C.cols() != 1 || C.rows() != A.rows()) shape_error("mul_col", A, C);
  Mat v = A;
  for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) *= C(i, 0);
  Var out = push(std::move(v), needs(a) || needs(col));
  check_finite(value(out), "mul_col");
  if (needs(out))
    nodes_.back().backward = [this, a, col, out] {
      const Mat& g = RCT_GRAD(out);
      const Mat& A = value(a);
      const Mat& C = value(col);
      if (needs(a)) {
        Mat& ga = grad_slot(a);
        for (Eigen::Index i = 0; i < g.rows(); ++i) ga.row(i) += C(i, 0) * g.row(i);
      }
      if (needs(col)) {
        Mat& gc = grad_slot(col);
        for (Eigen::Index i = 0; i < g.rows(); ++i) gc(i, 0) += g.row(i).dot(A.row(i));
      }
    };
  return out;
}

Var Tape::scale(Var a, Scalar s) {
  Var out = push(value(a) * s, needs(a));
  check_finite(value(out), "scale");
  if (needs(out))
    nodes_.back().backward = [this, a, s, out] { grad_slot(a) += s * RCT_GRAD(out); };
  return out;
}

Var Tape::add_scalar(Var a, Scalar s) {
  Var out = push(value(a).array() + s, needs(a));
  check_finite(value(out), "add_scalar");
  if (needs(out))
    nodes_.back().backward = [this, a, out] { grad_slot(a) += RCT_GRAD(out); };
  return out;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Eigen::Index rows = 0, cols = value(parts[0]).cols();
  bool any = false;
  for (Var p : parts) {
    if (value(p).cols() != cols) shape_error("concat_rows", value(parts[0]), value(p));
    rows += value(p).rows();
    any = any || needs(p);
  }
  Mat v(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    v.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  Var out = push(std::move(v), any);
  if (needs(out))
    nodes_.back().backward = [this, parts, out] {
      const Mat& g = RCT_GRAD(out);
      Eigen::Index r = 0;
      for (Var p : parts) {
        Eigen::Index n = value(p).rows();
        if (needs(p)) grad_slot(p) += g.middleRows(r, n);
        r += n;
      }
    };
  return out;
}

Var Tape::gather_rows(Var a, std::vector<int> index) {
  const Mat& A = value(a);
  Mat v(static_cast<Eigen::Index>(index.size()), A.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= A.rows())
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " outside " + shape(A));
    v.row(static_cast<Eigen::Index>(i)) = A.row(index[i]);
  }
  Var out = push(std::move(v), needs(a));
  if (needs(out))
    nodes_.back().backward = [this, a, index = std::move(index), out] {
      const Mat& g = RCT_GRAD(out);
      Mat& ga = grad_slot(a);
      for (std::size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    };
  return out;
}

Var Tape::segment_sum(Var a, std::vector<int> segment, int num_segments) {
  const Mat& A = value(a);
  if (static_cast<Eigen::Index>(segment.size()) != A.rows())
    throw ShapeError("segment_sum: " + std::to_string(segment.size()) + " segment ids for " + shape(A));
  Mat v = Mat::Zero(num_segments, A.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] < 0 || segment[i] >= num_segments)
      throw ShapeError("segment_sum: segment id " + std::to_string(segment[i]) + " out of range");
    v.row(segment[i]) += A.row(static_cast<Eigen::Index>(i));
  }
  Var out = push(std::move(v), needs(a));
  check_finite(value(out), "segment_sum");
  if (needs(out))
    nodes_.back().backward = [this, a, segment = std::move(segment), out] {
      const Mat& g = RCT_GRAD(out);
      Mat& ga = grad_slot(a);
      for (std::size_t i = 0; i < segment.size(); ++i) ga.row(static_cast<Eigen::Index>(i)) += g.row(segment[i]);
    };
  return out;
}

Var Tape::segment_softmax(Var scores, std::vector<int> segment, int num_segments) {
  const Mat& S = value(scores);
  if (S.cols() != 1 || static_cast<Eigen::Index>(segment.size()) != S.rows())
    throw ShapeError("segment_softmax: scores " + shape(S) + " with " + std::to_string(segment.size()) + " ids");
  std::vector<Scalar> mx(static_cast<std::size_t>(num_segments), -std::numeric_limits<Scalar>::infinity());
  std::vector<Scalar> den(static_cast<std::size_t>(num_segments), 0);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] < 0 || segment[i] >= num_segments) throw ShapeError("segment_softmax: segment id out of range");
    mx[segment[i]] = std::max(mx[segment[i]], S(static_cast<Eigen::Index>(i), 0));
  }
  Mat v(S.rows(), 1);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    Scalar e = std::exp(S(static_cast<Eigen::Index>(i), 0) - mx[segment[i]]);
    v(static_cast<Eigen::Index>(i), 0) = e;
    den[segment[i]] += e;
  }
  for (std::size_t i = 0; i < segment.size(); ++i) v(static_cast<Eigen::Index>(i), 0) /= den[segment[i]];
  Var out = push(std::move(v), needs(scores));
  check_finite(value(out), "segment_softmax");
  if (needs(out))
    nodes_.back().backward = [this, scores, segment = std::move(segment), num_segments, out] {
      const Mat& g = RCT_GRAD(out);
      const Mat& y = value(out);
      std::vector<Scalar> dot(static_cast<std::size_t>(num_segments), 0);
      for (std::size_t i = 0; i < segment.size(); ++i) {
        auto r = static_cast<Eigen::Index>(i);
        dot[segment[i]] += g(r, 0) * y(r, 0);
      }
      Mat& gs = grad_slot(scores);
      for (std::size_t i = 0; i < segment.size(); ++i) {
        auto r = static_cast<Eigen::Index>(i);
        gs(r, 0) += y(r, 0) * (g(r, 0) - dot[segment[i]]);
      }
    };
  return out;
}

Var Tape::rowdot(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_error("rowdot", A, B);
  Mat v = A.cwiseProduct(B).rowwise().sum();
  Var out = push(std::move(v), needs(a) || needs(b));
  check_finite(value(out), "rowdot");
  if (needs(out))
    nodes_.back().backward = [this, a, b, out] {
      const Mat& g = RCT_GRAD(out);
      if (needs(a)) {
        Mat& ga = grad_slot(a);
        const Mat& B = value(b);
        for (Eigen::Index i = 0; i < g.rows(); ++i) ga.row(i) += g(i, 0) * B.row(i);
      }
      if (needs(b)) {
        Mat& gb = grad_slot(b);
        const Mat& A = value(a);
        for (Eigen::Index i = 0; i < g.rows(); ++i) gb.row(i) += g(i, 0) * A.row(i);
      }
    };
  return out;
}

Var Tape::softmax_rows(Var a) {
  const Mat& A = value(a);
  Mat v(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    Scalar m = A.row(i).maxCoeff();
    v.row(i) = (A.row(i).array() - m).exp();
    v.row(i) /= v.row(i).sum();
  }
  Var out = push(std::move(v), needs(a));
  check_finite(value(out), "softmax_rows");
  if (needs(out))
    nodes_.back().backward = [this, a, out] {
      const Mat& g = RCT_GRAD(out);
      const Mat& y = value(out);
      Mat& ga = grad_slot(a);
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        Scalar d = g.row(i).dot(y.row(i));
        ga.row(i).array() += y.row(i).array() * (g.row(i).array() - d);
      }
    };
  return out;
}

Var Tape::log(Var a) {
  const Mat& A = value(a);
  Mat v = A.cwiseMax(kLogClamp).array().log();
  Var out = push(std::move(v), needs(a));
  check_finite(value(out), "log");
  if (needs(out))
    nodes_.back().backward = [this, a, out] {
      const Mat& g = RCT_GRAD(out);
      const Mat& A = value(a);
      Mat& ga = grad_slot(a);
      for (Eigen::Index i = 0; i < A.size(); ++i)
        if (A.data()[i] > kLogClamp) ga.data()[i] += g.data()[i] / A.data()[i];
    };
  return out;
}

Var Tape::relu(Var a) {
  Var out = push(value(a).cwiseMax(Scalar(0)), needs(a));
  if (needs(out))
    nodes_.back().backward = [this, a, out] {
      const Mat& g = RCT_GRAD(out);
      const Mat& A = value(a);
      Mat& ga = grad_slot(a);
      for (Eigen::Index i = 0; i < A.size(); ++i)
        if (A.data()[i] > 0) ga.data()[i] += g.data()[i];
    };
  return out;
}

Var Tape::dropout(Var a, Scalar p) {
  if (p < 0 || p >= 1) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  std::uint64_t key = splitmix64(dropout_key ^ splitmix64(++op_counter_));
  if (!training || p == 0) return a;
  const Mat& A = value(a);
  Mat mask(A.rows(), A.cols());
  const Scalar keep = 1 / (1 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = counter_uniform(key, static_cast<std::uint64_t>(i)) < p ? Scalar(0) : keep;
  Var out = push(A.cwiseProduct(mask), needs(a));
  if (needs(out))
    nodes_.back().backward = [this, a, out, mask = std::move(mask)] {
      grad_slot(a) += RCT_GRAD(out).cwiseProduct(mask);
    };
  return out;
}

Var Tape::sum(Var a) {
  Var out = push(Mat::Constant(1, 1, value(a).sum()), needs(a));
  check_finite(value(out), "sum");
  if (needs(out))
    nodes_.back().backward = [this, a, out] { grad_slot(a).array() += RCT_GRAD(out)(0, 0); };
  return out;
}

Var Tape::pick(Var a, std::vector<int> rows, std::vector<int> cols) {
  const Mat& A = value(a);
  if (rows.size() != cols.size()) throw ShapeError("pick: row and column index counts differ");
  Mat v(static_cast<Eigen::Index>(rows.size()), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= A.rows() || cols[i] < 0 || cols[i] >= A.cols())
      throw ShapeError("pick: index (" + std::to_string(rows[i]) + "," + std::to_string(cols[i]) + ") outside " +
                       shape(A));
    v(static_cast<Eigen::Index>(i), 0) = A(rows[i], cols[i]);
  }
  Var out = push(std::move(v), needs(a));
  if (needs(out))
    nodes_.back().backward = [this, a, rows = std::move(rows), cols = std::move(cols), out] {
      const Mat& g = RCT_GRAD(out);
      Mat& ga = grad_slot(a);
      for (std::size_t i = 0; i < rows.size(); ++i) ga(rows[i], cols[i]) += g(static_cast<Eigen::Index>(i), 0);
    };
  return out;
}

Var Tape::col(Var a, int c) {
  const Mat& A = value(a);
  if (c < 0 || c >= A.cols()) throw ShapeError("col: column " + std::to_string(c) + " outside " + shape(A));
  Var out = push(A.col(c), needs(a));
  if (needs(out))
    nodes_.back().backward = [this, a, c, out] { grad_slot(a).col(c) += RCT_GRAD(out); };
  return out;
}

#undef RCT_GRAD

// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double counter_uniform(std::uint64_t key, std::uint64_t i) {
  return static_cast<double>(splitmix64(key + i) >> 11) * 0x1.0p-53;
}

void Adam::step(ParameterStore& params) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.push_back(Mat::Zero(params[i].value.rows(), params[i].value.cols()));
      v_.push_back(Mat::Zero(params[i].value.rows(), params[i].value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const auto b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    m_[i] = b1 * m_[i] + (1 - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1 - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= static_cast<Scalar>(cfg_.lr) * (m_[i].array() / static_cast<Scalar>(c1)) /
                       ((v_[i].array() / static_cast<Scalar>(c2)).sqrt() + static_cast<Scalar>(cfg_.eps));
    p.grad.setZero();
  }
}

}  // namespace rct
