#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace rct {

#ifdef RCT_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
};

/// Ordered, name-addressed parameter collection. Order is creation order and
/// defines checkpoint layout.
class ParameterStore {
 public:
  /// Glorot-uniform initialization drawn from `rng`.
  Parameter& add(const std::string& name, int rows, int cols, std::mt19937_64& rng);
  Parameter& add_zeros(const std::string& name, int rows, int cols);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  /// Deep copy (values only; gradients zeroed).
  ParameterStore clone() const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  /// Loads values into the existing parameters; names and shapes must match.
  void load(std::istream& in);
  void load(const std::filesystem::path& path);

  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  int id = -1;
  Tape* tape = nullptr;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Records a forward computation and replays it backwards once. Node ids are
/// creation order, which is a topological order of the computation.
class Tape {
 public:
  /// With `record` false no backward closures are kept (inference only).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(Parameter& p);
  Var constant(Mat m);

  const Mat& value(Var v) const;
  /// Gradient of the last backward pass with respect to `v` (zeros if `v`
  /// did not influence the loss). For parameter nodes this is the
  /// parameter's accumulated gradient.
  Mat grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws if called twice.
  void backward(Var loss);

  // Dropout masks are drawn from a counter-based generator keyed by
  // `dropout_key` and the per-tape op counter.
  bool training = false;
  std::uint64_t dropout_key = 0;

  // ops
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1xN row over every row of a
  Var mul(Var a, Var b);
  Var mul_col(Var a, Var col);  // scale row i of a by col(i, 0)
  Var scale(Var a, Scalar s);
  Var add_scalar(Var a, Scalar s);
  Var concat_rows(const std::vector<Var>& parts);
  Var gather_rows(Var a, std::vector<int> index);
  Var segment_sum(Var a, std::vector<int> segment, int num_segments);
  /// Softmax of a column vector within each segment.
  Var segment_softmax(Var scores, std::vector<int> segment, int num_segments);
  Var rowdot(Var a, Var b);  // Nx1 row-wise dot products
  Var softmax_rows(Var a);
  Var log(Var a);  // natural log, argument clamped below at 1e-12
  Var relu(Var a);
  Var dropout(Var a, Scalar p);
  Var sum(Var a);
  /// Entries (rows[i], cols[i]) as a column vector.
  Var pick(Var a, std::vector<int> rows, std::vector<int> cols);
  Var col(Var a, int c);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;  // parameter value, not copied
    Parameter* param = nullptr;
    bool needs_grad = false;
    std::function<void()> backward;
  };

  Var push(Mat value, bool needs_grad);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  Mat& grad_slot(Var v);
  void check_tape(Var v) const;
  void check_finite(const Mat& m, const char* op) const;

  bool record_;
  bool done_ = false;
  std::uint64_t op_counter_ = 0;
  std::vector<Node> nodes_;
  std::vector<Mat> grads_;
};

inline const Mat& Var::value() const { return tape->value(*this); }

/// Counter-based generator: a bijective 64-bit mix of `x`.
std::uint64_t splitmix64(std::uint64_t x);
/// Uniform double in [0, 1) from `splitmix64(key + i)`.
double counter_uniform(std::uint64_t key, std::uint64_t i);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  /// Applies one update using each parameter's `grad`, then zeroes the grads.
  void step(ParameterStore& params);
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace rct
