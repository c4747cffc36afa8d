#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace csm::ad {

class Tape;

/// Handle to a vector-valued node recorded on a Tape. Scalars are size 1.
class Var {
 public:
  Var() = default;

  std::size_t size() const;
  double value(std::size_t i = 0) const;
  std::span<const double> values() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode recording of operations over a flat parameter vector.
///
/// Leaves created with param()/param_gather() read from the parameter span
/// given at construction; backward() accumulates d(output)/d(params) into
/// param_grad(). A tape is single-use and single-threaded: record, call
/// backward once, read the gradient.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(std::span<const double> params);

  Var param(std::size_t offset, std::size_t size);
  Var param_gather(std::span<const std::size_t> indices);
  Var constant(std::vector<double> values);
  Var scalar(double v) { return constant({v}); }

  /// Seeds d(output)/d(output) = 1; output must be a scalar.
  void backward(const Var& output);
  std::span<const double> param_grad() const { return param_grad_; }
  std::size_t num_params() const { return params_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }

  // Op-implementation interface.
  Var record(std::vector<double> value, Backward backward);
  const std::vector<double>& value(int id) const { return nodes_[id].value; }
  /// Gradient buffer of a node, allocated (zeroed) on first use.
  std::vector<double>& grad(int id);
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }
  void accumulate_param_grad(std::size_t index, double g) { param_grad_[index] += g; }

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    Backward backward;
  };

  std::span<const double> params_;
  std::vector<double> param_grad_;
  std::vector<Node> nodes_;
};

// Elementwise binary ops broadcast when one operand has size 1.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);
Var operator/(double c, const Var& a);

Var exp(const Var& a);
/// e^a - 1, accurate near zero.
Var expm1(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var square(const Var& a);
/// log(1 + e^a)
Var softplus(const Var& a);
/// Values below `floor` are replaced by `floor` with zero gradient; the
/// number of replaced entries is added to *clamped when non-null.
Var clamp_min(const Var& a, double floor, std::size_t* clamped = nullptr);

Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);
Var gather(const Var& a, std::span<const std::size_t> indices);
Var at(const Var& a, std::size_t i);
Var concat(std::span<const Var> parts);
/// Sum of a list of scalars (or same-size vectors).
Var add_all(std::span<const Var> terms);

/// y = (W .* mask) x with W stored row-major (rows x cols). A null mask
/// means dense.
Var matvec(const Var& w, std::size_t rows, std::size_t cols, const Var& x,
           std::shared_ptr<const std::vector<double>> mask = nullptr);

Var log_sum_exp(const Var& a);
Var log_softmax(const Var& a);

}  // namespace csm::ad
