#include "csm/autodiff.hpp"

#include <cmath>
#include <string>

#include "csm/error.hpp"
#include "csm/numeric.hpp"

namespace csm::ad {

std::size_t Var::size() const { return tape_->value(id_).size(); }
double Var::value(std::size_t i) const { return tape_->value(id_)[i]; }
std::span<const double> Var::values() const { return tape_->value(id_); }

Tape::Tape(std::span<const double> params) : params_(params), param_grad_(params.size(), 0.0) {}

Var Tape::record(std::vector<double> value, Backward backward) {
  nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

std::vector<double>& Tape::grad(int id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

Var Tape::param(std::size_t offset, std::size_t size) {
  if (offset + size > params_.size()) throw Error("Tape::param: slice exceeds the parameter vector");
  std::vector<double> v(params_.begin() + offset, params_.begin() + offset + size);
  return record(std::move(v), [offset](Tape& t, int self) {
    const auto& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) t.accumulate_param_grad(offset + i, g[i]);
  });
}

Var Tape::param_gather(std::span<const std::size_t> indices) {
  std::vector<double> v(indices.size());
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= params_.size()) throw Error("Tape::param_gather: index out of range");
    v[i] = params_[idx[i]];
  }
  return record(std::move(v), [idx = std::move(idx)](Tape& t, int self) {
    const auto& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) t.accumulate_param_grad(idx[i], g[i]);
  });
}

Var Tape::constant(std::vector<double> values) { return record(std::move(values), nullptr); }

void Tape::backward(const Var& output) {
  if (output.tape() != this) throw Error("Tape::backward: variable belongs to another tape");
  if (output.size() != 1) throw Error("Tape::backward: output must be a scalar");
  grad(output.id())[0] += 1.0;
  for (int id = output.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.backward && !node.grad.empty()) node.backward(*this, id);
  }
}

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw Error("autodiff: uninitialized variable");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw Error("autodiff: operands recorded on different tapes");
  return t;
}

std::size_t broadcast_size(const Var& a, const Var& b) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  if (na == nb || nb == 1) return na;
  if (na == 1) return nb;
  throw Error("autodiff: size mismatch " + std::to_string(na) + " vs " + std::to_string(nb));
}

// Elementwise binary op with broadcasting. fwd(a, b) -> value;
// bwd(a, b, out, g) -> {d/da, d/db} contributions.
template <typename Fwd, typename Bwd>
Var binary(const Var& a, const Var& b, Fwd fwd, Bwd bwd) {
  Tape& t = tape_of(a, b);
  const std::size_t n = broadcast_size(a, b);
  const auto& va = a.values();
  const auto& vb = b.values();
  const bool sa = va.size() == 1 && n != 1;
  const bool sb = vb.size() == 1 && n != 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(va[sa ? 0 : i], vb[sb ? 0 : i]);
  const int ia = a.id();
  const int ib = b.id();
  return t.record(std::move(out), [ia, ib, sa, sb, bwd](Tape& tp, int self) {
    const std::vector<double> g = tp.grad(self);
    const std::vector<double>& va = tp.value(ia);
    const std::vector<double>& vb = tp.value(ib);
    const std::vector<double>& vo = tp.value(self);
    std::vector<double>& ga = tp.grad(ia);
    std::vector<double>& gb = tp.grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = va[sa ? 0 : i];
      const double y = vb[sb ? 0 : i];
      const auto [da, db] = bwd(x, y, vo[i]);
      ga[sa ? 0 : i] += g[i] * da;
      gb[sb ? 0 : i] += g[i] * db;
    }
  });
}

// Elementwise unary op; bwd(x, out) -> derivative.
template <typename Fwd, typename Bwd>
Var unary(const Var& a, Fwd fwd, Bwd bwd) {
  Tape& t = tape_of(a);
  const auto& va = a.values();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(va[i]);
  const int ia = a.id();
  return t.record(std::move(out), [ia, bwd](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad(self);
    const std::vector<double>& va = tp.value(ia);
    const std::vector<double>& vo = tp.value(self);
    std::vector<double>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(va[i], vo[i]);
  });
}

struct Pair {
  double da;
  double db;
};

}  // namespace

Var operator+(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return Pair{1.0, 1.0}; });
}

Var operator-(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return Pair{1.0, -1.0}; });
}

Var operator*(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x * y; }, [](double x, double y, double) { return Pair{y, x}; });
}

Var operator/(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x / y; },
      [](double, double y, double o) { return Pair{1.0 / y, -o / y}; });
}

Var operator-(const Var& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var operator+(const Var& a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a + (-c); }
Var operator-(double c, const Var& a) {
  return unary(a, [c](double x) { return c - x; }, [](double, double) { return -1.0; });
}
Var operator*(const Var& a, double c) {
  return unary(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}
Var operator*(double c, const Var& a) { return a * c; }
Var operator/(const Var& a, double c) { return a * (1.0 / c); }
Var operator/(double c, const Var& a) {
  return unary(a, [c](double x) { return c / x; }, [](double x, double o) { return -o / x; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double o) { return o; });
}

Var expm1(const Var& a) {
  return unary(a, [](double x) { return std::expm1(x); }, [](double, double o) { return o + 1.0; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double o) { return 1.0 - o * o; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softplus(const Var& a) {
  return unary(a, [](double x) { return csm::softplus(x); }, [](double x, double) { return csm::sigmoid(x); });
}

Var clamp_min(const Var& a, double floor, std::size_t* clamped) {
  if (clamped) {
    for (double v : a.values()) *clamped += v < floor ? 1 : 0;
  }
  return unary(
      a, [floor](double x) { return x < floor ? floor : x; },
      [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.values()) s += v;
  const int ia = a.id();
  return t.record({s}, [ia](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    for (double& gi : tp.grad(ia)) gi += g;
  });
}

Var mean(const Var& a) { return sum(a) * (1.0 / static_cast<double>(a.size())); }

Var dot(const Var& a, const Var& b) { return sum(a * b); }

Var gather(const Var& a, std::span<const std::size_t> indices) {
  Tape& t = tape_of(a);
  const auto& va = a.values();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= va.size()) throw Error("gather: index out of range");
    out[i] = va[idx[i]];
  }
  const int ia = a.id();
  return t.record(std::move(out), [ia, idx = std::move(idx)](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad(self);
    std::vector<double>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += g[i];
  });
}

Var at(const Var& a, std::size_t i) {
  const std::size_t idx[1] = {i};
  return gather(a, idx);
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat: no parts");
  Tape& t = tape_of(parts.front());
  std::vector<double> out;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw Error("concat: parts recorded on different tapes");
    out.insert(out.end(), p.values().begin(), p.values().end());
    ids.push_back(p.id());
  }
  return t.record(std::move(out), [ids = std::move(ids)](Tape& tp, int self) {
    const std::vector<double> g = tp.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      std::vector<double>& gp = tp.grad(id);
      for (double& v : gp) v += g[off++];
    }
  });
}

Var add_all(std::span<const Var> terms) {
  if (terms.empty()) throw Error("add_all: no terms");
  Tape& t = tape_of(terms.front());
  const std::size_t n = terms.front().size();
  std::vector<double> out(n, 0.0);
  std::vector<int> ids;
  ids.reserve(terms.size());
  for (const Var& v : terms) {
    if (v.tape() != &t || v.size() != n) throw Error("add_all: mismatched terms");
    for (std::size_t i = 0; i < n; ++i) out[i] += v.value(i);
    ids.push_back(v.id());
  }
  return t.record(std::move(out), [ids = std::move(ids)](Tape& tp, int self) {
    const std::vector<double> g = tp.grad(self);
    for (int id : ids) {
      std::vector<double>& gi = tp.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var matvec(const Var& w, std::size_t rows, std::size_t cols, const Var& x,
           std::shared_ptr<const std::vector<double>> mask) {
  Tape& t = tape_of(w, x);
  if (w.size() != rows * cols) throw Error("matvec: weight size does not match rows x cols");
  if (x.size() != cols) throw Error("matvec: input size does not match cols");
  if (mask && mask->size() != rows * cols) throw Error("matvec: mask size mismatch");
  const auto& vw = w.values();
  const auto& vx = x.values();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const std::size_t base = r * cols;
    if (mask) {
      for (std::size_t c = 0; c < cols; ++c) s += (*mask)[base + c] * vw[base + c] * vx[c];
    } else {
      for (std::size_t c = 0; c < cols; ++c) s += vw[base + c] * vx[c];
    }
    out[r] = s;
  }
  const int iw = w.id();
  const int ix = x.id();
  return t.record(std::move(out), [iw, ix, rows, cols, mask](Tape& tp, int self) {
    const std::vector<double> g = tp.grad(self);
    const std::vector<double>& vw = tp.value(iw);
    const std::vector<double>& vx = tp.value(ix);
    std::vector<double>& gw = tp.grad(iw);
    std::vector<double>& gx = tp.grad(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      const double gr = g[r];
      if (gr == 0.0) continue;
      const std::size_t base = r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        const double m = mask ? (*mask)[base + c] : 1.0;
        if (m == 0.0) continue;
        gw[base + c] += gr * m * vx[c];
        gx[c] += gr * m * vw[base + c];
      }
    }
  });
}

Var log_sum_exp(const Var& a) {
  Tape& t = tape_of(a);
  const double lse = csm::log_sum_exp(a.values());
  const int ia = a.id();
  return t.record({lse}, [ia](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    const double lse = tp.value(self)[0];
    const std::vector<double>& va = tp.value(ia);
    std::vector<double>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < va.size(); ++i) ga[i] += g * std::exp(va[i] - lse);
  });
}

Var log_softmax(const Var& a) {
  Tape& t = tape_of(a);
  const double lse = csm::log_sum_exp(a.values());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value(i) - lse;
  const int ia = a.id();
  return t.record(std::move(out), [ia](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad(self);
    const std::vector<double>& vo = tp.value(self);
    std::vector<double>& ga = tp.grad(ia);
    double gs = 0.0;
    for (double gi : g) gs += gi;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] - std::exp(vo[i]) * gs;
  });
}

}  // namespace csm::ad
