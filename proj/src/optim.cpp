#include "csm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csm/error.hpp"

namespace csm {

Adam::Adam(std::size_t num_params, AdamConfig config)
    : config_(config), m_(num_params, 0.0), v_(num_params, 0.0) {
  if (!(config_.lr > 0.0)) throw Error("Adam: learning rate must be positive");
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0 && config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw Error("Adam: betas must lie in [0, 1)");
  }
}

void Adam::step(std::vector<double>& params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error("Adam: parameter/gradient size does not match the optimizer state");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) throw NumericError("Adam: non-finite gradient at parameter " + std::to_string(i));
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
    params[i] -= config_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
  }
}

GradCheckResult gradient_check(const std::function<double()>& value, std::vector<double>& params,
                               std::span<const double> analytic, double h, std::size_t max_coords, double floor) {
  if (analytic.size() != params.size()) throw Error("gradient_check: gradient size mismatch");
  GradCheckResult r;
  const std::size_t n = params.size();
  const std::size_t stride = (max_coords == 0 || max_coords >= n) ? 1 : (n + max_coords - 1) / max_coords;
  for (std::size_t i = 0; i < n; i += stride) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = value();
    params[i] = saved - h;
    const double down = value();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    if (err > r.max_rel_error || r.checked == 0) {
      r.max_rel_error = std::max(r.max_rel_error, err);
      if (err >= r.max_rel_error) {
        r.worst_index = i;
        r.analytic_at_worst = a;
        r.numeric_at_worst = numeric;
      }
    }
    ++r.checked;
  }
  return r;
}

}  // namespace csm
