#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace csm {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t num_params, AdamConfig config = {});

  /// params -= lr * m_hat / (sqrt(v_hat) + eps). A non-finite gradient
  /// throws NumericError naming its index and leaves the state untouched.
  void step(std::vector<double>& params, std::span<const double> grad);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
};

/// Compares `analytic` against central differences of `value` (which reads
/// `params`) with step h. Relative error is |a - n| / max(|a|, |n|, floor).
/// When max_coords is nonzero and smaller than params.size(), an evenly
/// strided subset of coordinates is checked. Params are restored on return.
GradCheckResult gradient_check(const std::function<double()>& value, std::vector<double>& params,
                               std::span<const double> analytic, double h = 1e-5, std::size_t max_coords = 0,
                               double floor = 1e-6);

}  // namespace csm
