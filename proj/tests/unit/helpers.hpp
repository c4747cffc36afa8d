#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "csm/models.hpp"

namespace csm::testing {

/// A parameter-free score model returning whatever `fn` says.
class FixedScoreModel final : public ScoreModel {
 public:
  FixedScoreModel(NeighborhoodStructure s, std::function<std::vector<double>(const State&)> fn)
      : structure_(std::move(s)), fn_(std::move(fn)) {}

  const NeighborhoodStructure& structure() const override { return structure_; }
  std::vector<double>& parameters() override { return params_; }
  const std::vector<double>& parameters() const override { return params_; }
  std::vector<double> score(const State& x) const override { return fn_(x); }
  ad::Var score(ad::Tape& tape, const State& x) const override { return tape.constant(fn_(x)); }

 private:
  NeighborhoodStructure structure_;
  std::function<std::vector<double>(const State&)> fn_;
  std::vector<double> params_;
};

inline std::vector<double> log_of(std::span<const double> p) {
  std::vector<double> out;
  for (double v : p) out.push_back(std::log(v));
  return out;
}

}  // namespace csm::testing
