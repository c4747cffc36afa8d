#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "csm/autodiff.hpp"
#include "csm/exact.hpp"
#include "csm/graphs.hpp"
#include "csm/space.hpp"
#include "json.hpp"

namespace csm {

/// Anything that maps a state to c(x; N), one entry per neighbor of x.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual const NeighborhoodStructure& structure() const = 0;
  virtual std::vector<double>& parameters() = 0;
  virtual const std::vector<double>& parameters() const = 0;

  virtual std::vector<double> score(const State& x) const = 0;
  virtual ad::Var score(ad::Tape& tape, const State& x) const = 0;

  // Single entries; density-implied models override these to avoid
  // evaluating every neighbor.
  virtual double score_entry(const State& x, std::size_t i) const { return score(x).at(i); }
  virtual ad::Var score_entry(ad::Tape& tape, const State& x, std::size_t i) const {
    return ad::at(score(tape, x), i);
  }
};

/// Anything exposing an unnormalized log-mass log q(x).
class DensityModel {
 public:
  virtual ~DensityModel() = default;

  virtual std::string kind() const = 0;
  virtual const DiscreteSpace& space() const = 0;
  virtual std::vector<double>& parameters() = 0;
  virtual const std::vector<double>& parameters() const = 0;

  virtual double log_q(const State& x) const = 0;
  virtual ad::Var log_q(ad::Tape& tape, const State& x) const = 0;

  /// log of the normalizer; 0 for models normalized by construction.
  /// Throws EnumerationLimit when it cannot be computed.
  virtual double log_partition() const = 0;
  virtual ad::Var log_partition(ad::Tape& tape) const = 0;

  /// log q(xi | x without dim d) for xi = 0..n_d-1, by evaluating the joint
  /// at every value of coordinate d and normalizing.
  virtual std::vector<double> conditional_log_probs(const State& x, std::size_t d) const;
  virtual ad::Var conditional_log_probs(ad::Tape& tape, const State& x, std::size_t d) const;
};

/// Exact log-probability of x; normalizes through log_partition().
double log_mass(const DensityModel& model, const State& x);

/// Entry i is q(N(x)_i) / q(x) - 1; costs |N(x)| + 1 density evaluations.
std::vector<double> implied_concrete_score(const DensityModel& model, const NeighborhoodStructure& structure,
                                           const State& x);

/// One logit per state of an enumerable space: q(x) = exp(logits[x]).
class LogitTableModel final : public DensityModel {
 public:
  /// All-zero logits (uniform).
  explicit LogitTableModel(DiscreteSpace space);
  LogitTableModel(DiscreteSpace space, std::vector<double> logits);

  std::string kind() const override { return "logit_table"; }
  const DiscreteSpace& space() const override { return space_; }
  std::vector<double>& parameters() override { return logits_; }
  const std::vector<double>& parameters() const override { return logits_; }

  double log_q(const State& x) const override;
  ad::Var log_q(ad::Tape& tape, const State& x) const override;
  double log_partition() const override;
  ad::Var log_partition(ad::Tape& tape) const override;
  std::vector<double> conditional_log_probs(const State& x, std::size_t d) const override;
  ad::Var conditional_log_probs(ad::Tape& tape, const State& x, std::size_t d) const override;

  /// softmax(logits).
  TabularDistribution distribution() const;

 private:
  std::vector<std::size_t> line_indices(const State& x, std::size_t d) const;

  DiscreteSpace space_;
  std::vector<double> logits_;
};

enum class InputEncoding { Affine, OneHot };

struct ScoreNetConfig {
  std::vector<std::size_t> hidden{100, 100, 100};
  InputEncoding encoding = InputEncoding::Affine;
  std::uint64_t seed = 0;
};

/// Feed-forward tanh network emitting one output per neighbor slot of its
/// structure; score(x) keeps the outputs of the slots x actually has.
///
/// The affine encoding maps coordinate d to 2 x_d / (n_d - 1) - 1 in [-1, 1];
/// the one-hot encoding concatenates per-dimension indicators.
class ScoreNetModel final : public ScoreModel {
 public:
  ScoreNetModel(NeighborhoodStructure structure, ScoreNetConfig config);

  const NeighborhoodStructure& structure() const override { return structure_; }
  std::vector<double>& parameters() override { return params_; }
  const std::vector<double>& parameters() const override { return params_; }
  const ScoreNetConfig& config() const { return config_; }

  std::vector<double> score(const State& x) const override;
  ad::Var score(ad::Tape& tape, const State& x) const override;

  /// Raw outputs for all max_degree() slots.
  std::vector<double> slot_outputs(const State& x) const;
  std::vector<double> encode(const State& x) const;

 private:
  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  NeighborhoodStructure structure_;
  ScoreNetConfig config_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

struct MaskedARConfig {
  std::vector<std::size_t> hidden{100};
  /// Masked input-to-output connections alongside the hidden path.
  bool direct = true;
  std::uint64_t seed = 0;
};

/// Autoregressive model over D binary variables with masked tanh layers.
///
/// Output d is the Bernoulli logit of x_d given x_0..x_{d-1}; masks follow
/// the usual degree construction (input d has degree d+1, hidden unit k has
/// degree 1 + k mod (D-1), a connection exists when the degrees allow it).
/// log q(x) is exactly normalized.
class MaskedARModel final : public DensityModel {
 public:
  MaskedARModel(std::size_t num_dims, MaskedARConfig config);

  std::string kind() const override { return "masked_ar"; }
  const DiscreteSpace& space() const override { return space_; }
  std::vector<double>& parameters() override { return params_; }
  const std::vector<double>& parameters() const override { return params_; }
  const MaskedARConfig& config() const { return config_; }

  double log_q(const State& x) const override;
  ad::Var log_q(ad::Tape& tape, const State& x) const override;
  double log_partition() const override { return 0.0; }
  ad::Var log_partition(ad::Tape& tape) const override { return tape.scalar(0.0); }

  /// Conditional logits z_d(x_{<d}).
  std::vector<double> logits(const State& x) const;
  ad::Var logits(ad::Tape& tape, const State& x) const;

 private:
  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
    std::shared_ptr<const std::vector<double>> mask;
  };

  DiscreteSpace space_;
  MaskedARConfig config_;
  std::vector<Layer> layers_;  // hidden layers then the output layer
  std::size_t direct_offset_ = 0;
  std::shared_ptr<const std::vector<double>> direct_mask_;
  std::vector<double> params_;
};

/// Concrete scores implied by a density model's ratios on a structure.
/// Holds a reference; the density model must outlive it.
class ImpliedScoreModel final : public ScoreModel {
 public:
  ImpliedScoreModel(DensityModel& density, NeighborhoodStructure structure);

  const NeighborhoodStructure& structure() const override { return structure_; }
  std::vector<double>& parameters() override { return density_->parameters(); }
  const std::vector<double>& parameters() const override { return density_->parameters(); }
  const DensityModel& density() const { return *density_; }

  std::vector<double> score(const State& x) const override;
  ad::Var score(ad::Tape& tape, const State& x) const override;
  double score_entry(const State& x, std::size_t i) const override;
  ad::Var score_entry(ad::Tape& tape, const State& x, std::size_t i) const override;

 private:
  DensityModel* density_;
  NeighborhoodStructure structure_;
};

using AnyModel = std::variant<LogitTableModel, ScoreNetModel, MaskedARModel>;

std::string model_kind(const AnyModel& model);
std::vector<double>& model_parameters(AnyModel& model);
const std::vector<double>& model_parameters(const AnyModel& model);
/// Density view, or nullptr for direct score networks.
DensityModel* as_density(AnyModel& model);
const DensityModel* as_density(const AnyModel& model);

/// A structure description that round-trips through checkpoint headers.
nlohmann::json structure_to_json(const NeighborhoodStructure& structure);
NeighborhoodStructure structure_from_json(const nlohmann::json& j);

/// Checkpoint layout: one line of JSON text (model kinds, shapes, seeds,
/// parameter counts, free-form metadata) terminated by '\n', followed by
/// every model's parameters as little-endian float64, in header order.
struct Checkpoint {
  std::vector<AnyModel> models;
  nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace csm
