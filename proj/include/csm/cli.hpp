#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "csm/data.hpp"
#include "csm/graphs.hpp"
#include "csm/models.hpp"
#include "csm/objectives.hpp"
#include "csm/optim.hpp"

namespace csm {

/// Everything a command needs. Each field is settable through a config key
/// of the same name; see config_keys().
struct RunConfig {
  // dataset
  std::string dataset = "toy1d";  ///< toy1d, checkerboard, spirals, rings or csv
  std::string dataset_path;       ///< csv only
  bool csv_header = false;
  std::size_t num_samples = 100000;
  int bins = 91;
  std::uint64_t data_seed = 0;

  // structure
  StructureKind structure = StructureKind::Grid;
  Boundary boundary = Boundary::Drop;
  std::string edges_path;  ///< explicit structures only

  // model
  std::string model = "logit_table";  ///< logit_table, score_net or masked_ar
  std::vector<std::size_t> hidden{100, 100, 100};
  InputEncoding encoding = InputEncoding::Affine;
  bool direct = true;

  // training
  ObjectiveKind objective = ObjectiveKind::CsmMc;
  std::string exact_target = "empirical";  ///< csm_exact: empirical or truth
  AdamConfig adam;
  std::size_t batch_size = 128;
  std::size_t iterations = 1000;
  std::size_t log_every = 100;
  double noise_w = 0.9;
  /// dcsm only: one model per stay probability, bundled for annealed sampling.
  std::vector<double> noise_levels;

  // sampling and evaluation
  std::string checkpoint;  ///< defaults to <out>/checkpoint.bin
  std::size_t steps = 1000;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::size_t chains = 1;

  // checks
  std::string suite = "completeness";  ///< a check suite name or "all"

  std::uint64_t seed = 0;
  std::string out = ".";

  /// Keys assigned explicitly (file or override), as opposed to defaults.
  std::set<std::string> assigned;
};

std::vector<std::string> config_keys();

/// Parses `value` into the field named `key`. Throws ParseError for unknown
/// keys and malformed values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// `key = value` lines; blank lines and `#` comments are ignored. Errors
/// name the line. Keys not present keep their value from `base`.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
/// Every key in config_keys() order; parse_config reads it back unchanged.
std::string format_config(const RunConfig& config);

/// Range and consistency checks that need no data. Throws ParseError.
void validate_config(const RunConfig& config);

Dataset make_dataset(const RunConfig& config);
NeighborhoodStructure make_structure(const RunConfig& config, const DiscreteSpace& space);
AnyModel make_model(const RunConfig& config, const NeighborhoodStructure& structure);

struct TrainOutcome {
  std::string checkpoint_path;
  std::size_t models = 0;
  double final_objective = 0.0;
  double final_tv = 0.0;  ///< NaN without ground truth
};

/// Writes <out>/checkpoint.bin, train_log.csv (level,iteration,objective,tv),
/// timing.csv (level,iteration,seconds) and config.txt. Progress goes to `log`.
TrainOutcome cmd_train(const RunConfig& config, std::ostream& log);

struct SampleOutcome {
  std::vector<State> samples;
  double acceptance_rate = 0.0;
};

/// Runs `chains` MH chains (annealed over the bundled levels when the
/// checkpoint holds several models) from uniform random starts and writes
/// <out>/samples.csv, plus samples.pgm for 2-D spaces.
SampleOutcome cmd_sample(const RunConfig& config, std::ostream& log);

/// Writes <out>/eval.csv (index,log_likelihood) and eval_summary.csv
/// (num_samples,mean_log_likelihood); returns the mean in nats.
double cmd_eval(const RunConfig& config, std::ostream& log);

/// Runs a check suite (or all of them), writes <out>/check_<suite>.csv and
/// mirrors it on `log`. Returns true when every check passed.
bool cmd_check(const RunConfig& config, std::ostream& log);

}  // namespace csm
