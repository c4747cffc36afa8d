#include "csm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include "csm/checks.hpp"
#include "csm/error.hpp"
#include "csm/io.hpp"
#include "csm/samplers.hpp"
#include "csm/train.hpp"

namespace csm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const std::string v = trim(text);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError(key + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  const double v = parse_number<double>(key, text);
  if (!std::isfinite(v)) throw ParseError(key + ": value must be finite");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (const T& item : items) out += (out.empty() ? "" : ",") + fmt(item);
  return out;
}

// Wraps the library's name parsers so errors name the key.
template <typename Fn>
auto named(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw ParseError(key + ": " + e.what());
  }
}

struct KeyDef {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

KeyDef string_key(std::string name, std::string RunConfig::*field) {
  return {name, [field](RunConfig& c, const std::string& v) { c.*field = trim(v); },
          [field](const RunConfig& c) { return c.*field; }};
}

KeyDef size_key(std::string name, std::size_t RunConfig::*field) {
  return {name, [name, field](RunConfig& c, const std::string& v) { c.*field = parse_number<std::size_t>(name, v); },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

KeyDef u64_key(std::string name, std::uint64_t RunConfig::*field) {
  return {name,
          [name, field](RunConfig& c, const std::string& v) { c.*field = parse_number<std::uint64_t>(name, v); },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

KeyDef bool_key(std::string name, bool RunConfig::*field) {
  return {name, [name, field](RunConfig& c, const std::string& v) { c.*field = parse_bool(name, v); },
          [field](const RunConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

KeyDef adam_key(std::string name, double AdamConfig::*field) {
  return {name, [name, field](RunConfig& c, const std::string& v) { c.adam.*field = parse_real(name, v); },
          [field](const RunConfig& c) { return format_real(c.adam.*field); }};
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> keys{
      string_key("dataset", &RunConfig::dataset),
      string_key("dataset_path", &RunConfig::dataset_path),
      bool_key("csv_header", &RunConfig::csv_header),
      size_key("num_samples", &RunConfig::num_samples),
      {"bins", [](RunConfig& c, const std::string& v) { c.bins = parse_number<int>("bins", v); },
       [](const RunConfig& c) { return std::to_string(c.bins); }},
      u64_key("data_seed", &RunConfig::data_seed),
      {"structure",
       [](RunConfig& c, const std::string& v) {
         c.structure = named("structure", [&] { return parse_structure_kind(trim(v)); });
       },
       [](const RunConfig& c) { return to_string(c.structure); }},
      {"boundary",
       [](RunConfig& c, const std::string& v) {
         c.boundary = named("boundary", [&] { return parse_boundary(trim(v)); });
       },
       [](const RunConfig& c) { return to_string(c.boundary); }},
      string_key("edges_path", &RunConfig::edges_path),
      string_key("model", &RunConfig::model),
      {"hidden",
       [](RunConfig& c, const std::string& v) {
         c.hidden.clear();
         for (const auto& item : split_list(v)) c.hidden.push_back(parse_number<std::size_t>("hidden", item));
       },
       [](const RunConfig& c) {
         return join<std::size_t>(c.hidden, [](const std::size_t& h) { return std::to_string(h); });
       }},
      {"encoding",
       [](RunConfig& c, const std::string& v) {
         const std::string e = trim(v);
         if (e == "affine") {
           c.encoding = InputEncoding::Affine;
         } else if (e == "one_hot") {
           c.encoding = InputEncoding::OneHot;
         } else {
           throw ParseError("encoding: expected affine or one_hot, got '" + v + "'");
         }
       },
       [](const RunConfig& c) { return std::string(c.encoding == InputEncoding::Affine ? "affine" : "one_hot"); }},
      bool_key("direct", &RunConfig::direct),
      {"objective",
       [](RunConfig& c, const std::string& v) {
         c.objective = named("objective", [&] { return parse_objective(trim(v)); });
       },
       [](const RunConfig& c) { return to_string(c.objective); }},
      string_key("exact_target", &RunConfig::exact_target),
      adam_key("lr", &AdamConfig::lr),
      adam_key("beta1", &AdamConfig::beta1),
      adam_key("beta2", &AdamConfig::beta2),
      adam_key("eps", &AdamConfig::eps),
      size_key("batch_size", &RunConfig::batch_size),
      size_key("iterations", &RunConfig::iterations),
      size_key("log_every", &RunConfig::log_every),
      {"noise_w", [](RunConfig& c, const std::string& v) { c.noise_w = parse_real("noise_w", v); },
       [](const RunConfig& c) { return format_real(c.noise_w); }},
      {"noise_levels",
       [](RunConfig& c, const std::string& v) {
         c.noise_levels.clear();
         for (const auto& item : split_list(v)) c.noise_levels.push_back(parse_real("noise_levels", item));
       },
       [](const RunConfig& c) { return join<double>(c.noise_levels, [](const double& w) { return format_real(w); }); }},
      string_key("checkpoint", &RunConfig::checkpoint),
      size_key("steps", &RunConfig::steps),
      size_key("burn_in", &RunConfig::burn_in),
      size_key("thin", &RunConfig::thin),
      size_key("chains", &RunConfig::chains),
      string_key("suite", &RunConfig::suite),
      u64_key("seed", &RunConfig::seed),
      string_key("out", &RunConfig::out),
  };
  return keys;
}

const KeyDef& find_key(const std::string& key) {
  for (const KeyDef& k : key_table()) {
    if (k.name == key) return k;
  }
  throw ParseError("unknown config key '" + key + "'");
}

std::filesystem::path out_dir(const RunConfig& config) {
  std::filesystem::path dir(config.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + config.out + "': " + ec.message());
  return dir;
}

std::string checkpoint_path(const RunConfig& config) {
  return config.checkpoint.empty() ? (std::filesystem::path(config.out) / "checkpoint.bin").string()
                                   : config.checkpoint;
}

bool is_2d_toy(const std::string& name) {
  return name == "checkerboard" || name == "spirals" || name == "rings";
}

std::string fmt_csv(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const KeyDef& k : key_table()) out.push_back(k.name);
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  find_key(key).set(config, value);
  config.assigned.insert(key);
}

std::string get_config_value(const RunConfig& config, const std::string& key) { return find_key(key).get(config); }

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  try {
    return parse_config(in, std::move(base));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const KeyDef& k : key_table()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ParseError("invalid config: " + msg); };
  if (c.dataset != "toy1d" && c.dataset != "csv" && !is_2d_toy(c.dataset)) {
    fail("dataset must be toy1d, checkerboard, spirals, rings or csv");
  }
  if (c.dataset == "csv" && c.dataset_path.empty()) fail("dataset = csv needs dataset_path");
  if (c.num_samples == 0) fail("num_samples must be positive");
  if (c.bins < 2) fail("bins must be at least 2");
  if (c.structure == StructureKind::Explicit && c.edges_path.empty()) fail("structure = explicit needs edges_path");
  if (c.model != "logit_table" && c.model != "score_net" && c.model != "masked_ar") {
    fail("model must be logit_table, score_net or masked_ar");
  }
  if (c.model != "logit_table" && c.hidden.empty()) fail("hidden needs at least one layer size");
  if (std::find(c.hidden.begin(), c.hidden.end(), std::size_t{0}) != c.hidden.end()) fail("hidden sizes must be positive");
  if (c.model == "score_net" && needs_density(c.objective)) {
    fail("objective " + to_string(c.objective) + " needs a density model, not score_net");
  }
  if (c.exact_target != "empirical" && c.exact_target != "truth") fail("exact_target must be empirical or truth");
  if (!(c.adam.lr > 0.0)) fail("lr must be positive");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
  if (!(c.adam.eps > 0.0)) fail("eps must be positive");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (c.iterations == 0) fail("iterations must be positive");
  if (c.log_every == 0) fail("log_every must be positive");
  if (!(c.noise_w > 0.0 && c.noise_w < 1.0)) fail("noise_w must lie in (0, 1)");
  for (double w : c.noise_levels) {
    if (!(w > 0.0 && w < 1.0)) fail("noise_levels entries must lie in (0, 1)");
  }
  if (!c.noise_levels.empty() && c.objective != ObjectiveKind::Dcsm) fail("noise_levels requires objective = dcsm");
  if (c.thin == 0) fail("thin must be positive");
  if (c.burn_in > c.steps) fail("burn_in must not exceed steps");
  if (c.chains == 0) fail("chains must be positive");
  if (c.out.empty()) fail("out must not be empty");
  const auto suites = check_suite_names();
  if (c.suite != "all" && std::find(suites.begin(), suites.end(), c.suite) == suites.end()) {
    fail("unknown suite '" + c.suite + "'");
  }
}

Dataset make_dataset(const RunConfig& c) {
  if (c.dataset == "toy1d") return gen_1d_toy(c.num_samples, c.data_seed);
  if (is_2d_toy(c.dataset)) return gen_2d_toy(c.dataset, c.num_samples, c.bins, c.data_seed);
  if (c.dataset == "csv") return load_tabular_csv(c.dataset_path, c.csv_header);
  throw ParseError("unknown dataset '" + c.dataset + "'");
}

NeighborhoodStructure make_structure(const RunConfig& c, const DiscreteSpace& space) {
  if (c.structure == StructureKind::Explicit) return load_explicit_structure(c.edges_path, space);
  return build_structure(c.structure, space, c.boundary);
}

AnyModel make_model(const RunConfig& c, const NeighborhoodStructure& structure) {
  const DiscreteSpace& space = structure.space();
  if (c.model == "logit_table") {
    if (!space.enumerable()) throw Error("logit_table needs an enumerable space");
    return LogitTableModel(space);
  }
  if (c.model == "masked_ar") {
    for (int n : space.dims()) {
      if (n != 2) throw Error("masked_ar needs binary data");
    }
    return MaskedARModel(space.num_dims(), MaskedARConfig{c.hidden, c.direct, c.seed});
  }
  if (c.model == "score_net") return ScoreNetModel(structure, ScoreNetConfig{c.hidden, c.encoding, c.seed});
  throw ParseError("unknown model '" + c.model + "'");
}

TrainOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  validate_config(config);
  const Dataset data = make_dataset(config);
  const NeighborhoodStructure structure = make_structure(config, data.space);
  std::vector<double> levels = config.noise_levels;
  if (levels.empty()) levels.push_back(config.noise_w);
  std::sort(levels.begin(), levels.end());  // lowest stay probability = most noise first

  std::optional<TabularDistribution> target;
  if (config.objective == ObjectiveKind::CsmExact && config.exact_target == "truth") {
    if (!data.truth) throw Error("exact_target = truth but dataset '" + config.dataset + "' has no ground truth");
    target = data.truth;
  }

  Checkpoint cp;
  std::ostringstream train_log, timing;
  train_log << "level,iteration,objective,tv\n";
  timing << "level,iteration,seconds\n";
  TrainOutcome outcome;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t level = 0; level < levels.size(); ++level) {
    AnyModel model = make_model(config, structure);
    TrainOptions opts;
    opts.objective = config.objective;
    opts.adam = config.adam;
    opts.batch_size = config.batch_size;
    opts.iterations = config.iterations;
    opts.seed = config.seed + level;
    opts.log_every = config.log_every;
    opts.noise_w = levels[level];
    opts.exact_target = target;
    const TrainResult result = train_model(model, structure, data, opts, [&](const TrainLogRow& row) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      train_log << level << ',' << row.iteration << ',' << fmt_csv(row.objective) << ',' << fmt_csv(row.tv) << '\n';
      timing << level << ',' << row.iteration << ',' << fmt_csv(secs) << '\n';
      log << "level " << level << " iter " << row.iteration << " objective " << row.objective << " tv " << row.tv
          << '\n';
    });
    outcome.final_objective = result.final_objective;
    outcome.final_tv = result.final_tv;
    cp.models.push_back(std::move(model));
  }

  cp.meta["structure"] = structure_to_json(structure);
  cp.meta["objective"] = to_string(config.objective);
  cp.meta["noise_levels"] = levels;
  cp.meta["dataset"] = config.dataset;
  cp.meta["seed"] = config.seed;

  const auto dir = out_dir(config);
  outcome.checkpoint_path = (dir / "checkpoint.bin").string();
  save_checkpoint(outcome.checkpoint_path, cp);
  write_file_atomic((dir / "train_log.csv").string(), train_log.str());
  write_file_atomic((dir / "timing.csv").string(), timing.str());
  write_file_atomic((dir / "config.txt").string(), format_config(config));
  outcome.models = cp.models.size();
  return outcome;
}

SampleOutcome cmd_sample(const RunConfig& config, std::ostream& log) {
  validate_config(config);
  Checkpoint cp = load_checkpoint(checkpoint_path(config));
  if (cp.models.empty()) throw Error("checkpoint holds no model");

  // The stored structure unless the config names one explicitly.
  const DiscreteSpace space = [&] {
    if (const DensityModel* d = as_density(cp.models.front())) return d->space();
    return std::get<ScoreNetModel>(cp.models.front()).structure().space();
  }();
  const bool override_structure = config.assigned.count("structure") || config.assigned.count("boundary");
  NeighborhoodStructure structure = override_structure || !cp.meta.contains("structure")
                                        ? make_structure(config, space)
                                        : structure_from_json(cp.meta.at("structure"));

  std::vector<std::unique_ptr<ScoreModel>> owned;
  std::vector<const ScoreModel*> levels;
  for (AnyModel& m : cp.models) {
    if (DensityModel* d = as_density(m)) {
      owned.push_back(std::make_unique<ImpliedScoreModel>(*d, structure));
    } else {
      const auto& net = std::get<ScoreNetModel>(m);
      if (net.structure().max_degree() != structure.max_degree() || !(net.structure().space() == space) ||
          net.structure().kind() != structure.kind() || net.structure().boundary() != structure.boundary()) {
        throw Error("structure " + to_string(structure.kind()) + " does not match the score network's " +
                    to_string(net.structure().kind()) + " structure (degree " +
                    std::to_string(net.structure().max_degree()) + ")");
      }
      owned.push_back(nullptr);
      levels.push_back(&net);
      continue;
    }
    levels.push_back(owned.back().get());
  }

  Rng init_rng(config.seed, 0x1a1);
  std::vector<State> inits;
  for (std::size_t c = 0; c < config.chains; ++c) {
    State x(space.num_dims());
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = static_cast<int>(init_rng.uniform_index(space.dim(d)));
    inits.push_back(std::move(x));
  }

  SampleOutcome outcome;
  ChainStats stats;
  if (levels.size() == 1) {
    for (auto& chain : run_chains(*levels.front(), inits, config.steps, config.burn_in, config.thin, config.seed, 0,
                                  &stats)) {
      outcome.samples.insert(outcome.samples.end(), chain.begin(), chain.end());
    }
  } else {
    for (std::size_t c = 0; c < inits.size(); ++c) {
      Rng rng(config.seed, c);
      const auto chain = run_annealed(levels, inits[c], config.steps, config.burn_in, config.thin, rng, &stats);
      outcome.samples.insert(outcome.samples.end(), chain.begin(), chain.end());
    }
  }
  outcome.acceptance_rate = stats.acceptance_rate();

  const auto dir = out_dir(config);
  std::ostringstream csv;
  write_samples_csv(outcome.samples, csv);
  write_file_atomic((dir / "samples.csv").string(), csv.str());
  if (space.num_dims() == 2) {
    std::ostringstream pgm;
    write_pgm_histogram(outcome.samples, space, pgm);
    write_file_atomic((dir / "samples.pgm").string(), pgm.str());
  }
  log << outcome.samples.size() << " samples from " << config.chains << " chain(s), " << levels.size()
      << " level(s), acceptance " << outcome.acceptance_rate << '\n';
  return outcome;
}

double cmd_eval(const RunConfig& config, std::ostream& log) {
  validate_config(config);
  Checkpoint cp = load_checkpoint(checkpoint_path(config));
  if (cp.models.empty()) throw Error("checkpoint holds no model");
  const DensityModel* model = as_density(cp.models.back());
  if (!model) throw Error("eval needs a normalizable model (logit_table or masked_ar), got score_net");
  const Dataset data = make_dataset(config);
  if (!(data.space == model->space())) throw Error("eval: dataset and model spaces differ");

  const double log_z = model->log_partition();
  std::ostringstream csv;
  csv << "index,log_likelihood\n";
  double total = 0.0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const double ll = model->log_q(data.samples[i]) - log_z;
    total += ll;
    csv << i << ',' << fmt_csv(ll) << '\n';
  }
  const double mean = total / static_cast<double>(data.samples.size());
  const auto dir = out_dir(config);
  write_file_atomic((dir / "eval.csv").string(), csv.str());
  write_file_atomic((dir / "eval_summary.csv").string(),
                    "num_samples,mean_log_likelihood\n" + std::to_string(data.samples.size()) + "," + fmt_csv(mean) +
                        "\n");
  log << "mean log-likelihood " << mean << " nats over " << data.samples.size() << " samples\n";
  return mean;
}

bool cmd_check(const RunConfig& config, std::ostream& log) {
  validate_config(config);
  const std::vector<std::string> suites =
      config.suite == "all" ? check_suite_names() : std::vector<std::string>{config.suite};
  std::ostringstream report;
  bool ok = true;
  bool first = true;
  for (const std::string& suite : suites) {
    const auto results = run_check_suite(suite, config.seed);
    for (const CheckResult& r : results) ok = ok && r.passed;
    std::ostringstream part;
    write_check_report(suite, results, part);
    std::string text = part.str();
    if (!first) text.erase(0, text.find('\n') + 1);  // one header for the whole report
    first = false;
    report << text;
  }
  const auto dir = out_dir(config);
  write_file_atomic((dir / ("check_" + config.suite + ".csv")).string(), report.str());
  log << report.str();
  return ok;
}

}  // namespace csm
