#include "csm/models.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "csm/error.hpp"
#include "csm/io.hpp"
#include "csm/numeric.hpp"
#include "csm/rng.hpp"

namespace csm {

// ---------------------------------------------------------------- densities

std::vector<double> DensityModel::conditional_log_probs(const State& x, std::size_t d) const {
  State y = x;
  std::vector<double> lq(space().dim(d));
  for (int v = 0; v < space().dim(d); ++v) {
    y[d] = v;
    lq[v] = log_q(y);
  }
  const double lse = csm::log_sum_exp(lq);
  for (double& v : lq) v -= lse;
  return lq;
}

ad::Var DensityModel::conditional_log_probs(ad::Tape& tape, const State& x, std::size_t d) const {
  State y = x;
  std::vector<ad::Var> parts;
  for (int v = 0; v < space().dim(d); ++v) {
    y[d] = v;
    parts.push_back(log_q(tape, y));
  }
  return ad::log_softmax(ad::concat(parts));
}

double log_mass(const DensityModel& model, const State& x) { return model.log_q(x) - model.log_partition(); }

std::vector<double> implied_concrete_score(const DensityModel& model, const NeighborhoodStructure& structure,
                                           const State& x) {
  const double lx = model.log_q(x);
  std::vector<double> out;
  for (const State& y : structure.neighbors(x)) out.push_back(std::expm1(model.log_q(y) - lx));
  return out;
}

LogitTableModel::LogitTableModel(DiscreteSpace space)
    : space_(std::move(space)), logits_(space_.total_states(), 0.0) {}

LogitTableModel::LogitTableModel(DiscreteSpace space, std::vector<double> logits)
    : space_(std::move(space)), logits_(std::move(logits)) {
  if (logits_.size() != space_.total_states()) {
    throw Error("LogitTableModel: " + std::to_string(logits_.size()) + " logits for " +
                std::to_string(space_.total_states()) + " states");
  }
}

double LogitTableModel::log_q(const State& x) const {
  space_.validate(x);
  return logits_[space_.index(x)];
}

ad::Var LogitTableModel::log_q(ad::Tape& tape, const State& x) const {
  space_.validate(x);
  const std::size_t idx[1] = {static_cast<std::size_t>(space_.index(x))};
  return tape.param_gather(idx);
}

double LogitTableModel::log_partition() const { return csm::log_sum_exp(logits_); }

ad::Var LogitTableModel::log_partition(ad::Tape& tape) const {
  return ad::log_sum_exp(tape.param(0, logits_.size()));
}

std::vector<std::size_t> LogitTableModel::line_indices(const State& x, std::size_t d) const {
  space_.validate(x);
  State y = x;
  std::vector<std::size_t> idx(space_.dim(d));
  for (int v = 0; v < space_.dim(d); ++v) {
    y[d] = v;
    idx[v] = space_.index(y);
  }
  return idx;
}

std::vector<double> LogitTableModel::conditional_log_probs(const State& x, std::size_t d) const {
  std::vector<double> out;
  for (std::size_t i : line_indices(x, d)) out.push_back(logits_[i]);
  const double lse = csm::log_sum_exp(out);
  for (double& v : out) v -= lse;
  return out;
}

ad::Var LogitTableModel::conditional_log_probs(ad::Tape& tape, const State& x, std::size_t d) const {
  return ad::log_softmax(tape.param_gather(line_indices(x, d)));
}

TabularDistribution LogitTableModel::distribution() const {
  return TabularDistribution::from_log_weights(space_, logits_);
}

// ---------------------------------------------------------------- score net

namespace {

void glorot_fill(std::vector<double>& params, std::size_t offset, std::size_t in, std::size_t out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  for (std::size_t i = 0; i < in * out; ++i) params[offset + i] = (2.0 * rng.uniform() - 1.0) * a;
}

// Plain y = (W .* mask) x + b.
void affine(const std::vector<double>& params, std::size_t w_off, std::size_t b_off, std::size_t in, std::size_t out,
            const std::vector<double>& x, const std::vector<double>* mask, std::vector<double>& y) {
  y.assign(out, 0.0);
  for (std::size_t r = 0; r < out; ++r) {
    double s = params[b_off + r];
    const std::size_t base = w_off + r * in;
    if (mask) {
      const std::size_t mbase = r * in;
      for (std::size_t c = 0; c < in; ++c) s += (*mask)[mbase + c] * params[base + c] * x[c];
    } else {
      for (std::size_t c = 0; c < in; ++c) s += params[base + c] * x[c];
    }
    y[r] = s;
  }
}

}  // namespace

ScoreNetModel::ScoreNetModel(NeighborhoodStructure structure, ScoreNetConfig config)
    : structure_(std::move(structure)), config_(std::move(config)) {
  if (structure_.max_degree() == 0) throw Error("ScoreNetModel: structure has no neighbor slots");
  std::size_t in = 0;
  for (int n : structure_.space().dims()) {
    in += config_.encoding == InputEncoding::Affine ? 1 : static_cast<std::size_t>(n);
  }
  std::size_t offset = 0;
  auto add_layer = [&](std::size_t out) {
    layers_.push_back({in, out, offset, offset + in * out});
    offset += in * out + out;
    in = out;
  };
  for (std::size_t h : config_.hidden) {
    if (h == 0) throw Error("ScoreNetModel: hidden widths must be positive");
    add_layer(h);
  }
  add_layer(structure_.max_degree());
  params_.assign(offset, 0.0);
  Rng rng(config_.seed, 0x5c0e);
  for (const Layer& l : layers_) glorot_fill(params_, l.weight_offset, l.in, l.out, rng);
}

std::vector<double> ScoreNetModel::encode(const State& x) const {
  const auto& dims = structure_.space().dims();
  structure_.space().validate(x);
  std::vector<double> v;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    if (config_.encoding == InputEncoding::Affine) {
      v.push_back(2.0 * x[d] / static_cast<double>(dims[d] - 1) - 1.0);
    } else {
      for (int k = 0; k < dims[d]; ++k) v.push_back(k == x[d] ? 1.0 : 0.0);
    }
  }
  return v;
}

std::vector<double> ScoreNetModel::slot_outputs(const State& x) const {
  std::vector<double> h = encode(x);
  std::vector<double> next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    affine(params_, layer.weight_offset, layer.bias_offset, layer.in, layer.out, h, nullptr, next);
    if (l + 1 < layers_.size()) {
      for (double& v : next) v = std::tanh(v);
    }
    h.swap(next);
  }
  return h;
}

std::vector<double> ScoreNetModel::score(const State& x) const {
  const std::vector<double> out = slot_outputs(x);
  std::vector<double> s;
  for (std::size_t slot : structure_.slots(x)) s.push_back(out[slot]);
  return s;
}

ad::Var ScoreNetModel::score(ad::Tape& tape, const State& x) const {
  ad::Var h = tape.constant(encode(x));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    ad::Var w = tape.param(layer.weight_offset, layer.in * layer.out);
    ad::Var b = tape.param(layer.bias_offset, layer.out);
    h = ad::matvec(w, layer.out, layer.in, h) + b;
    if (l + 1 < layers_.size()) h = ad::tanh(h);
  }
  return ad::gather(h, structure_.slots(x));
}

// ---------------------------------------------------------------- masked AR

MaskedARModel::MaskedARModel(std::size_t num_dims, MaskedARConfig config)
    : space_(DiscreteSpace::binary(num_dims)), config_(std::move(config)) {
  if (num_dims == 0) throw Error("MaskedARModel: at least one dimension is required");
  const std::size_t D = num_dims;
  const std::size_t span = std::max<std::size_t>(1, D - 1);
  std::vector<std::size_t> prev_degree(D);
  for (std::size_t d = 0; d < D; ++d) prev_degree[d] = d + 1;
  std::size_t offset = 0;
  std::size_t in = D;
  for (std::size_t width : config_.hidden) {
    if (width == 0) throw Error("MaskedARModel: hidden widths must be positive");
    std::vector<std::size_t> degree(width);
    for (std::size_t k = 0; k < width; ++k) degree[k] = 1 + k % span;
    auto mask = std::make_shared<std::vector<double>>(width * in, 0.0);
    for (std::size_t k = 0; k < width; ++k) {
      for (std::size_t j = 0; j < in; ++j) (*mask)[k * in + j] = degree[k] >= prev_degree[j] ? 1.0 : 0.0;
    }
    layers_.push_back({in, width, offset, offset + in * width, std::move(mask)});
    offset += in * width + width;
    in = width;
    prev_degree = std::move(degree);
  }
  auto out_mask = std::make_shared<std::vector<double>>(D * in, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t k = 0; k < in; ++k) (*out_mask)[d * in + k] = (d + 1) > prev_degree[k] ? 1.0 : 0.0;
  }
  layers_.push_back({in, D, offset, offset + in * D, std::move(out_mask)});
  offset += in * D + D;
  if (config_.direct) {
    auto mask = std::make_shared<std::vector<double>>(D * D, 0.0);
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t j = 0; j < d; ++j) (*mask)[d * D + j] = 1.0;
    }
    direct_offset_ = offset;
    direct_mask_ = std::move(mask);
    offset += D * D;
  }
  params_.assign(offset, 0.0);
  Rng rng(config_.seed, 0x3ade);
  for (const Layer& l : layers_) glorot_fill(params_, l.weight_offset, l.in, l.out, rng);
  // direct weights start at zero
}

std::vector<double> MaskedARModel::logits(const State& x) const {
  space_.validate(x);
  const std::size_t D = space_.num_dims();
  std::vector<double> input(x.begin(), x.end());
  std::vector<double> h = input;
  std::vector<double> next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    affine(params_, layer.weight_offset, layer.bias_offset, layer.in, layer.out, h, layer.mask.get(), next);
    if (l + 1 < layers_.size()) {
      for (double& v : next) v = std::tanh(v);
    }
    h.swap(next);
  }
  if (config_.direct) {
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t j = 0; j < d; ++j) h[d] += params_[direct_offset_ + d * D + j] * input[j];
    }
  }
  return h;
}

ad::Var MaskedARModel::logits(ad::Tape& tape, const State& x) const {
  space_.validate(x);
  const std::size_t D = space_.num_dims();
  ad::Var input = tape.constant(std::vector<double>(x.begin(), x.end()));
  ad::Var h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    ad::Var w = tape.param(layer.weight_offset, layer.in * layer.out);
    ad::Var b = tape.param(layer.bias_offset, layer.out);
    h = ad::matvec(w, layer.out, layer.in, h, layer.mask) + b;
    if (l + 1 < layers_.size()) h = ad::tanh(h);
  }
  if (config_.direct) {
    ad::Var w = tape.param(direct_offset_, D * D);
    h = h + ad::matvec(w, D, D, input, direct_mask_);
  }
  return h;
}

double MaskedARModel::log_q(const State& x) const {
  const std::vector<double> z = logits(x);
  double lq = 0.0;
  for (std::size_t d = 0; d < z.size(); ++d) {
    const double s = x[d] == 1 ? 1.0 : -1.0;
    lq -= softplus(-s * z[d]);
  }
  return lq;
}

ad::Var MaskedARModel::log_q(ad::Tape& tape, const State& x) const {
  ad::Var z = logits(tape, x);
  std::vector<double> sign(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) sign[d] = x[d] == 1 ? -1.0 : 1.0;
  return -ad::sum(ad::softplus(tape.constant(std::move(sign)) * z));
}

// ---------------------------------------------------------------- implied

ImpliedScoreModel::ImpliedScoreModel(DensityModel& density, NeighborhoodStructure structure)
    : density_(&density), structure_(std::move(structure)) {
  if (!(density.space() == structure_.space())) {
    throw Error("ImpliedScoreModel: density model and structure use different spaces");
  }
}

std::vector<double> ImpliedScoreModel::score(const State& x) const {
  return implied_concrete_score(*density_, structure_, x);
}

ad::Var ImpliedScoreModel::score(ad::Tape& tape, const State& x) const {
  const auto nbrs = structure_.neighbors(x);
  if (nbrs.empty()) return tape.constant({});
  ad::Var lx = density_->log_q(tape, x);
  std::vector<ad::Var> ly;
  ly.reserve(nbrs.size());
  for (const State& y : nbrs) ly.push_back(density_->log_q(tape, y));
  return ad::expm1(ad::concat(ly) - lx);
}

double ImpliedScoreModel::score_entry(const State& x, std::size_t i) const {
  return std::expm1(density_->log_q(structure_.neighbor(x, i)) - density_->log_q(x));
}

ad::Var ImpliedScoreModel::score_entry(ad::Tape& tape, const State& x, std::size_t i) const {
  const State y = structure_.neighbor(x, i);
  return ad::expm1(density_->log_q(tape, y) - density_->log_q(tape, x));
}

// ---------------------------------------------------------------- variant helpers

std::string model_kind(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ScoreNetModel>) {
          return "score_net";
        } else {
          return m.kind();
        }
      },
      model);
}

std::vector<double>& model_parameters(AnyModel& model) {
  return std::visit([](auto& m) -> std::vector<double>& { return m.parameters(); }, model);
}

const std::vector<double>& model_parameters(const AnyModel& model) {
  return std::visit([](const auto& m) -> const std::vector<double>& { return m.parameters(); }, model);
}

DensityModel* as_density(AnyModel& model) {
  if (auto* m = std::get_if<LogitTableModel>(&model)) return m;
  if (auto* m = std::get_if<MaskedARModel>(&model)) return m;
  return nullptr;
}

const DensityModel* as_density(const AnyModel& model) { return as_density(const_cast<AnyModel&>(model)); }

// ---------------------------------------------------------------- checkpoints

nlohmann::json structure_to_json(const NeighborhoodStructure& structure) {
  nlohmann::json j;
  j["kind"] = to_string(structure.kind());
  j["boundary"] = to_string(structure.boundary());
  j["dims"] = structure.space().dims();
  if (structure.kind() == StructureKind::Explicit) {
    nlohmann::json edges = nlohmann::json::array();
    for (const State& x : structure.space().enumerate()) {
      for (const State& y : structure.neighbors(x)) edges.push_back({x, y});
    }
    j["edges"] = std::move(edges);
  }
  return j;
}

NeighborhoodStructure structure_from_json(const nlohmann::json& j) {
  DiscreteSpace space(j.at("dims").get<std::vector<int>>());
  const StructureKind kind = parse_structure_kind(j.at("kind").get<std::string>());
  if (kind == StructureKind::Explicit) {
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<State>(), e.at(1).get<State>());
    return build_explicit_structure(space, edges);
  }
  return build_structure(kind, space, parse_boundary(j.value("boundary", std::string("drop"))));
}

namespace {

nlohmann::json model_header(const AnyModel& model) {
  nlohmann::json j;
  j["kind"] = model_kind(model);
  j["num_params"] = model_parameters(model).size();
  if (const auto* m = std::get_if<LogitTableModel>(&model)) {
    j["dims"] = m->space().dims();
  } else if (const auto* m = std::get_if<ScoreNetModel>(&model)) {
    j["structure"] = structure_to_json(m->structure());
    j["hidden"] = m->config().hidden;
    j["encoding"] = m->config().encoding == InputEncoding::Affine ? "affine" : "onehot";
    j["seed"] = m->config().seed;
  } else if (const auto* m = std::get_if<MaskedARModel>(&model)) {
    j["num_dims"] = m->space().num_dims();
    j["hidden"] = m->config().hidden;
    j["direct"] = m->config().direct;
    j["seed"] = m->config().seed;
  }
  return j;
}

AnyModel model_from_header(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "logit_table") return LogitTableModel(DiscreteSpace(j.at("dims").get<std::vector<int>>()));
  if (kind == "score_net") {
    ScoreNetConfig cfg;
    cfg.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    cfg.encoding = j.at("encoding").get<std::string>() == "onehot" ? InputEncoding::OneHot : InputEncoding::Affine;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return ScoreNetModel(structure_from_json(j.at("structure")), cfg);
  }
  if (kind == "masked_ar") {
    MaskedARConfig cfg;
    cfg.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    cfg.direct = j.at("direct").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return MaskedARModel(j.at("num_dims").get<std::size_t>(), cfg);
  }
  throw ParseError("checkpoint: unknown model kind '" + kind + "'");
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.models.empty()) throw Error("checkpoint: no models");
  nlohmann::json header;
  header["format"] = "csm-checkpoint";
  header["version"] = 1;
  header["models"] = nlohmann::json::array();
  for (const AnyModel& m : checkpoint.models) header["models"].push_back(model_header(m));
  header["meta"] = checkpoint.meta;
  std::string out = header.dump();
  out.push_back('\n');
  for (const AnyModel& m : checkpoint.models) {
    for (double v : model_parameters(m)) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ParseError("checkpoint: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (header.value("format", "") != "csm-checkpoint") throw ParseError("checkpoint: not a csm checkpoint");
  Checkpoint cp;
  cp.meta = header.value("meta", nlohmann::json::object());
  std::size_t pos = nl + 1;
  for (const auto& mj : header.at("models")) {
    AnyModel model = model_from_header(mj);
    auto& params = model_parameters(model);
    if (mj.at("num_params").get<std::size_t>() != params.size()) {
      throw ParseError("checkpoint: parameter count does not match the model shape");
    }
    if (pos + 8 * params.size() > bytes.size()) throw ParseError("checkpoint: truncated parameter block");
    for (double& v : params) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
      v = std::bit_cast<double>(bits);
      pos += 8;
    }
    cp.models.push_back(std::move(model));
  }
  if (pos != bytes.size()) throw ParseError("checkpoint: trailing bytes after the parameter block");
  return cp;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace csm
