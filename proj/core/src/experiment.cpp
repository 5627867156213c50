#include "kyle/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "kyle/io.hpp"
#include "kyle/quadrature.hpp"

namespace kyle {

namespace {

using nlohmann::json;

constexpr int kPredictionGridPoints = 201;
constexpr int kPlateauGridPoints = 801;
constexpr std::size_t kProfitSamples = 200000;
constexpr std::uint64_t kInsiderProfitTag = 7000;
constexpr std::uint64_t kMmProfitTag = 7001;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string current;
  std::istringstream in(s);
  while (std::getline(in, current, sep)) parts.push_back(trim(current));
  return parts;
}

// Tracks which keys a resolve pass consumed so leftovers can be reported.
class KeyReader {
 public:
  explicit KeyReader(const KeyValueMap& raw) : raw_(raw) {}

  std::optional<std::string> get(const std::string& key) {
    auto it = raw_.find(key);
    if (it == raw_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  bool has(const std::string& key) const { return raw_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    return get(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) {
    const auto v = get(key);
    if (!v) return fallback;
    try {
      return parse_double(*v);
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': not a number: '" + *v + "'");
    }
  }

  long long get_int(const std::string& key, long long fallback) {
    const auto v = get(key);
    if (!v) return fallback;
    std::size_t pos = 0;
    long long out = 0;
    try {
      out = std::stoll(*v, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != v->size()) {
      throw ConfigError("key '" + key + "': not an integer: '" + *v + "'");
    }
    return out;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const auto v = get(key);
    if (!v) return fallback;
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
      out = std::stoull(*v, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != v->size()) {
      throw ConfigError("key '" + key + "': not an unsigned integer: '" + *v + "'");
    }
    return out;
  }

  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) {
    const auto v = get(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (const std::string& part : split(*v, ',')) {
      if (part.empty()) continue;
      std::size_t pos = 0;
      int value = 0;
      try {
        value = std::stoi(part, &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != part.size()) {
        throw ConfigError("key '" + key + "': not an integer list entry: '" + part + "'");
      }
      out.push_back(value);
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) {
    const auto v = get(key);
    if (!v) return {};
    std::vector<double> out;
    for (const std::string& part : split(*v, ',')) {
      if (part.empty()) continue;
      try {
        out.push_back(parse_double(part));
      } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': not a number list entry: '" + part + "'");
      }
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : raw_) {
      if (!used_.count(key)) throw ConfigError("unknown key: '" + key + "'");
    }
  }

 private:
  const KeyValueMap& raw_;
  std::set<std::string> used_;
};

struct DistTargets {
  double mean = 0.0;
  double variance = 1.0;
};

// Builds one distribution spec from "<prefix>.family" and optional explicit
// parameter keys. Families without explicit parameters are moment-matched to
// the targets; explicit parameters (and the fixed shifted_gamma construction)
// instead determine the implied targets, which are checked against any
// explicitly configured mu/sigma keys by MarketConfig::validate().
DistributionSpec resolve_dist(KeyReader& reader, const std::string& prefix,
                              const DistTargets& targets, bool* derived_targets,
                              DistTargets* implied) {
  const std::string family_key = prefix + ".family";
  const std::string family_name_str = reader.get_string(family_key, "normal");
  DistFamily family = DistFamily::kNormal;
  try {
    family = family_from_name(family_name_str);
  } catch (const std::exception&) {
    throw ConfigError("key '" + family_key + "': unknown family '" + family_name_str + "'");
  }

  const std::vector<std::string> param_keys = {
      prefix + ".location",        prefix + ".scale",
      prefix + ".shape",           prefix + ".shift",
      prefix + ".mean_low",        prefix + ".mean_high",
      prefix + ".component_sigma", prefix + ".weight_low"};
  bool has_explicit = false;
  for (const std::string& k : param_keys) has_explicit |= reader.has(k);

  DistributionSpec spec;
  if (!has_explicit && family != DistFamily::kShiftedGamma) {
    spec = family == DistFamily::kBimodal
               ? bimodal_spec(targets.mean, targets.variance)
               : moment_match(family, targets.mean, targets.variance);
    *derived_targets = false;
  } else {
    switch (family) {
      case DistFamily::kNormal:
      case DistFamily::kLaplace:
      case DistFamily::kGumbel: {
        const double location = reader.get_double(prefix + ".location", 0.0);
        const double scale = reader.get_double(prefix + ".scale", 1.0);
        if (family == DistFamily::kNormal) spec.params = NormalParams{location, scale};
        if (family == DistFamily::kLaplace) spec.params = LaplaceParams{location, scale};
        if (family == DistFamily::kGumbel) spec.params = GumbelParams{location, scale};
        break;
      }
      case DistFamily::kShiftedGamma: {
        const DistributionSpec base = shifted_gamma_spec();
        const auto& fixed = std::get<ShiftedGammaParams>(base.params);
        spec.params = ShiftedGammaParams{
            reader.get_double(prefix + ".shape", fixed.shape),
            reader.get_double(prefix + ".scale", fixed.scale),
            reader.get_double(prefix + ".shift", fixed.shift)};
        break;
      }
      case DistFamily::kBimodal: {
        spec.params = BimodalParams{
            reader.get_double(prefix + ".mean_low", -1.0),
            reader.get_double(prefix + ".mean_high", 1.0),
            reader.get_double(prefix + ".component_sigma", 1.0),
            reader.get_double(prefix + ".weight_low", 0.5)};
        break;
      }
    }
    *derived_targets = true;
  }
  try {
    kyle::validate(spec);
  } catch (const std::exception& e) {
    throw ConfigError("key group '" + prefix + "': " + e.what());
  }
  implied->mean = dist_mean(spec);
  implied->variance = dist_variance(spec);
  return spec;
}

json dist_to_json(const DistributionSpec& spec) {
  json j;
  j["family"] = family_name(spec.family());
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NormalParams> ||
                      std::is_same_v<T, LaplaceParams> ||
                      std::is_same_v<T, GumbelParams>) {
          j["location"] = p.location;
          j["scale"] = p.scale;
        } else if constexpr (std::is_same_v<T, ShiftedGammaParams>) {
          j["shape"] = p.shape;
          j["scale"] = p.scale;
          j["shift"] = p.shift;
        } else {
          j["mean_low"] = p.mean_low;
          j["mean_high"] = p.mean_high;
          j["component_sigma"] = p.component_sigma;
          j["weight_low"] = p.weight_low;
        }
      },
      spec.params);
  return j;
}

json meta_json(const ExperimentConfig& config) {
  const LinearEquilibrium eq = theorem1(config.market);
  json j;
  j["artifact_version"] = 1;
  j["kind"] = experiment_kind_name(config.kind);
  j["seed"] = config.training.seed;
  j["output_dir"] = config.output_dir;
  j["market"] = {
      {"mu_z", config.market.mu_z},       {"sigma_z", config.market.sigma_z},
      {"sigma_y", config.market.sigma_y}, {"epsilon", config.market.epsilon},
      {"z_dist", dist_to_json(config.market.z_dist)},
      {"y_dist", dist_to_json(config.market.y_dist)}};
  j["training"] = {{"n_samples", config.training.n_samples},
                   {"epochs_per_loop", config.training.epochs_per_loop},
                   {"n_loops", config.training.n_loops},
                   {"insider_init", insider_init_name(config.training.insider_init)},
                   {"learning_rate", config.training.learning_rate},
                   {"beta1", config.training.beta1},
                   {"beta2", config.training.beta2},
                   {"eps_hat", config.training.eps_hat},
                   {"activation", activation_name(config.training.activation)},
                   {"insider_layers", config.training.insider_layers},
                   {"mm_layers", config.training.mm_layers}};
  j["theory"] = {{"alpha", eq.alpha}, {"beta", eq.beta}, {"mu", eq.mu},
                 {"lambda", eq.lambda}};
  j["conventions"] = {
      {"weight_init", "glorot_uniform_zero_bias"},
      {"optimizer", "adam_bias_corrected"},
      {"update_granularity", "one_update_per_sample"},
      {"epoch_sample_order", "fixed"},
      {"resampling", "fresh_draws_every_loop"},
      {"gumbel_parameterization", "max_right_skew"},
      {"abs_subgradient_at_zero", 0.0},
      {"prediction_grid_points", kPredictionGridPoints},
      {"plateau_grid_points", kPlateauGridPoints},
      {"plateau_threshold", 0.05 * eq.beta * config.market.sigma_z},
      {"quadrature", "composite_gauss_legendre_2000_nodes_12_sigma"},
      {"profit_mc_samples", kProfitSamples}};
  if (config.kind == ExperimentKind::kSweep) {
    j["sweep"] = {{"parameter", config.sweep_parameter},
                  {"values", config.sweep_values}};
  }
  if (config.kind == ExperimentKind::kGradCheck) {
    j["gradcheck"] = {{"draws", config.gradcheck_draws}, {"h", 1e-5}};
  }
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string trace_csv(const LoopTrace& trace) {
  std::string out =
      "loop,mm_mean_loss,insider_mean_loss,insider_slope,insider_intercept,"
      "insider_r2,mm_slope,mm_intercept,mm_r2,insider_max_dev,mm_max_dev\n";
  for (const LoopRecord& r : trace) {
    out += std::to_string(r.loop);
    for (double v : {r.mm_mean_loss, r.insider_mean_loss, r.insider_fit.slope,
                     r.insider_fit.intercept, r.insider_fit.r2, r.mm_fit.slope,
                     r.mm_fit.intercept, r.mm_fit.r2, r.insider_max_dev,
                     r.mm_max_dev}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

struct PredictionRow {
  const char* kind;
  double grid;
  double output;
  double theory;
};

std::string predictions_csv(const std::vector<PredictionRow>& rows) {
  std::string out = "grid_kind,grid_value,network_output,theory_value\n";
  for (const PredictionRow& r : rows) {
    out += r.kind;
    out += ',';
    out += format_double(r.grid);
    out += ',';
    out += format_double(r.output);
    out += ',';
    out += format_double(r.theory);
    out += '\n';
  }
  return out;
}

// Evaluation grids shared by predictions.csv and summary.json.
struct Grids {
  double z_lo, z_hi, v_lo, v_hi, zw_lo, zw_hi;
};

Grids make_grids(const MarketConfig& market) {
  const LinearEquilibrium eq = theorem1(market);
  const double s_v = std::sqrt(eq.beta * eq.beta * market.sigma_z * market.sigma_z +
                               market.sigma_y * market.sigma_y);
  Grids g{};
  g.z_lo = market.mu_z - 2.0 * market.sigma_z;
  g.z_hi = market.mu_z + 2.0 * market.sigma_z;
  g.v_lo = -2.0 * s_v;
  g.v_hi = 2.0 * s_v;
  g.zw_lo = market.mu_z - 3.0 * market.sigma_z;
  g.zw_hi = market.mu_z + 3.0 * market.sigma_z;
  return g;
}

std::vector<PredictionRow> prediction_rows(const MarketConfig& market,
                                           const ScalarFn& order_fn,
                                           const ScalarFn& price_fn) {
  const LinearEquilibrium eq = theorem1(market);
  const Grids g = make_grids(market);
  std::vector<PredictionRow> rows;
  rows.reserve(2 * kPredictionGridPoints + kPlateauGridPoints);
  const double z_step = (g.z_hi - g.z_lo) / (kPredictionGridPoints - 1);
  for (int i = 0; i < kPredictionGridPoints; ++i) {
    const double z = g.z_lo + i * z_step;
    rows.push_back({"z", z, order_fn(z), eq.insider(z)});
  }
  const double v_step = (g.v_hi - g.v_lo) / (kPredictionGridPoints - 1);
  for (int i = 0; i < kPredictionGridPoints; ++i) {
    const double v = g.v_lo + i * v_step;
    rows.push_back({"v", v, price_fn(v), eq.price(v)});
  }
  const double zw_step = (g.zw_hi - g.zw_lo) / (kPlateauGridPoints - 1);
  for (int i = 0; i < kPlateauGridPoints; ++i) {
    const double z = g.zw_lo + i * zw_step;
    rows.push_back({"z_wide", z, order_fn(z), eq.insider(z)});
  }
  return rows;
}

json line_fit_json(const LineFit& fit) {
  return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}};
}

json estimate_json(const EquilibriumEstimate& est) {
  json j;
  j["insider"] = line_fit_json(est.insider_fit);
  j["insider"]["max_abs_deviation"] = est.max_abs_deviation_insider;
  j["mm"] = line_fit_json(est.mm_fit);
  j["mm"]["max_abs_deviation"] = est.max_abs_deviation_mm;
  j["fit_region"] = {{"z_lo", est.z_lo}, {"z_hi", est.z_hi},
                     {"v_lo", est.v_lo}, {"v_hi", est.v_hi}};
  return j;
}

json plateau_json(const PlateauEstimate& p) {
  return {{"lower", p.lower},
          {"upper", p.upper},
          {"detected", p.detected},
          {"threshold_used", p.threshold_used},
          {"raw_lower", p.raw_lower},
          {"raw_upper", p.raw_upper},
          {"raw_width", p.raw_upper - p.raw_lower}};
}

// Order function backed by the z_wide grid values, so plateau detection can
// reuse them instead of re-running an expensive oracle; queries must land on
// the same 801-point grid detect_plateau uses.
ScalarFn grid_backed_fn(const MarketConfig& market, std::vector<double> values) {
  const Grids g = make_grids(market);
  const double step = (g.zw_hi - g.zw_lo) / (kPlateauGridPoints - 1);
  return [values = std::move(values), g, step](double z) {
    const auto idx = static_cast<long>(std::lround((z - g.zw_lo) / step));
    if (idx < 0 || idx >= kPlateauGridPoints) {
      throw std::logic_error("grid_backed_fn: query off the evaluation grid");
    }
    return values[static_cast<std::size_t>(idx)];
  };
}

}  // namespace

std::string experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kTrain: return "train";
    case ExperimentKind::kOracle: return "oracle";
    case ExperimentKind::kGradCheck: return "gradcheck";
    case ExperimentKind::kSweep: return "sweep";
  }
  throw std::invalid_argument("unknown experiment kind");
}

KeyValueMap read_key_value_text(const std::string& text) {
  KeyValueMap map;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (map.count(key)) throw ConfigError("duplicate key: '" + key + "'");
    map[key] = value;
  }
  return map;
}

KeyValueMap read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return read_key_value_text(buffer.str());
}

ExperimentConfig resolve_config(const KeyValueMap& raw) {
  KeyReader reader(raw);
  ExperimentConfig config;
  config.raw = raw;

  const std::string kind = reader.get_string("kind", "train");
  if (kind == "train") config.kind = ExperimentKind::kTrain;
  else if (kind == "oracle") config.kind = ExperimentKind::kOracle;
  else if (kind == "gradcheck") config.kind = ExperimentKind::kGradCheck;
  else if (kind == "sweep") config.kind = ExperimentKind::kSweep;
  else throw ConfigError("key 'kind': unknown experiment kind '" + kind + "'");

  config.output_dir = reader.get_string("output_dir", "out");
  config.training.seed = reader.get_u64("seed", 1);

  MarketConfig& m = config.market;
  const bool mu_z_given = reader.has("market.mu_z");
  const bool sigma_z_given = reader.has("market.sigma_z");
  const bool sigma_y_given = reader.has("market.sigma_y");
  double mu_z = reader.get_double("market.mu_z", 0.5);
  double sigma_z = reader.get_double("market.sigma_z", 2.0);
  double sigma_y = reader.get_double("market.sigma_y", 1.0);
  const double epsilon = reader.get_double("market.epsilon", 0.0);
  if (!(sigma_z > 0.0)) throw ConfigError("key 'market.sigma_z': must be > 0");
  if (!(sigma_y > 0.0)) throw ConfigError("key 'market.sigma_y': must be > 0");
  if (!(epsilon >= 0.0)) throw ConfigError("key 'market.epsilon': must be >= 0");

  bool z_derived = false;
  bool y_derived = false;
  DistTargets z_implied, y_implied;
  const DistributionSpec z_dist =
      resolve_dist(reader, "market.z_dist", {mu_z, sigma_z * sigma_z}, &z_derived,
                   &z_implied);
  const DistributionSpec y_dist =
      resolve_dist(reader, "market.y_dist", {0.0, sigma_y * sigma_y}, &y_derived,
                   &y_implied);

  if (z_derived) {
    if (mu_z_given && std::abs(z_implied.mean - mu_z) > 1e-9) {
      throw ConfigError("key 'market.mu_z': conflicts with the mean implied by "
                        "market.z_dist (" + format_double(z_implied.mean) + ")");
    }
    if (sigma_z_given &&
        std::abs(std::sqrt(z_implied.variance) - sigma_z) > 1e-9) {
      throw ConfigError("key 'market.sigma_z': conflicts with the stddev implied "
                        "by market.z_dist (" +
                        format_double(std::sqrt(z_implied.variance)) + ")");
    }
    mu_z = z_implied.mean;
    sigma_z = std::sqrt(z_implied.variance);
  }
  if (y_derived) {
    if (std::abs(y_implied.mean) > 1e-9) {
      throw ConfigError("key group 'market.y_dist': noise order must have mean 0, "
                        "got " + format_double(y_implied.mean));
    }
    if (sigma_y_given &&
        std::abs(std::sqrt(y_implied.variance) - sigma_y) > 1e-9) {
      throw ConfigError("key 'market.sigma_y': conflicts with the stddev implied "
                        "by market.y_dist (" +
                        format_double(std::sqrt(y_implied.variance)) + ")");
    }
    sigma_y = std::sqrt(y_implied.variance);
  }
  m.mu_z = mu_z;
  m.sigma_z = sigma_z;
  m.sigma_y = sigma_y;
  m.epsilon = epsilon;
  m.z_dist = z_dist;
  m.y_dist = y_dist;

  TrainingConfig& t = config.training;
  const long long n_samples = reader.get_int("training.n_samples", 5000);
  if (n_samples < 1) throw ConfigError("key 'training.n_samples': must be >= 1");
  t.n_samples = static_cast<std::size_t>(n_samples);
  t.epochs_per_loop = static_cast<int>(reader.get_int("training.epochs_per_loop", 3));
  t.n_loops = static_cast<int>(reader.get_int("training.n_loops", 20));
  const std::string init_name =
      reader.get_string("training.insider_init", "gaussian_noise");
  try {
    t.insider_init = insider_init_from_name(init_name);
  } catch (const std::exception&) {
    throw ConfigError("key 'training.insider_init': unknown mode '" + init_name + "'");
  }
  t.learning_rate = reader.get_double("training.learning_rate", 1e-3);
  t.beta1 = reader.get_double("training.beta1", 0.9);
  t.beta2 = reader.get_double("training.beta2", 0.999);
  t.eps_hat = reader.get_double("training.eps_hat", 1e-7);
  const std::string act_name = reader.get_string("training.activation", "relu");
  try {
    t.activation = activation_from_name(act_name);
  } catch (const std::exception&) {
    throw ConfigError("key 'training.activation': unknown activation '" + act_name + "'");
  }
  t.insider_layers = reader.get_int_list("training.insider_layers", {1, 10, 1});
  t.mm_layers = reader.get_int_list("training.mm_layers", {1, 10, 10, 1});

  config.sweep_parameter = reader.get_string("sweep.parameter", "");
  config.sweep_values = reader.get_double_list("sweep.values");
  config.gradcheck_draws = static_cast<int>(reader.get_int("gradcheck.draws", 50));

  reader.finish();

  if (config.kind == ExperimentKind::kSweep) {
    static const std::set<std::string> kSweepable = {
        "market.epsilon",       "market.mu_z",         "market.sigma_z",
        "market.sigma_y",       "training.n_samples",  "training.n_loops",
        "training.epochs_per_loop", "training.learning_rate"};
    if (!kSweepable.count(config.sweep_parameter)) {
      throw ConfigError("key 'sweep.parameter': cannot sweep '" +
                        config.sweep_parameter + "'");
    }
    if (config.sweep_values.empty()) {
      throw ConfigError("key 'sweep.values': must be a non-empty list");
    }
    for (double v : config.sweep_values) {
      if (!std::isfinite(v)) throw ConfigError("key 'sweep.values': must be finite");
    }
  }
  if (config.kind == ExperimentKind::kGradCheck && config.gradcheck_draws < 1) {
    throw ConfigError("key 'gradcheck.draws': must be >= 1");
  }

  try {
    config.market.validate();
    config.training.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  return resolve_config(read_key_value_file(path));
}

std::uint64_t sweep_value_seed(std::uint64_t base_seed, std::size_t index) {
  return splitmix64(base_seed ^ splitmix64(0x73776565ULL + index));
}

RunArtifacts run_training_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);

  const AlternatingResult result = run_alternating(config.market, config.training);
  const Mlp& insider = result.insider;
  const Mlp& mm = result.mm;

  RunArtifacts artifacts;
  artifacts.trace = result.trace;
  artifacts.estimate = estimate_equilibrium(insider, mm, config.market);
  auto insider_fn = [&insider](double z) { return forward(insider, z); };
  auto price_fn = [&mm](double v) { return forward(mm, v); };
  artifacts.plateau = detect_plateau(insider_fn, config.market);

  RngStream profit_rng_i = RngStream(config.training.seed).derive(kInsiderProfitTag);
  RngStream profit_rng_m = RngStream(config.training.seed).derive(kMmProfitTag);
  artifacts.insider_profit = expected_insider_profit(insider, mm, config.market,
                                                     kProfitSamples, profit_rng_i);
  artifacts.mm_profit = expected_market_maker_profit(insider, mm, config.market,
                                                     kProfitSamples, profit_rng_m);

  const json meta = meta_json(config);
  write_text_file(fs::path(config.output_dir) / "meta.json", meta.dump(2) + "\n");
  write_text_file(fs::path(config.output_dir) / "trace.csv", trace_csv(result.trace));
  write_text_file(fs::path(config.output_dir) / "predictions.csv",
                  predictions_csv(prediction_rows(config.market, insider_fn, price_fn)));

  const LinearEquilibrium eq = theorem1(config.market);
  json summary;
  summary["equilibrium_theory"] = {{"alpha", eq.alpha}, {"beta", eq.beta},
                                   {"mu", eq.mu}, {"lambda", eq.lambda}};
  summary["estimate"] = estimate_json(artifacts.estimate);
  summary["plateau"] = plateau_json(artifacts.plateau);
  summary["plateau_prediction"] = [&] {
    const PlateauPrediction p = plateau_prediction(config.market);
    return json{{"lower", p.lower}, {"upper", p.upper},
                {"outside_slope", p.outside_slope}};
  }();
  summary["profits"] = {{"insider", artifacts.insider_profit},
                        {"market_maker", artifacts.mm_profit},
                        {"insider_theory_frictionless",
                         config.market.sigma_z * config.market.sigma_y / 2.0},
                        {"n_mc", kProfitSamples}};
  write_text_file(fs::path(config.output_dir) / "summary.json", summary.dump(2) + "\n");

  const std::string meta_line = meta.dump();
  save_mlp((fs::path(config.output_dir) / "insider.mlp").string(), insider, meta_line);
  save_mlp((fs::path(config.output_dir) / "market_maker.mlp").string(), mm, meta_line);
  return artifacts;
}

void run_oracle_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);

  const MarketConfig& market = config.market;
  const LinearEquilibrium eq = theorem1(market);
  const LinearEquilibrium fp = fixed_point(market, 1e-12);

  auto theory_order = [&eq](double z) { return eq.insider(z); };
  auto theory_price = [&eq](double v) { return eq.price(v); };

  // Best response to the equilibrium pricing rule under the configured
  // transaction cost, evaluated on the wide grid once and reused.
  const Grids g = make_grids(market);
  std::vector<double> br(kPlateauGridPoints);
  const double zw_step = (g.zw_hi - g.zw_lo) / (kPlateauGridPoints - 1);
  for (int i = 0; i < kPlateauGridPoints; ++i) {
    br[i] = insider_best_response(theory_price, g.zw_lo + i * zw_step,
                                  market.y_dist, market.epsilon);
  }
  const ScalarFn br_fn = grid_backed_fn(market, br);

  std::vector<PredictionRow> rows;
  const double z_step = (g.z_hi - g.z_lo) / (kPredictionGridPoints - 1);
  for (int i = 0; i < kPredictionGridPoints; ++i) {
    const double z = g.z_lo + i * z_step;
    rows.push_back({"z", z,
                    insider_best_response(theory_price, z, market.y_dist,
                                          market.epsilon),
                    eq.insider(z)});
  }
  const double v_step = (g.v_hi - g.v_lo) / (kPredictionGridPoints - 1);
  for (int i = 0; i < kPredictionGridPoints; ++i) {
    const double v = g.v_lo + i * v_step;
    rows.push_back({"v", v,
                    numerical_pricing(theory_order, market.z_dist, market.y_dist, v),
                    eq.price(v)});
  }
  for (int i = 0; i < kPlateauGridPoints; ++i) {
    const double z = g.zw_lo + i * zw_step;
    rows.push_back({"z_wide", z, br[i], eq.insider(z)});
  }

  const PlateauEstimate plateau = detect_plateau(br_fn, market);
  const PlateauPrediction predicted = plateau_prediction(market);

  write_text_file(fs::path(config.output_dir) / "meta.json",
                  meta_json(config).dump(2) + "\n");
  write_text_file(fs::path(config.output_dir) / "predictions.csv",
                  predictions_csv(rows));
  json summary;
  summary["equilibrium_theory"] = {{"alpha", eq.alpha}, {"beta", eq.beta},
                                   {"mu", eq.mu}, {"lambda", eq.lambda}};
  summary["fixed_point"] = {{"alpha", fp.alpha}, {"beta", fp.beta},
                            {"mu", fp.mu}, {"lambda", fp.lambda}};
  summary["plateau_prediction"] = {{"lower", predicted.lower},
                                   {"upper", predicted.upper},
                                   {"outside_slope", predicted.outside_slope}};
  summary["plateau"] = plateau_json(plateau);
  write_text_file(fs::path(config.output_dir) / "summary.json", summary.dump(2) + "\n");
}

GradCheckReport run_grad_check(std::uint64_t seed, int draws) {
  if (draws < 1) throw std::invalid_argument("run_grad_check: draws must be >= 1");
  const double h = 1e-5;
  GradCheckReport report;
  report.draws = draws;

  auto rel_error = [](const Gradient& analytic, const Gradient& fd) {
    double max_diff = 0.0;
    double max_mag = 0.0;
    for (std::size_t l = 0; l < analytic.layers.size(); ++l) {
      auto scan = [&](const std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
          max_diff = std::max(max_diff, std::abs(a[i] - b[i]));
          max_mag = std::max({max_mag, std::abs(a[i]), std::abs(b[i])});
        }
      };
      scan(analytic.layers[l].w, fd.layers[l].w);
      scan(analytic.layers[l].b, fd.layers[l].b);
    }
    return max_diff / std::max(max_mag, 1e-12);
  };

  // Pre-activations within `margin` of a ReLU kink would make the central
  // difference straddle the kink; such draws are rejected.
  auto away_from_kinks = [&](const Mlp& mlp, double input, double margin) {
    ForwardCache cache;
    forward(mlp, input, cache);
    for (std::size_t l = 0; l + 1 < mlp.layers.size(); ++l) {
      for (double pre : cache.pre[l]) {
        if (std::abs(pre) < margin) return false;
      }
    }
    return true;
  };

  RngStream base(seed);
  for (int d = 0; d < draws; ++d) {
    RngStream draw_rng = base.derive(100 + static_cast<std::uint64_t>(d));
    for (Activation act : {Activation::kTanh, Activation::kRelu}) {
      const double margin = 1e-3;
      double max_err = 0.0;
      for (int attempt = 0; attempt < 200; ++attempt) {
        RngStream net_rng = draw_rng.derive(10 + attempt);
        RngStream in_rng = draw_rng.derive(500 + attempt);
        Mlp insider = init_mlp({1, 10, 1}, act, net_rng);
        Mlp mm = init_mlp({1, 10, 10, 1}, act, net_rng);
        const double z = in_rng.normal(0.0, 2.0);
        const double y = in_rng.normal(0.0, 1.0);
        const double v = in_rng.normal(0.0, 2.0);
        const double epsilon = 0.5;
        const double order = forward(insider, z);
        if (act == Activation::kRelu) {
          const bool clean = away_from_kinks(mm, v, margin) &&
                             away_from_kinks(insider, z, margin) &&
                             away_from_kinks(mm, order + y, margin) &&
                             std::abs(order) > margin;
          if (!clean) continue;
        }
        const Gradient mm_g = mm_loss_grad(mm, z, v).second;
        const Gradient mm_fd = finite_diff_grad(
            [&](const Mlp& net) { return mm_loss(net, z, v); }, mm, h);
        const Gradient in_g = insider_loss_grad(insider, mm, z, y, epsilon).second;
        const Gradient in_fd = finite_diff_grad(
            [&](const Mlp& net) { return insider_loss(net, mm, z, y, epsilon); },
            insider, h);
        max_err = std::max(rel_error(mm_g, mm_fd), rel_error(in_g, in_fd));
        break;
      }
      if (act == Activation::kTanh) {
        report.max_rel_error_tanh = std::max(report.max_rel_error_tanh, max_err);
      } else {
        report.max_rel_error_relu = std::max(report.max_rel_error_relu, max_err);
      }
    }
  }
  return report;
}

void run_gradcheck_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  const GradCheckReport report =
      run_grad_check(config.training.seed, config.gradcheck_draws);
  std::printf("gradcheck: max relative error tanh=%.3g relu=%.3g (draws=%d)\n",
              report.max_rel_error_tanh, report.max_rel_error_relu, report.draws);
  write_text_file(fs::path(config.output_dir) / "meta.json",
                  meta_json(config).dump(2) + "\n");
  json summary;
  summary["gradcheck"] = {{"max_rel_error_tanh", report.max_rel_error_tanh},
                          {"max_rel_error_relu", report.max_rel_error_relu},
                          {"draws", report.draws},
                          {"h", 1e-5},
                          {"threshold_tanh", 1e-5},
                          {"threshold_relu", 1e-4}};
  write_text_file(fs::path(config.output_dir) / "summary.json", summary.dump(2) + "\n");
  if (report.max_rel_error_tanh >= 1e-5 || report.max_rel_error_relu >= 1e-4) {
    throw std::runtime_error("gradcheck exceeded tolerance");
  }
}

int run_sweep_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  write_text_file(fs::path(config.output_dir) / "meta.json",
                  meta_json(config).dump(2) + "\n");

  std::string csv =
      "index,value,seed,status,plateau_lower,plateau_upper,plateau_detected,"
      "plateau_raw_width,insider_slope,insider_intercept,insider_r2,mm_slope,"
      "mm_intercept,mm_r2,insider_profit,mm_profit\n";
  int config_failures = 0;
  int run_failures = 0;
  for (std::size_t i = 0; i < config.sweep_values.size(); ++i) {
    const double value = config.sweep_values[i];
    const std::uint64_t seed = sweep_value_seed(config.training.seed, i);
    KeyValueMap sub = config.raw;
    sub.erase("sweep.parameter");
    sub.erase("sweep.values");
    sub["kind"] = "train";
    sub["seed"] = std::to_string(seed);
    sub[config.sweep_parameter] = format_double(value);
    sub["output_dir"] =
        (fs::path(config.output_dir) / ("value_" + std::to_string(i))).string();

    std::string status = "ok";
    RunArtifacts artifacts;
    try {
      const ExperimentConfig sub_config = resolve_config(sub);
      artifacts = run_training_experiment(sub_config);
    } catch (const ConfigError& e) {
      status = "config_error";
      ++config_failures;
      std::fprintf(stderr, "sweep value %s: %s\n", format_double(value).c_str(),
                   e.what());
    } catch (const DivergenceError& e) {
      status = "diverged";
      ++run_failures;
      std::fprintf(stderr, "sweep value %s: %s\n", format_double(value).c_str(),
                   e.what());
    }

    csv += std::to_string(i) + ',' + format_double(value) + ',' +
           std::to_string(seed) + ',' + status;
    if (status == "ok") {
      for (double x : {artifacts.plateau.lower, artifacts.plateau.upper}) {
        csv += ',';
        csv += format_double(x);
      }
      csv += artifacts.plateau.detected ? ",1" : ",0";
      for (double x : {artifacts.plateau.raw_upper - artifacts.plateau.raw_lower,
                       artifacts.estimate.insider_fit.slope,
                       artifacts.estimate.insider_fit.intercept,
                       artifacts.estimate.insider_fit.r2,
                       artifacts.estimate.mm_fit.slope,
                       artifacts.estimate.mm_fit.intercept,
                       artifacts.estimate.mm_fit.r2, artifacts.insider_profit,
                       artifacts.mm_profit}) {
        csv += ',';
        csv += format_double(x);
      }
      csv += '\n';
    } else {
      csv += ",,,,,,,,,,,,\n";
    }
  }
  write_text_file(fs::path(config.output_dir) / "sweep.csv", csv);
  if (config_failures > 0) return 2;
  if (run_failures > 0) return 3;
  return 0;
}

int run_experiment_file(const std::string& config_path,
                        const std::string& output_dir_override,
                        std::uint64_t seed_override, bool has_seed_override) {
  try {
    KeyValueMap raw = read_key_value_file(config_path);
    if (!output_dir_override.empty()) raw["output_dir"] = output_dir_override;
    if (has_seed_override) raw["seed"] = std::to_string(seed_override);
    const ExperimentConfig config = resolve_config(raw);
    switch (config.kind) {
      case ExperimentKind::kTrain:
        run_training_experiment(config);
        return 0;
      case ExperimentKind::kOracle:
        run_oracle_experiment(config);
        return 0;
      case ExperimentKind::kGradCheck:
        run_gradcheck_experiment(config);
        return 0;
      case ExperimentKind::kSweep:
        return run_sweep_experiment(config);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "training diverged (loop %d): %s\n", e.loop, e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace kyle
