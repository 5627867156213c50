#include "kyle/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kyle/io.hpp"

namespace kyle {

namespace {

double activate(Activation a, double x) {
  return a == Activation::kRelu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative in terms of the pre-activation; ReLU subgradient at 0 is 0.
double activate_prime(Activation a, double pre) {
  if (a == Activation::kRelu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

void check_same_shape(const Mlp& mlp, const Gradient& grad, const char* what) {
  if (grad.layers.size() != mlp.layers.size()) {
    throw std::invalid_argument(std::string(what) + ": layer count mismatch");
  }
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    if (grad.layers[l].w.size() != mlp.layers[l].w.size() ||
        grad.layers[l].b.size() != mlp.layers[l].b.size()) {
      throw std::invalid_argument(std::string(what) + ": parameter shape mismatch");
    }
  }
}

// Forward pass that fills cache.pre/cache.act per layer.
double run_forward(const Mlp& mlp, double input, ForwardCache& cache) {
  const std::size_t n_layers = mlp.layers.size();
  cache.input = input;
  cache.pre.resize(n_layers);
  cache.act.resize(n_layers);
  const std::vector<double>* prev = nullptr;
  double prev_scalar = input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Layer& layer = mlp.layers[l];
    auto& pre = cache.pre[l];
    auto& act = cache.act[l];
    pre.assign(layer.out, 0.0);
    act.resize(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      double sum = layer.b[o];
      const double* w_row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      if (prev == nullptr) {
        sum += w_row[0] * prev_scalar;
      } else {
        for (int i = 0; i < layer.in; ++i) sum += w_row[i] * (*prev)[i];
      }
      pre[o] = sum;
      act[o] = (l + 1 == n_layers) ? sum : activate(mlp.hidden_activation, sum);
    }
    prev = &act;
  }
  return cache.act.back()[0];
}

}  // namespace

std::string activation_name(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation: " + name);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.w.size() + l.b.size();
  return n;
}

Gradient Gradient::zeros_like(const Mlp& mlp) {
  Gradient g;
  g.layers.resize(mlp.layers.size());
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    g.layers[l].w.assign(mlp.layers[l].w.size(), 0.0);
    g.layers[l].b.assign(mlp.layers[l].b.size(), 0.0);
  }
  return g;
}

void Gradient::set_zero() {
  for (LayerGrad& l : layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
}

Mlp init_mlp(const std::vector<int>& layer_sizes, Activation hidden_activation,
             RngStream& rng) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("init_mlp: need at least input and output layer");
  }
  if (layer_sizes.front() != 1 || layer_sizes.back() != 1) {
    throw std::invalid_argument("init_mlp: input and output must be scalar");
  }
  for (int s : layer_sizes) {
    if (s < 1) throw std::invalid_argument("init_mlp: zero-width layer");
  }
  Mlp mlp;
  mlp.layer_sizes = layer_sizes;
  mlp.hidden_activation = hidden_activation;
  mlp.layers.resize(layer_sizes.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    Layer& layer = mlp.layers[l];
    layer.in = layer_sizes[l];
    layer.out = layer_sizes[l + 1];
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.b.assign(layer.out, 0.0);
    const double bound = std::sqrt(6.0 / (layer.in + layer.out));
    for (double& w : layer.w) w = bound * (2.0 * rng.uniform01() - 1.0);
  }
  return mlp;
}

double forward(const Mlp& mlp, double input) {
  thread_local ForwardCache cache;
  return run_forward(mlp, input, cache);
}

double forward(const Mlp& mlp, double input, ForwardCache& cache) {
  return run_forward(mlp, input, cache);
}

std::pair<double, double> forward_with_input_derivative(const Mlp& mlp,
                                                        double input) {
  std::vector<double> value{input};
  std::vector<double> deriv{1.0};
  std::vector<double> next_value;
  std::vector<double> next_deriv;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const Layer& layer = mlp.layers[l];
    next_value.assign(layer.out, 0.0);
    next_deriv.assign(layer.out, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      double sum = layer.b[o];
      double dsum = 0.0;
      const double* w_row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        sum += w_row[i] * value[i];
        dsum += w_row[i] * deriv[i];
      }
      if (l + 1 == mlp.layers.size()) {
        next_value[o] = sum;
        next_deriv[o] = dsum;
      } else {
        next_value[o] = activate(mlp.hidden_activation, sum);
        next_deriv[o] = activate_prime(mlp.hidden_activation, sum) * dsum;
      }
    }
    value.swap(next_value);
    deriv.swap(next_deriv);
  }
  return {value[0], deriv[0]};
}

void backprop(const Mlp& mlp, const ForwardCache& cache, double dloss_doutput,
              Gradient& grad) {
  check_same_shape(mlp, grad, "backprop");
  const std::size_t n_layers = mlp.layers.size();
  thread_local std::vector<double> delta;
  thread_local std::vector<double> delta_prev;
  delta.assign(1, dloss_doutput);
  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& layer = mlp.layers[li];
    LayerGrad& lg = grad.layers[li];
    const bool first_layer = (li == 0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      lg.b[o] = d;
      double* w_grad = lg.w.data() + static_cast<std::size_t>(o) * layer.in;
      if (first_layer) {
        w_grad[0] = d * cache.input;
      } else {
        const auto& prev_act = cache.act[li - 1];
        for (int i = 0; i < layer.in; ++i) w_grad[i] = d * prev_act[i];
      }
    }
    if (!first_layer) {
      delta_prev.assign(layer.in, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[o];
        const double* w_row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) delta_prev[i] += w_row[i] * d;
      }
      const auto& pre_prev = cache.pre[li - 1];
      for (int i = 0; i < layer.in; ++i) {
        delta_prev[i] *= activate_prime(mlp.hidden_activation, pre_prev[i]);
      }
      delta.swap(delta_prev);
    }
  }
}

double mm_loss_grad(const Mlp& mm, double z, double v, ForwardCache& cache,
                    Gradient& grad) {
  const double out = run_forward(mm, v, cache);
  const double residual = z - out;
  backprop(mm, cache, -2.0 * residual, grad);
  return residual * residual;
}

std::pair<double, Gradient> mm_loss_grad(const Mlp& mm, double z, double v) {
  ForwardCache cache;
  Gradient grad = Gradient::zeros_like(mm);
  const double loss = mm_loss_grad(mm, z, v, cache, grad);
  return {loss, std::move(grad)};
}

double mm_loss(const Mlp& mm, double z, double v) {
  const double residual = z - forward(mm, v);
  return residual * residual;
}

double insider_loss_grad(const Mlp& insider, const Mlp& mm_frozen, double z,
                         double y, double epsilon, ForwardCache& cache,
                         Gradient& grad) {
  const double order = run_forward(insider, z, cache);
  const auto [price, price_slope] = forward_with_input_derivative(mm_frozen, order + y);
  const double sign = order > 0.0 ? 1.0 : (order < 0.0 ? -1.0 : 0.0);
  const double loss = -((z - price) * order - epsilon * std::abs(order));
  const double dloss_dorder = -(z - price) + order * price_slope + epsilon * sign;
  backprop(insider, cache, dloss_dorder, grad);
  return loss;
}

std::pair<double, Gradient> insider_loss_grad(const Mlp& insider,
                                              const Mlp& mm_frozen, double z,
                                              double y, double epsilon) {
  ForwardCache cache;
  Gradient grad = Gradient::zeros_like(insider);
  const double loss =
      insider_loss_grad(insider, mm_frozen, z, y, epsilon, cache, grad);
  return {loss, std::move(grad)};
}

double insider_loss(const Mlp& insider, const Mlp& mm_frozen, double z, double y,
                    double epsilon) {
  const double order = forward(insider, z);
  const double price = forward(mm_frozen, order + y);
  return -((z - price) * order - epsilon * std::abs(order));
}

AdamState AdamState::for_network(const Mlp& mlp, double learning_rate,
                                 double beta1, double beta2, double eps_hat) {
  AdamState state;
  state.first_moment = Gradient::zeros_like(mlp);
  state.second_moment = Gradient::zeros_like(mlp);
  state.learning_rate = learning_rate;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.eps_hat = eps_hat;
  return state;
}

void adam_step(Mlp& mlp, const Gradient& grad, AdamState& state) {
  check_same_shape(mlp, grad, "adam_step");
  check_same_shape(mlp, state.first_moment, "adam_step");
  check_same_shape(mlp, state.second_moment, "adam_step");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  const double lr = state.learning_rate;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    auto update = [&](std::vector<double>& params, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps_hat);
      }
    };
    update(mlp.layers[l].w, grad.layers[l].w, state.first_moment.layers[l].w,
           state.second_moment.layers[l].w);
    update(mlp.layers[l].b, grad.layers[l].b, state.first_moment.layers[l].b,
           state.second_moment.layers[l].b);
  }
}

Gradient finite_diff_grad(const std::function<double(const Mlp&)>& loss_fn,
                          const Mlp& mlp, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Gradient grad = Gradient::zeros_like(mlp);
  Mlp probe = mlp;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    auto diff = [&](std::vector<double>& params, std::vector<double>& out) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = loss_fn(probe);
        params[i] = saved - h;
        const double down = loss_fn(probe);
        params[i] = saved;
        out[i] = (up - down) / (2.0 * h);
      }
    };
    diff(probe.layers[l].w, grad.layers[l].w);
    diff(probe.layers[l].b, grad.layers[l].b);
  }
  return grad;
}

void save_mlp(const std::string& path, const Mlp& mlp, const std::string& meta) {
  if (meta.find('\n') != std::string::npos) {
    throw std::invalid_argument("save_mlp: meta must be a single line");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mlp: cannot open " + path);
  out << "kyle-mlp v1\n";
  out << "meta " << (meta.empty() ? "{}" : meta) << "\n";
  out << "activation " << activation_name(mlp.hidden_activation) << "\n";
  out << "layer_sizes";
  for (int s : mlp.layer_sizes) out << ' ' << s;
  out << "\n";
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    out << "weights " << l;
    for (double w : mlp.layers[l].w) out << ' ' << format_double(w);
    out << "\nbiases " << l;
    for (double b : mlp.layers[l].b) out << ' ' << format_double(b);
    out << "\n";
  }
  out << "end\n";
  if (!out) throw std::runtime_error("save_mlp: write failed for " + path);
}

std::pair<Mlp, std::string> load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mlp: cannot open " + path);
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) {
      throw std::runtime_error(std::string("load_mlp: truncated file at ") + what);
    }
    return line;
  };
  if (next_line("header") != "kyle-mlp v1") {
    throw std::runtime_error("load_mlp: unsupported checkpoint header");
  }
  next_line("meta");
  if (line.rfind("meta ", 0) != 0) throw std::runtime_error("load_mlp: missing meta");
  const std::string meta = line.substr(5);

  next_line("activation");
  std::istringstream act_line(line);
  std::string tag, act_name;
  act_line >> tag >> act_name;
  if (tag != "activation") throw std::runtime_error("load_mlp: missing activation");

  next_line("layer_sizes");
  std::istringstream sizes_line(line);
  sizes_line >> tag;
  if (tag != "layer_sizes") throw std::runtime_error("load_mlp: missing layer_sizes");
  std::vector<int> sizes;
  for (int s = 0; sizes_line >> s;) sizes.push_back(s);
  if (sizes.size() < 2) throw std::runtime_error("load_mlp: bad layer_sizes");

  Mlp mlp;
  mlp.layer_sizes = sizes;
  mlp.hidden_activation = activation_from_name(act_name);
  mlp.layers.resize(sizes.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    mlp.layers[l].in = sizes[l];
    mlp.layers[l].out = sizes[l + 1];
    mlp.layers[l].w.resize(static_cast<std::size_t>(sizes[l]) * sizes[l + 1]);
    mlp.layers[l].b.resize(sizes[l + 1]);
  }

  auto read_params = [&](const char* kind, std::size_t index,
                         std::vector<double>& out_params) {
    next_line(kind);
    std::istringstream row(line);
    std::string row_tag;
    std::size_t row_index = 0;
    row >> row_tag >> row_index;
    if (row_tag != kind || row_index != index) {
      throw std::runtime_error(std::string("load_mlp: expected ") + kind);
    }
    std::string token;
    for (double& p : out_params) {
      if (!(row >> token)) throw std::runtime_error("load_mlp: short parameter row");
      p = parse_double(token);
    }
    if (row >> token) throw std::runtime_error("load_mlp: long parameter row");
  };
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    read_params("weights", l, mlp.layers[l].w);
    read_params("biases", l, mlp.layers[l].b);
  }
  if (next_line("end") != "end") throw std::runtime_error("load_mlp: missing end");
  return {std::move(mlp), meta};
}

}  // namespace kyle
