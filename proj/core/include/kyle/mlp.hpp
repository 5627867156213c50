#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kyle/rng.hpp"

namespace kyle {

enum class Activation { kRelu, kTanh };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Dense layer, weights stored row-major as out x in.
struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

// Small scalar-to-scalar feed-forward network: hidden activation on every
// layer except the last, linear output. Plain value type; copy freely.
struct Mlp {
  std::vector<int> layer_sizes;  // e.g. {1, 10, 1}
  Activation hidden_activation = Activation::kRelu;
  std::vector<Layer> layers;

  std::size_t parameter_count() const;
};

// Per-parameter partials (or moment accumulators), shaped like an Mlp.
struct LayerGrad {
  std::vector<double> w;
  std::vector<double> b;
};

struct Gradient {
  std::vector<LayerGrad> layers;

  static Gradient zeros_like(const Mlp& mlp);
  void set_zero();
};

// Intermediate activations of one forward pass, reusable across calls.
struct ForwardCache {
  double input = 0.0;
  std::vector<std::vector<double>> pre;  // pre-activation per layer
  std::vector<std::vector<double>> act;  // post-activation per layer
};

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Scalar input and output are required; hidden widths must be positive.
Mlp init_mlp(const std::vector<int>& layer_sizes, Activation hidden_activation,
             RngStream& rng);

double forward(const Mlp& mlp, double input);
double forward(const Mlp& mlp, double input, ForwardCache& cache);

// Output value together with d(output)/d(input), by forward-mode sweep.
std::pair<double, double> forward_with_input_derivative(const Mlp& mlp,
                                                        double input);

// Fills `grad` with dL/dtheta given dL/d(output); cache must come from a
// forward() on the same network.
void backprop(const Mlp& mlp, const ForwardCache& cache, double dloss_doutput,
              Gradient& grad);

// Market maker regression loss (z - M(v))^2 and its exact parameter gradient.
double mm_loss_grad(const Mlp& mm, double z, double v, ForwardCache& cache,
                    Gradient& grad);
std::pair<double, Gradient> mm_loss_grad(const Mlp& mm, double z, double v);
double mm_loss(const Mlp& mm, double z, double v);

// Insider loss -[(z - M(I(z)+y)) I(z) - epsilon |I(z)|] and its gradient with
// respect to the insider parameters only. The frozen market maker is
// differentiated through (the chain rule needs M'(I(z)+y)) but receives no
// gradient and is never modified. Subgradient of |.| at 0 is taken as 0.
double insider_loss_grad(const Mlp& insider, const Mlp& mm_frozen, double z,
                         double y, double epsilon, ForwardCache& cache,
                         Gradient& grad);
std::pair<double, Gradient> insider_loss_grad(const Mlp& insider,
                                              const Mlp& mm_frozen, double z,
                                              double y, double epsilon);
double insider_loss(const Mlp& insider, const Mlp& mm_frozen, double z, double y,
                    double epsilon);

// Adaptive-moment optimizer state, shaped like the network it updates.
struct AdamState {
  Gradient first_moment;
  Gradient second_moment;
  long step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-7;

  static AdamState for_network(const Mlp& mlp, double learning_rate = 1e-3,
                               double beta1 = 0.9, double beta2 = 0.999,
                               double eps_hat = 1e-7);
};

// One bias-corrected adaptive-moment update. Throws std::invalid_argument on
// shape mismatch between network, gradient and state.
void adam_step(Mlp& mlp, const Gradient& grad, AdamState& state);

// Central-difference gradient of an arbitrary scalar loss of the network;
// the test oracle for the analytic backward passes.
Gradient finite_diff_grad(const std::function<double(const Mlp&)>& loss_fn,
                          const Mlp& mlp, double h);

// Versioned textual checkpoint with an embedded metadata line (any single-line
// string, conventionally JSON). load_mlp(save_mlp(m)) reproduces m bit-exactly.
void save_mlp(const std::string& path, const Mlp& mlp, const std::string& meta);
std::pair<Mlp, std::string> load_mlp(const std::string& path);

}  // namespace kyle
