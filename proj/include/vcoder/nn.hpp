#pragma once
// Small dense-network toolkit: row-major matrices, affine layers with sigmoid
// or identity activation, reverse-mode gradients of the squared error, Adam
// with decoupled weight decay, and a central-difference gradient checker.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace vcoder::nn {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

enum class Activation { sigmoid, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view text);

double sigmoid(double x);

struct DenseLayer {
    Matrix weights;  // out x in
    std::vector<double> bias;
    Activation activation = Activation::sigmoid;

    std::size_t in_dim() const { return weights.cols; }
    std::size_t out_dim() const { return weights.rows; }
};

using Network = std::vector<DenseLayer>;

// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng);

std::vector<double> forward(const DenseLayer& layer, std::span<const double> input);
std::vector<double> forward(const Network& net, std::span<const double> input);

// Activations of every layer; values[0] is the input, values[i + 1] the output
// of layer i.
struct ForwardTrace {
    std::vector<std::vector<double>> values;
    std::span<const double> output() const { return values.back(); }
};

ForwardTrace forward_trace(const Network& net, std::span<const double> input);

struct LayerGradients {
    Matrix weights;
    std::vector<double> bias;
};

struct Gradients {
    std::vector<LayerGradients> layers;
    std::vector<double> input;
};

Gradients zero_gradients(const Network& net);

// Back-propagates dLoss/dOutput through `net`, adding parameter gradients into
// `grads` and returning dLoss/dInput.
std::vector<double> backpropagate(const Network& net, const ForwardTrace& trace,
                                  std::span<const double> output_grad, Gradients& grads);

// Sum of squared differences.
double squared_error(std::span<const double> a, std::span<const double> b);

struct LossAndGradients {
    double loss = 0.0;
    Gradients grads;
};

// loss = sum_i (target_i - output_i)^2 and its exact gradients, including
// with respect to the input.
LossAndGradients backward(const Network& net, std::span<const double> input, std::span<const double> target);

// Max over parameters of |analytic - central difference| / max(1, |analytic|).
// `h` must lie in [1e-7, 1e-3].
double finite_diff_check(const Network& net, std::span<const double> input, std::span<const double> target,
                         double h);

// Parameter / gradient views in a fixed order: w0, b0, w1, b1, ...
std::vector<std::span<double>> parameter_blocks(Network& net);
std::vector<std::span<const double>> gradient_blocks(const Gradients& grads);

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

// Adam with decoupled weight decay:
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
// Moment buffers are allocated on the first step and follow each block's size.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(AdamOptions options);

    void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

    // Appends `count` moment entries to `block`, copied from `source_offset`.
    // Used when a parameter block grows by duplicating existing entries.
    void extend_block(std::size_t block, std::size_t source_offset, std::size_t count);

    const AdamOptions& options() const { return options_; }
    AdamOptions& options() { return options_; }
    std::uint64_t steps() const { return t_; }

    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void restore(std::uint64_t steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

private:
    AdamOptions options_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

} // namespace vcoder::nn
