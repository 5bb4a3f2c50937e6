#include "vcoder/nn.hpp"

#include "vcoder/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vcoder::nn {

std::string_view to_string(Activation a) {
    return a == Activation::sigmoid ? "sigmoid" : "identity";
}

Activation activation_from_string(std::string_view text) {
    if (text == "sigmoid") return Activation::sigmoid;
    if (text == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + std::string(text) + "' (sigmoid|identity)");
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng) {
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0.0);
    layer.activation = act;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : layer.weights.data) w = dist(rng);
    return layer;
}

namespace {

// Binary fingerprints are mostly zeros; wide inputs are walked through their
// non-zero entries only.
constexpr std::size_t sparse_threshold = 64;

std::vector<std::size_t> nonzeros(std::span<const double> x) {
    std::vector<std::size_t> nz;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != 0.0) nz.push_back(i);
    }
    return nz;
}

void check_input(const DenseLayer& layer, std::span<const double> input) {
    if (input.size() != layer.in_dim()) {
        throw ShapeError("layer expects input of length " + std::to_string(layer.in_dim()) + ", got " +
                         std::to_string(input.size()));
    }
}

void forward_into(const DenseLayer& layer, std::span<const double> input, std::vector<double>& out) {
    check_input(layer, input);
    const auto n_out = layer.out_dim();
    out.assign(layer.bias.begin(), layer.bias.end());
    if (input.size() > sparse_threshold) {
        const auto nz = nonzeros(input);
        for (std::size_t o = 0; o < n_out; ++o) {
            const auto w = layer.weights.row(o);
            double acc = 0.0;
            for (auto i : nz) acc += w[i] * input[i];
            out[o] += acc;
        }
    } else {
        for (std::size_t o = 0; o < n_out; ++o) {
            const auto w = layer.weights.row(o);
            double acc = 0.0;
            for (std::size_t i = 0; i < input.size(); ++i) acc += w[i] * input[i];
            out[o] += acc;
        }
    }
    if (layer.activation == Activation::sigmoid) {
        for (auto& v : out) v = sigmoid(v);
    }
}

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
    }
}

} // namespace

std::vector<double> forward(const DenseLayer& layer, std::span<const double> input) {
    std::vector<double> out;
    forward_into(layer, input, out);
    return out;
}

std::vector<double> forward(const Network& net, std::span<const double> input) {
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> next;
    for (const auto& layer : net) {
        forward_into(layer, cur, next);
        cur.swap(next);
    }
    return cur;
}

ForwardTrace forward_trace(const Network& net, std::span<const double> input) {
    ForwardTrace trace;
    trace.values.reserve(net.size() + 1);
    trace.values.emplace_back(input.begin(), input.end());
    for (const auto& layer : net) {
        std::vector<double> out;
        forward_into(layer, trace.values.back(), out);
        trace.values.push_back(std::move(out));
    }
    return trace;
}

Gradients zero_gradients(const Network& net) {
    Gradients g;
    g.layers.reserve(net.size());
    for (const auto& layer : net) {
        g.layers.push_back({Matrix(layer.out_dim(), layer.in_dim()), std::vector<double>(layer.out_dim(), 0.0)});
    }
    if (!net.empty()) g.input.assign(net.front().in_dim(), 0.0);
    return g;
}

std::vector<double> backpropagate(const Network& net, const ForwardTrace& trace,
                                  std::span<const double> output_grad, Gradients& grads) {
    if (trace.values.size() != net.size() + 1) throw ShapeError("forward trace does not match network depth");
    if (grads.layers.size() != net.size()) throw ShapeError("gradient buffers do not match network depth");
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    if (!net.empty() && delta.size() != net.back().out_dim()) {
        throw ShapeError("output gradient has length " + std::to_string(delta.size()) + ", expected " +
                         std::to_string(net.back().out_dim()));
    }
    for (std::size_t li = net.size(); li-- > 0;) {
        const auto& layer = net[li];
        const auto& in = trace.values[li];
        const auto& out = trace.values[li + 1];
        auto& g = grads.layers[li];
        if (layer.activation == Activation::sigmoid) {
            for (std::size_t o = 0; o < delta.size(); ++o) delta[o] *= out[o] * (1.0 - out[o]);
        }
        std::vector<double> prev(layer.in_dim(), 0.0);
        const bool sparse = in.size() > sparse_threshold;
        const auto nz = sparse ? nonzeros(in) : std::vector<std::size_t>{};
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            const double d = delta[o];
            g.bias[o] += d;
            if (d == 0.0) continue;
            auto gw = g.weights.row(o);
            const auto w = layer.weights.row(o);
            if (sparse) {
                for (auto i : nz) gw[i] += d * in[i];
            } else {
                for (std::size_t i = 0; i < in.size(); ++i) gw[i] += d * in[i];
            }
            for (std::size_t i = 0; i < prev.size(); ++i) prev[i] += d * w[i];
        }
        delta.swap(prev);
    }
    return delta;
}

double squared_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("squared_error on sequences of different length");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

LossAndGradients backward(const Network& net, std::span<const double> input, std::span<const double> target) {
    auto trace = forward_trace(net, input);
    const auto out = trace.output();
    if (out.size() != target.size()) throw ShapeError("target length does not match network output");
    require_finite(out, "network output");
    LossAndGradients result;
    result.loss = squared_error(target, out);
    std::vector<double> dout(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) dout[i] = 2.0 * (out[i] - target[i]);
    result.grads = zero_gradients(net);
    result.grads.input = backpropagate(net, trace, dout, result.grads);
    if (!std::isfinite(result.loss)) throw NumericError("non-finite loss");
    return result;
}

double finite_diff_check(const Network& net, std::span<const double> input, std::span<const double> target,
                         double h) {
    if (!(h >= 1e-7 && h <= 1e-3)) throw DomainError("finite-difference step must lie in [1e-7, 1e-3]");
    const auto analytic = backward(net, input, target);
    Network probe = net;
    const auto loss_at = [&] { return squared_error(target, forward(probe, input)); };

    double worst = 0.0;
    const auto compare = [&](double a, double& p) {
        const double saved = p;
        p = saved + h;
        const double up = loss_at();
        p = saved - h;
        const double down = loss_at();
        p = saved;
        const double numeric = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    };
    for (std::size_t li = 0; li < probe.size(); ++li) {
        auto& layer = probe[li];
        const auto& g = analytic.grads.layers[li];
        for (std::size_t k = 0; k < layer.weights.data.size(); ++k) compare(g.weights.data[k], layer.weights.data[k]);
        for (std::size_t k = 0; k < layer.bias.size(); ++k) compare(g.bias[k], layer.bias[k]);
    }
    return worst;
}

std::vector<std::span<double>> parameter_blocks(Network& net) {
    std::vector<std::span<double>> out;
    for (auto& layer : net) {
        out.emplace_back(layer.weights.data);
        out.emplace_back(layer.bias);
    }
    return out;
}

std::vector<std::span<const double>> gradient_blocks(const Gradients& grads) {
    std::vector<std::span<const double>> out;
    for (const auto& g : grads.layers) {
        out.emplace_back(g.weights.data);
        out.emplace_back(g.bias);
    }
    return out;
}

// ---- Adam ----------------------------------------------------------------

AdamState::AdamState(AdamOptions options) : options_(options) {
    if (!(options_.learning_rate >= 0.0)) throw DomainError("learning rate must be non-negative");
}

void AdamState::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
    if (params.size() != grads.size()) throw ShapeError("parameter and gradient block counts differ");
    if (m_.size() < params.size()) {
        m_.resize(params.size());
        v_.resize(params.size());
    }
    ++t_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = options_.learning_rate;
    const double decay = lr * options_.weight_decay;
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        auto g = grads[b];
        if (p.size() != g.size()) throw ShapeError("parameter block " + std::to_string(b) + " shape mismatch");
        auto& m = m_[b];
        auto& v = v_[b];
        if (m.size() != p.size()) {
            m.resize(p.size(), 0.0);
            v.resize(p.size(), 0.0);
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon) + decay * p[i];
        }
    }
}

void AdamState::extend_block(std::size_t block, std::size_t source_offset, std::size_t count) {
    if (block >= m_.size()) return;  // no step taken yet; buffers are created lazily
    auto& m = m_[block];
    auto& v = v_[block];
    if (m.empty()) return;
    if (source_offset + count > m.size()) throw ShapeError("moment copy range out of bounds");
    for (std::size_t i = 0; i < count; ++i) {
        m.push_back(m[source_offset + i]);
        v.push_back(v[source_offset + i]);
    }
}

void AdamState::restore(std::uint64_t steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
    if (m.size() != v.size()) throw ShapeError("moment buffers disagree in block count");
    t_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
}

} // namespace vcoder::nn
