#include "hchc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hchc/errors.hpp"

namespace hchc {

std::string_view to_string(Activation a) noexcept {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Linear: return "linear";
        case Activation::Softmax: return "softmax";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const auto& spec = layer.spec;
        if (spec.input_dim == 0 || spec.output_dim == 0) throw InputError("Mlp: zero-width layer");
        if (layer.weights.rows() != spec.input_dim || layer.weights.cols() != spec.output_dim ||
            layer.bias.size() != spec.output_dim) {
            throw InputError("Mlp: parameters of layer " + std::to_string(l) + " do not match its spec");
        }
        if (spec.activation == Activation::Softmax && l + 1 != layers_.size()) {
            throw InputError("Mlp: softmax is only allowed on the final layer");
        }
        if (l > 0 && layers_[l - 1].spec.output_dim != spec.input_dim) {
            throw InputError("Mlp: layer " + std::to_string(l) + " input dim does not match previous output");
        }
    }
}

Mlp Mlp::initialized(std::span<const LayerSpec> specs, std::mt19937_64& rng) {
    std::vector<DenseLayer> layers;
    layers.reserve(specs.size());
    for (const auto& spec : specs) {
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.input_dim + spec.output_dim));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseMatrix w(spec.input_dim, spec.output_dim);
        for (double& v : w.values()) v = dist(rng);
        layers.push_back({spec, std::move(w), std::vector<double>(spec.output_dim, 0.0)});
    }
    return Mlp(std::move(layers));
}

std::size_t Mlp::input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().spec.input_dim; }

std::size_t Mlp::output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().spec.output_dim; }

std::size_t Mlp::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

// ---------------------------------------------------------------------------
// forward / backward

namespace {

void softmax_rows(DenseMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const double top = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - top);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
}

}  // namespace

ForwardTrace forward(const Mlp& net, const DenseMatrix& batch) {
    if (net.depth() == 0) throw InputError("forward: empty network");
    if (batch.cols() != net.input_dim()) {
        throw InputError("forward: batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                         std::to_string(net.input_dim()));
    }
    ForwardTrace trace;
    trace.input = batch;
    trace.pre.reserve(net.depth());
    trace.post.reserve(net.depth());
    for (std::size_t l = 0; l < net.depth(); ++l) {
        const auto& layer = net.layer(l);
        DenseMatrix z = matmul(trace.layer_input(l), layer.weights);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
        }
        DenseMatrix a = z;
        switch (layer.spec.activation) {
            case Activation::ReLU:
                for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
                break;
            case Activation::Linear:
                break;
            case Activation::Softmax:
                softmax_rows(a);
                break;
        }
        trace.pre.push_back(std::move(z));
        trace.post.push_back(std::move(a));
    }
    if (!trace.output().all_finite()) throw DivergenceError("forward: non-finite network output");
    return trace;
}

BackwardResult backward(const Mlp& net, const ForwardTrace& trace, const DenseMatrix& output_gradient,
                        BackwardOptions options) {
    if (trace.post.size() != net.depth()) throw InputError("backward: trace does not belong to this network");
    if (!output_gradient.same_shape(trace.output())) {
        throw InputError("backward: output gradient shape does not match the network output");
    }
    BackwardResult result;
    if (options.parameter_gradients) result.parameters.layers.resize(net.depth());

    DenseMatrix grad = output_gradient;  // dLoss / d(post) of the current layer
    for (std::size_t l = net.depth(); l-- > 0;) {
        const auto& layer = net.layer(l);
        const DenseMatrix& post = trace.post[l];
        // Convert to dLoss / d(pre).
        switch (layer.spec.activation) {
            case Activation::ReLU:
                for (std::size_t i = 0; i < grad.size(); ++i) {
                    if (!(trace.pre[l].values()[i] > 0.0)) grad.values()[i] = 0.0;
                }
                break;
            case Activation::Linear:
                break;
            case Activation::Softmax:
                for (std::size_t r = 0; r < grad.rows(); ++r) {
                    auto g = grad.row(r);
                    auto p = post.row(r);
                    double dot = 0.0;
                    for (std::size_t c = 0; c < g.size(); ++c) dot += g[c] * p[c];
                    for (std::size_t c = 0; c < g.size(); ++c) g[c] = p[c] * (g[c] - dot);
                }
                break;
        }
        if (options.parameter_gradients) {
            auto& lg = result.parameters.layers[l];
            lg.weights = matmul_tn(trace.layer_input(l), grad);
            lg.bias.assign(grad.cols(), 0.0);
            for (std::size_t r = 0; r < grad.rows(); ++r) {
                auto g = grad.row(r);
                for (std::size_t c = 0; c < g.size(); ++c) lg.bias[c] += g[c];
            }
        }
        if (l > 0 || options.input_gradient) {
            grad = matmul_nt(grad, layer.weights);
        }
    }
    if (options.input_gradient) result.input_gradient = std::move(grad);
    return result;
}

// ---------------------------------------------------------------------------
// Gradients

MlpGradient MlpGradient::zeros_like(const Mlp& net) {
    MlpGradient g;
    for (const auto& l : net.layers()) {
        g.layers.push_back({DenseMatrix(l.weights.rows(), l.weights.cols()), std::vector<double>(l.bias.size())});
    }
    return g;
}

bool MlpGradient::all_finite() const noexcept {
    for (const auto& l : layers) {
        if (!l.weights.all_finite()) return false;
        for (double b : l.bias) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

MlpGradient& MlpGradient::operator+=(const MlpGradient& other) {
    if (layers.empty()) {
        layers = other.layers;
        return *this;
    }
    if (other.layers.size() != layers.size()) throw InputError("MlpGradient: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weights += other.layers[l].weights;
        if (layers[l].bias.size() != other.layers[l].bias.size()) throw InputError("MlpGradient: bias mismatch");
        for (std::size_t i = 0; i < layers[l].bias.size(); ++i) layers[l].bias[i] += other.layers[l].bias[i];
    }
    return *this;
}

MlpGradient& MlpGradient::operator*=(double scale) noexcept {
    for (auto& l : layers) {
        l.weights *= scale;
        for (double& b : l.bias) b *= scale;
    }
    return *this;
}

// ---------------------------------------------------------------------------
// Adam

AdamMoments AdamMoments::zeros_like(const Mlp& net) {
    AdamMoments m;
    for (const auto& l : net.layers()) {
        m.first_w.emplace_back(l.weights.rows(), l.weights.cols());
        m.second_w.emplace_back(l.weights.rows(), l.weights.cols());
        m.first_b.emplace_back(l.bias.size(), 0.0);
        m.second_b.emplace_back(l.bias.size(), 0.0);
    }
    return m;
}

void GldcModel::validate() const {
    if (encoder.depth() == 0 || decoder.depth() == 0 || head.depth() == 0) {
        throw InputError("GldcModel: encoder, decoder and head must all be non-empty");
    }
    if (encoder.output_dim() != decoder.input_dim() || encoder.output_dim() != head.input_dim()) {
        throw InputError("GldcModel: embedding dimensions disagree");
    }
    if (decoder.output_dim() != encoder.input_dim()) {
        throw InputError("GldcModel: decoder does not reconstruct the input dimension");
    }
    if (head.layers().back().spec.activation != Activation::Softmax) {
        throw InputError("GldcModel: clustering head must end in softmax");
    }
}

namespace {

void update_values(std::span<double> param, std::span<const double> grad, std::span<double> m,
                   std::span<double> v, double lr, double bc1, double bc2, const AdamHyper& h) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
}

}  // namespace

void adam_update(Mlp& net, AdamMoments& moments, const MlpGradient& gradient, double learning_rate,
                 std::uint64_t step, const AdamHyper& hyper) {
    if (gradient.layers.size() != net.depth()) throw InputError("adam_update: gradient layer count mismatch");
    if (moments.empty()) moments = AdamMoments::zeros_like(net);
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
    for (std::size_t l = 0; l < net.depth(); ++l) {
        auto& layer = net.layer(l);
        const auto& g = gradient.layers[l];
        if (!g.weights.same_shape(layer.weights) || g.bias.size() != layer.bias.size()) {
            throw InputError("adam_update: gradient shape mismatch at layer " + std::to_string(l));
        }
        update_values(layer.weights.values(), g.weights.values(), moments.first_w[l].values(),
                      moments.second_w[l].values(), learning_rate, bc1, bc2, hyper);
        update_values(layer.bias, g.bias, moments.first_b[l], moments.second_b[l], learning_rate, bc1, bc2,
                      hyper);
    }
}

void adam_step(GldcModel& model, const ModelGradients& gradients, double learning_rate, const AdamHyper& hyper) {
    if (!(learning_rate > 0.0)) throw InputError("adam_step: learning rate must be positive");
    for (const auto* g : {&gradients.encoder, &gradients.decoder, &gradients.head}) {
        if (g->has_value() && !(*g)->all_finite()) {
            throw DivergenceError("adam_step: non-finite gradient");
        }
    }
    const std::uint64_t step = model.adam.step + 1;
    if (gradients.encoder) adam_update(model.encoder, model.adam.encoder, *gradients.encoder, learning_rate, step, hyper);
    if (gradients.decoder) adam_update(model.decoder, model.adam.decoder, *gradients.decoder, learning_rate, step, hyper);
    if (gradients.head) adam_update(model.head, model.adam.head, *gradients.head, learning_rate, step, hyper);
    model.adam.step = step;
}

}  // namespace hchc
