#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "hchc/matrix.hpp"

namespace hchc {

enum class Activation { ReLU, Linear, Softmax };

std::string_view to_string(Activation a) noexcept;

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::Linear;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Affine layer y = act(x W + b), with W stored input_dim x output_dim.
struct DenseLayer {
    LayerSpec spec;
    DenseMatrix weights;
    std::vector<double> bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// A chain of dense layers. Softmax may only appear on the last layer and
/// consecutive layer dimensions must agree; the constructor enforces both.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<DenseLayer> layers);

    /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    static Mlp initialized(std::span<const LayerSpec> specs, std::mt19937_64& rng);

    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t input_dim() const noexcept;
    std::size_t output_dim() const noexcept;
    std::size_t parameter_count() const noexcept;

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    DenseLayer& layer(std::size_t i) { return layers_.at(i); }
    const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<DenseLayer> layers_;
};

/// Everything backward() needs: the layer inputs and pre/post activations.
struct ForwardTrace {
    DenseMatrix input;
    std::vector<DenseMatrix> pre;   // x W + b, per layer
    std::vector<DenseMatrix> post;  // act(pre), per layer

    const DenseMatrix& output() const { return post.empty() ? input : post.back(); }
    /// Input seen by layer `l`.
    const DenseMatrix& layer_input(std::size_t l) const { return l == 0 ? input : post[l - 1]; }
};

ForwardTrace forward(const Mlp& net, const DenseMatrix& batch);

struct LayerGradient {
    DenseMatrix weights;
    std::vector<double> bias;
};

struct MlpGradient {
    std::vector<LayerGradient> layers;

    static MlpGradient zeros_like(const Mlp& net);
    bool all_finite() const noexcept;
    MlpGradient& operator+=(const MlpGradient& other);
    MlpGradient& operator*=(double scale) noexcept;
};

struct BackwardOptions {
    bool parameter_gradients = true;
    bool input_gradient = true;
};

struct BackwardResult {
    MlpGradient parameters;      // empty when not requested
    DenseMatrix input_gradient;  // empty when not requested
};

/// Reverse-mode pass through `net` given dLoss/dOutput. Softmax layers use
/// the full Jacobian-vector product p * (g - <g, p>).
BackwardResult backward(const Mlp& net, const ForwardTrace& trace, const DenseMatrix& output_gradient,
                        BackwardOptions options = {});

// ---------------------------------------------------------------------------
// Model and optimizer

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamMoments {
    std::vector<DenseMatrix> first_w, second_w;
    std::vector<std::vector<double>> first_b, second_b;

    bool empty() const noexcept { return first_w.empty(); }
    static AdamMoments zeros_like(const Mlp& net);
};

struct AdamState {
    std::uint64_t step = 0;
    AdamMoments encoder, decoder, head;
};

/// Encoder G_theta, decoder G_theta', and clustering head P_phi.
struct GldcModel {
    Mlp encoder;
    Mlp decoder;
    Mlp head;
    AdamState adam;

    std::size_t input_dim() const noexcept { return encoder.input_dim(); }
    std::size_t embedding_dim() const noexcept { return encoder.output_dim(); }
    std::size_t clusters() const noexcept { return head.output_dim(); }

    /// Throws InputError unless encoder out == decoder in == head in, decoder
    /// out == encoder in, and the head ends in Softmax.
    void validate() const;
};

/// Gradients for the parts being optimized; a missing part is left untouched
/// (its parameters and moments are not updated).
struct ModelGradients {
    std::optional<MlpGradient> encoder, decoder, head;
};

/// One Adam step over every part present in `gradients`; increments the
/// step counter once. Throws DivergenceError on non-finite gradients, before
/// touching any parameter.
void adam_step(GldcModel& model, const ModelGradients& gradients, double learning_rate,
               const AdamHyper& hyper = {});

/// Adam update of a single network; `step` is the already-incremented counter.
void adam_update(Mlp& net, AdamMoments& moments, const MlpGradient& gradient, double learning_rate,
                 std::uint64_t step, const AdamHyper& hyper = {});

}  // namespace hchc
