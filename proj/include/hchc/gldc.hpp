#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "hchc/matrix.hpp"
#include "hchc/nn.hpp"

namespace hchc {

using Labels = std::vector<int>;

struct Dataset {
    DenseMatrix features;           // n x D
    std::optional<Labels> labels;   // dense ids 0..c-1, if known

    std::size_t size() const noexcept { return features.rows(); }
    std::size_t dim() const noexcept { return features.cols(); }
    /// n >= 2, D >= 1, finite features, labels (if any) of length n and >= 0.
    void validate() const;
    /// Number of distinct label ids (max + 1); 0 without labels.
    std::size_t label_count() const noexcept;
};

/// When the beta1 discount advances: once per epoch, or once per mini-batch.
enum class DiscountGranularity { Epoch, Minibatch };

std::string_view to_string(DiscountGranularity g) noexcept;

struct TrainingConfig {
    std::size_t clusters = 0;  // 0: take the count from the dataset labels
    std::size_t batch_size = 128;
    double learning_rate = 0.002;
    double beta1 = 5.0;
    double beta2 = 10.0;
    double discount_gamma = 0.8;
    DiscountGranularity discount_granularity = DiscountGranularity::Epoch;
    double sigma2 = 0.1;
    double xi = 0.05;
    std::size_t k_neighbors = 5;
    std::size_t pretrain_epochs = 50;
    std::size_t train_epochs = 200;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_dims{500, 500, 2000};
    std::size_t embedding_dim = 5;

    /// Data-independent range checks; throws ConfigError naming the key.
    void validate() const;
    /// Checks that need the data as well (batch size vs n, cluster count).
    void validate_for(const Dataset& data) const;
    /// `clusters`, or the label count when `clusters` is 0.
    std::size_t resolved_clusters(const Dataset& data) const;

    friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// n x c matrix whose rows are cluster probability distributions.
///
/// Rows sum to 1 within 1e-9 and entries lie in [0, 1]. Model output built
/// with from_network_output() is additionally strictly inside (0, 1).
class ProbabilityMatrix {
public:
    ProbabilityMatrix() = default;
    /// Validates; throws InputError on a bad row.
    explicit ProbabilityMatrix(DenseMatrix values);

    /// Softmax output -> clamp to [1e-7, 1 - 1e-7] and renormalize each row.
    static ProbabilityMatrix from_network_output(DenseMatrix softmax);

    std::size_t samples() const noexcept { return values_.rows(); }
    std::size_t clusters() const noexcept { return values_.cols(); }
    const DenseMatrix& values() const noexcept { return values_; }
    std::span<const double> row(std::size_t i) const noexcept { return values_.row(i); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }

    friend bool operator==(const ProbabilityMatrix&, const ProbabilityMatrix&) = default;

private:
    DenseMatrix values_;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Fresh model D-hidden...-embedding-...hidden-D with a Linear bottleneck and
/// Linear reconstruction, ReLU elsewhere, and a single Linear+Softmax head.
GldcModel make_model(std::size_t input_dim, std::size_t clusters, const TrainingConfig& config);

// ---------------------------------------------------------------------------
// Building blocks

/// x + eps with eps ~ N(0, xi) entry-wise (xi is the variance).
Dataset augment(const Dataset& data, double xi, std::uint64_t seed);

/// Directed kNN Gaussian-kernel adjacency over the rows of `embedding`.
/// w(i,j) = exp(-|z_i - z_j|^2 / sigma2) for the k nearest j != i, else 0.
/// Distance ties at rank k go to the lower index. Diagonal is 0.
DenseMatrix build_knn_adjacency(const DenseMatrix& embedding, std::size_t k, double sigma2);

struct ModelLoss {
    double value = 0.0;
    ModelGradients gradients;
};

/// sum_i |x_i - G'(G(x_i))|^2 with gradients for encoder and decoder.
ModelLoss reconstruction_loss(const DenseMatrix& batch, const GldcModel& model);

struct PairwiseLoss {
    double value = 0.0;
    DenseMatrix gradient;  // d value / d P
};

/// -(1/B^2) sum_{i,j} [ w log(p_i.p_j) + (1 - w) log(1 - p_i.p_j) ] over all
/// ordered pairs, inner products clamped to [1e-7, 1 - 1e-7]. Clamped pairs
/// contribute no gradient.
PairwiseLoss graph_loss(const DenseMatrix& probabilities, const DenseMatrix& adjacency);

struct AugmentationLoss {
    double value = 0.0;
    DenseMatrix gradient;            // d / d P
    DenseMatrix gradient_augmented;  // d / d P_aug
};

/// sum_i |p_i - p~_i|^2.
AugmentationLoss augmentation_loss(const DenseMatrix& probabilities, const DenseMatrix& augmented);

struct ClusteringLossOptions {
    double reconstruction_weight = 1.0;  // 0 isolates the other two terms
    double beta1 = 5.0;
    double beta2 = 10.0;
    bool decoder_gradient = true;
};

struct ClusteringLoss {
    double total = 0.0;
    double reconstruction = 0.0;
    double graph = 0.0;
    double augmentation = 0.0;
    ModelGradients gradients;  // encoder, head, and decoder if requested
};

/// w_r L_r + beta1 L_w + beta2 L_a (w_r = 1 normally) on one mini-batch and its augmentation. The
/// adjacency is an input and is held constant (no gradient flows through it).
ClusteringLoss clustering_loss(const DenseMatrix& batch, const DenseMatrix& augmented_batch,
                               const GldcModel& model, const DenseMatrix& adjacency,
                               const ClusteringLossOptions& options);

/// kNN adjacency of the batch in the current embedding space, with a unit
/// diagonal (each sample paired with itself), as used inside training.
DenseMatrix batch_adjacency(const GldcModel& model, const DenseMatrix& batch, std::size_t k, double sigma2);

/// beta1 * gamma^t.
double discounted_beta1(double beta1, double gamma, std::size_t t);

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
    std::string_view phase;  // "pretrain" or "train"
    std::size_t epoch = 0;
    double beta1 = 0.0;      // effective beta1 at the start of the epoch
    double loss = 0.0;       // summed over the epoch's batches
    double reconstruction = 0.0;
    double graph = 0.0;
    double augmentation = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Autoencoder pretraining of a fresh model (mini-batch Adam on L_r).
GldcModel pretrain(const Dataset& data, const TrainingConfig& config, const EpochCallback& on_epoch = {});

struct TrainResult {
    GldcModel model;
    ProbabilityMatrix probabilities;
    std::vector<EpochRecord> history;  // training phase only
};

/// Clustering phase on an already pretrained model. Updates encoder and head;
/// the decoder stays fixed. Optimizer state restarts.
TrainResult fine_tune(const Dataset& data, const TrainingConfig& config, GldcModel pretrained,
                      const EpochCallback& on_epoch = {});

/// pretrain followed by fine_tune.
TrainResult train(const Dataset& data, const TrainingConfig& config, const EpochCallback& on_epoch = {});

/// P for every row of `features`, evaluated in chunks.
ProbabilityMatrix infer_probabilities(const DenseMatrix& features, const GldcModel& model);

/// Row-wise argmax; ties go to the lowest cluster index.
Labels assign_labels(const ProbabilityMatrix& probabilities);

}  // namespace hchc
