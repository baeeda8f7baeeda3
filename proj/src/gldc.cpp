#include "hchc/gldc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "hchc/errors.hpp"

namespace hchc {

namespace {

// Independent RNG streams derived from the one user seed.
enum class Stream : std::uint64_t { Init = 1, Augment = 2, PretrainShuffle = 3, TrainShuffle = 4 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::uint64_t stream_seed(std::uint64_t seed, Stream stream) { return stream_rng(seed, stream)(); }

/// Consecutive chunks of `order`; a trailing chunk smaller than `min_size` is
/// merged into the one before it.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size,
                                                   std::size_t min_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() < min_size) {
        auto tail = std::move(batches.back());
        batches.pop_back();
        batches.back().insert(batches.back().end(), tail.begin(), tail.end());
    }
    return batches;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) throw DivergenceError(std::string(what) + " became non-finite");
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset / config / probability matrix

void Dataset::validate() const {
    if (size() < 2) throw InputError("dataset needs at least 2 samples");
    if (dim() < 1) throw InputError("dataset needs at least 1 feature");
    if (!features.all_finite()) throw InputError("dataset contains non-finite features");
    if (labels) {
        if (labels->size() != size()) throw InputError("label count does not match sample count");
        for (int l : *labels) {
            if (l < 0) throw InputError("negative label id");
        }
    }
}

std::size_t Dataset::label_count() const noexcept {
    if (!labels || labels->empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

std::string_view to_string(DiscountGranularity g) noexcept {
    return g == DiscountGranularity::Epoch ? "epoch" : "minibatch";
}

void TrainingConfig::validate() const {
    if (clusters == 1) throw ConfigError("clusters", "need at least 2 clusters");
    if (batch_size < 2) throw ConfigError("batch_size", "must be at least 2");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate", "must be > 0");
    if (!(beta1 >= 0.0) || !std::isfinite(beta1)) throw ConfigError("beta1", "must be >= 0");
    if (!(beta2 >= 0.0) || !std::isfinite(beta2)) throw ConfigError("beta2", "must be >= 0");
    if (!(discount_gamma > 0.0 && discount_gamma <= 1.0)) throw ConfigError("discount_gamma", "must lie in (0, 1]");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ConfigError("sigma2", "must be > 0");
    if (!(xi >= 0.0) || !std::isfinite(xi)) throw ConfigError("xi", "must be >= 0");
    if (k_neighbors < 1) throw ConfigError("k_neighbors", "must be >= 1");
    if (k_neighbors >= batch_size) throw ConfigError("k_neighbors", "must be smaller than batch_size");
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw ConfigError("hidden_dims", "layer widths must be positive");
    }
    if (embedding_dim == 0) throw ConfigError("embedding_dim", "must be positive");
}

std::size_t TrainingConfig::resolved_clusters(const Dataset& data) const {
    return clusters != 0 ? clusters : data.label_count();
}

void TrainingConfig::validate_for(const Dataset& data) const {
    validate();
    data.validate();
    if (batch_size > data.size()) {
        throw ConfigError("batch_size", "exceeds the number of samples (" + std::to_string(data.size()) + ")");
    }
    const std::size_t c = resolved_clusters(data);
    if (c < 2) throw ConfigError("clusters", "must be set (>= 2) when the data carries no labels");
    if (data.labels && data.label_count() > c) {
        throw ConfigError("clusters", "smaller than the number of label ids in the data");
    }
}

ProbabilityMatrix::ProbabilityMatrix(DenseMatrix values) : values_(std::move(values)) {
    if (values_.cols() == 0) throw InputError("probability matrix needs at least one column");
    for (std::size_t i = 0; i < values_.rows(); ++i) {
        double sum = 0.0;
        for (double v : values_.row(i)) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw InputError("probability row " + std::to_string(i) + " has an entry outside [0, 1]");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw InputError("probability row " + std::to_string(i) + " does not sum to 1");
        }
    }
}

ProbabilityMatrix ProbabilityMatrix::from_network_output(DenseMatrix softmax) {
    for (std::size_t i = 0; i < softmax.rows(); ++i) {
        auto row = softmax.row(i);
        double sum = 0.0;
        for (double& v : row) {
            v = std::clamp(v, kProbabilityClamp, 1.0 - kProbabilityClamp);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    return ProbabilityMatrix(std::move(softmax));
}

GldcModel make_model(std::size_t input_dim, std::size_t clusters, const TrainingConfig& config) {
    if (input_dim == 0) throw InputError("make_model: input dimension must be positive");
    if (clusters < 2) throw InputError("make_model: need at least 2 clusters");
    std::vector<LayerSpec> enc, dec;
    std::size_t width = input_dim;
    for (std::size_t h : config.hidden_dims) {
        enc.push_back({width, h, Activation::ReLU});
        width = h;
    }
    enc.push_back({width, config.embedding_dim, Activation::Linear});

    width = config.embedding_dim;
    for (auto it = config.hidden_dims.rbegin(); it != config.hidden_dims.rend(); ++it) {
        dec.push_back({width, *it, Activation::ReLU});
        width = *it;
    }
    dec.push_back({width, input_dim, Activation::Linear});

    const std::vector<LayerSpec> head{{config.embedding_dim, clusters, Activation::Softmax}};

    auto rng = stream_rng(config.seed, Stream::Init);
    GldcModel model;
    model.encoder = Mlp::initialized(enc, rng);
    model.decoder = Mlp::initialized(dec, rng);
    model.head = Mlp::initialized(head, rng);
    return model;
}

// ---------------------------------------------------------------------------
// Building blocks

Dataset augment(const Dataset& data, double xi, std::uint64_t seed) {
    if (!(xi >= 0.0)) throw InputError("augment: xi must be >= 0");
    Dataset out = data;
    if (xi == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, std::sqrt(xi));
    for (double& v : out.features.values()) v += noise(rng);
    return out;
}

DenseMatrix build_knn_adjacency(const DenseMatrix& embedding, std::size_t k, double sigma2) {
    const std::size_t b = embedding.rows();
    if (k == 0 || k >= b) {
        throw InputError("build_knn_adjacency: k=" + std::to_string(k) + " must satisfy 1 <= k < batch size " +
                         std::to_string(b));
    }
    if (!(sigma2 > 0.0)) throw InputError("build_knn_adjacency: sigma2 must be > 0");
    const DenseMatrix dist = pairwise_squared_distances(embedding);
    DenseMatrix w(b, b);
    std::vector<std::size_t> candidates;
    candidates.reserve(b - 1);
    for (std::size_t i = 0; i < b; ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < b; ++j) {
            if (j != i) candidates.push_back(j);
        }
        const auto closer = [&](std::size_t x, std::size_t y) {
            const double dx = dist(i, x), dy = dist(i, y);
            return dx < dy || (dx == dy && x < y);
        };
        std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         candidates.end(), closer);
        const std::size_t kth = candidates[k - 1];
        for (std::size_t j : candidates) {
            if (j == kth || closer(j, kth)) w(i, j) = std::exp(-dist(i, j) / sigma2);
        }
    }
    return w;
}

ModelLoss reconstruction_loss(const DenseMatrix& batch, const GldcModel& model) {
    const ForwardTrace enc = forward(model.encoder, batch);
    const ForwardTrace dec = forward(model.decoder, enc.output());
    DenseMatrix residual = dec.output() - batch;
    ModelLoss loss;
    loss.value = frobenius_squared(residual);
    residual *= 2.0;
    BackwardResult dec_back = backward(model.decoder, dec, residual);
    BackwardResult enc_back =
        backward(model.encoder, enc, dec_back.input_gradient, {.parameter_gradients = true, .input_gradient = false});
    loss.gradients.decoder = std::move(dec_back.parameters);
    loss.gradients.encoder = std::move(enc_back.parameters);
    return loss;
}

PairwiseLoss graph_loss(const DenseMatrix& probabilities, const DenseMatrix& adjacency) {
    const std::size_t b = probabilities.rows();
    if (adjacency.rows() != b || adjacency.cols() != b) {
        throw InputError("graph_loss: adjacency must be " + std::to_string(b) + "x" + std::to_string(b));
    }
    const DenseMatrix inner = matmul_nt(probabilities, probabilities);
    const double scale = 1.0 / static_cast<double>(b * b);
    constexpr double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;

    // coef(i,j) = d loss / d (p_i . p_j)
    DenseMatrix coef(b, b);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            const double raw = inner(i, j);
            const double q = std::clamp(raw, lo, hi);
            const double w = adjacency(i, j);
            total += w * std::log(q) + (1.0 - w) * std::log(1.0 - q);
            if (raw > lo && raw < hi) coef(i, j) = -scale * (w / q - (1.0 - w) / (1.0 - q));
        }
    }
    PairwiseLoss out;
    out.value = -scale * total;
    // d/dp_i = sum_j coef(i,j) p_j + sum_j coef(j,i) p_j
    DenseMatrix sym = coef + coef.transposed();
    out.gradient = matmul(sym, probabilities);
    return out;
}

AugmentationLoss augmentation_loss(const DenseMatrix& probabilities, const DenseMatrix& augmented) {
    if (!probabilities.same_shape(augmented)) throw InputError("augmentation_loss: shape mismatch");
    AugmentationLoss out;
    DenseMatrix diff = probabilities - augmented;
    out.value = frobenius_squared(diff);
    diff *= 2.0;
    out.gradient_augmented = diff * -1.0;
    out.gradient = std::move(diff);
    return out;
}

double discounted_beta1(double beta1, double gamma, std::size_t t) {
    return beta1 * std::pow(gamma, static_cast<double>(t));
}

DenseMatrix batch_adjacency(const GldcModel& model, const DenseMatrix& batch, std::size_t k, double sigma2) {
    DenseMatrix w = build_knn_adjacency(forward(model.encoder, batch).output(), k, sigma2);
    for (std::size_t i = 0; i < w.rows(); ++i) w(i, i) = 1.0;
    return w;
}

namespace {

struct GraphSource {
    const DenseMatrix* adjacency = nullptr;  // used as-is when set
    std::size_t k = 0;
    double sigma2 = 1.0;
};

ClusteringLoss clustering_loss_impl(const DenseMatrix& batch, const DenseMatrix& augmented_batch,
                                    const GldcModel& model, const GraphSource& graph,
                                    const ClusteringLossOptions& options) {
    if (!batch.same_shape(augmented_batch)) throw InputError("clustering_loss: augmented batch shape mismatch");

    const ForwardTrace enc = forward(model.encoder, batch);
    const ForwardTrace dec = forward(model.decoder, enc.output());
    const ForwardTrace head = forward(model.head, enc.output());
    const ForwardTrace enc_aug = forward(model.encoder, augmented_batch);
    const ForwardTrace head_aug = forward(model.head, enc_aug.output());

    DenseMatrix built;
    const DenseMatrix* adjacency = graph.adjacency;
    if (adjacency == nullptr) {
        built = build_knn_adjacency(enc.output(), graph.k, graph.sigma2);
        for (std::size_t i = 0; i < built.rows(); ++i) built(i, i) = 1.0;
        adjacency = &built;
    }

    ClusteringLoss out;
    DenseMatrix residual = dec.output() - batch;
    out.reconstruction = frobenius_squared(residual);
    residual *= 2.0 * options.reconstruction_weight;

    PairwiseLoss lw = graph_loss(head.output(), *adjacency);
    AugmentationLoss la = augmentation_loss(head.output(), head_aug.output());
    out.graph = lw.value;
    out.augmentation = la.value;
    out.total = options.reconstruction_weight * out.reconstruction + options.beta1 * out.graph + options.beta2 * out.augmentation;

    DenseMatrix grad_p = lw.gradient * options.beta1;
    grad_p += la.gradient * options.beta2;
    const DenseMatrix grad_p_aug = la.gradient_augmented * options.beta2;

    BackwardResult head_back = backward(model.head, head, grad_p);
    BackwardResult dec_back = backward(model.decoder, dec, residual,
                                       {.parameter_gradients = options.decoder_gradient, .input_gradient = true});
    DenseMatrix grad_z = std::move(head_back.input_gradient);
    grad_z += dec_back.input_gradient;
    BackwardResult enc_back = backward(model.encoder, enc, grad_z, {.parameter_gradients = true, .input_gradient = false});

    BackwardResult head_aug_back = backward(model.head, head_aug, grad_p_aug);
    BackwardResult enc_aug_back = backward(model.encoder, enc_aug, head_aug_back.input_gradient,
                                           {.parameter_gradients = true, .input_gradient = false});

    enc_back.parameters += enc_aug_back.parameters;
    head_back.parameters += head_aug_back.parameters;
    out.gradients.encoder = std::move(enc_back.parameters);
    out.gradients.head = std::move(head_back.parameters);
    if (options.decoder_gradient) out.gradients.decoder = std::move(dec_back.parameters);
    return out;
}

}  // namespace

ClusteringLoss clustering_loss(const DenseMatrix& batch, const DenseMatrix& augmented_batch, const GldcModel& model,
                               const DenseMatrix& adjacency, const ClusteringLossOptions& options) {
    return clustering_loss_impl(batch, augmented_batch, model, GraphSource{.adjacency = &adjacency}, options);
}

// ---------------------------------------------------------------------------
// Training

namespace {

void pretrain_epochs(GldcModel& model, const Dataset& data, const TrainingConfig& config,
                     const EpochCallback& on_epoch) {
    auto rng = stream_rng(config.seed, Stream::PretrainShuffle);
    for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        EpochRecord record{.phase = "pretrain", .epoch = epoch};
        for (const auto& idx : make_batches(shuffled_indices(data.size(), rng), config.batch_size, 1)) {
            const DenseMatrix batch = data.features.gather_rows(idx);
            ModelLoss loss = reconstruction_loss(batch, model);
            require_finite(loss.value, "reconstruction loss");
            adam_step(model, loss.gradients, config.learning_rate);
            record.loss += loss.value;
            record.reconstruction += loss.value;
        }
        if (on_epoch) on_epoch(record);
    }
}

}  // namespace

GldcModel pretrain(const Dataset& data, const TrainingConfig& config, const EpochCallback& on_epoch) {
    config.validate_for(data);
    GldcModel model = make_model(data.dim(), config.resolved_clusters(data), config);
    pretrain_epochs(model, data, config, on_epoch);
    return model;
}

TrainResult fine_tune(const Dataset& data, const TrainingConfig& config, GldcModel pretrained,
                      const EpochCallback& on_epoch) {
    config.validate_for(data);
    pretrained.validate();
    if (pretrained.input_dim() != data.dim()) throw InputError("fine_tune: model input dimension does not match data");
    if (pretrained.clusters() != config.resolved_clusters(data)) {
        throw InputError("fine_tune: model head has " + std::to_string(pretrained.clusters()) +
                         " clusters, config asks for " + std::to_string(config.resolved_clusters(data)));
    }

    TrainResult result;
    result.model = std::move(pretrained);
    GldcModel& model = result.model;
    model.adam = AdamState{};

    const Dataset augmented = augment(data, config.xi, stream_seed(config.seed, Stream::Augment));
    auto rng = stream_rng(config.seed, Stream::TrainShuffle);
    const bool per_batch = config.discount_granularity == DiscountGranularity::Minibatch;
    std::size_t iteration = 0;

    for (std::size_t epoch = 0; epoch < config.train_epochs; ++epoch) {
        EpochRecord record{.phase = "train", .epoch = epoch};
        record.beta1 = discounted_beta1(config.beta1, config.discount_gamma, per_batch ? iteration : epoch);
        const auto batches = make_batches(shuffled_indices(data.size(), rng), config.batch_size, config.k_neighbors + 1);
        for (const auto& idx : batches) {
            const double beta1 =
                discounted_beta1(config.beta1, config.discount_gamma, per_batch ? iteration : epoch);
            const DenseMatrix batch = data.features.gather_rows(idx);
            const DenseMatrix batch_aug = augmented.features.gather_rows(idx);
            ClusteringLoss loss = clustering_loss_impl(
                batch, batch_aug, model, GraphSource{.k = config.k_neighbors, .sigma2 = config.sigma2},
                {.beta1 = beta1, .beta2 = config.beta2, .decoder_gradient = false});
            require_finite(loss.total, "clustering loss");
            adam_step(model, ModelGradients{.encoder = std::move(loss.gradients.encoder), .decoder = std::nullopt, .head = std::move(loss.gradients.head)},
                      config.learning_rate);
            record.loss += loss.total;
            record.reconstruction += loss.reconstruction;
            record.graph += loss.graph;
            record.augmentation += loss.augmentation;
            ++iteration;
        }
        result.history.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    result.probabilities = infer_probabilities(data.features, model);
    return result;
}

TrainResult train(const Dataset& data, const TrainingConfig& config, const EpochCallback& on_epoch) {
    GldcModel model = pretrain(data, config, on_epoch);
    return fine_tune(data, config, std::move(model), on_epoch);
}

ProbabilityMatrix infer_probabilities(const DenseMatrix& features, const GldcModel& model) {
    model.validate();
    if (features.cols() != model.input_dim()) throw InputError("infer_probabilities: feature dimension mismatch");
    constexpr std::size_t chunk = 1024;
    DenseMatrix out(features.rows(), model.clusters());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < features.rows(); start += chunk) {
        const std::size_t end = std::min(features.rows(), start + chunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const DenseMatrix z = forward(model.encoder, features.gather_rows(idx)).output();
        const DenseMatrix p = forward(model.head, z).output();
        std::copy(p.values().begin(), p.values().end(), out.data() + start * out.cols());
    }
    return ProbabilityMatrix::from_network_output(std::move(out));
}

Labels assign_labels(const ProbabilityMatrix& probabilities) {
    Labels labels(probabilities.samples(), 0);
    for (std::size_t i = 0; i < probabilities.samples(); ++i) {
        auto row = probabilities.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j) {
            if (row[j] > row[best]) best = j;
        }
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

}  // namespace hchc
