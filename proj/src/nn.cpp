#include "shiftnorm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "shiftnorm/rng.hpp"

namespace shiftnorm {

namespace {

std::size_t layer_output_dim(const Layer& layer, std::size_t input_dim) {
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) return dense->weights.rows();
    return input_dim;
}

std::size_t layer_input_dim(const Layer& layer, std::size_t carried) {
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) return dense->weights.cols();
    if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) return bn->gamma.size();
    return carried;
}

void apply_dense(const DenseLayer& dense, const Matrix& in, Matrix& out) {
    out = matmul_nt(in, dense.weights);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += dense.bias[j];
}

void apply_bn(const BatchNormLayer& bn, const FeatureStats& stats, const Matrix& in, Matrix& out) {
    const std::size_t d = bn.gamma.size();
    if (stats.dim() != d)
        throw std::invalid_argument("forward: BN statistics dimension mismatch");
    out = Matrix(in.rows(), d);
    for (std::size_t j = 0; j < d; ++j) {
        const double inv = 1.0 / std::sqrt(stats.variance[j] + bn.epsilon);
        const double g = bn.gamma[j], b = bn.beta[j], mu = stats.mean[j];
        for (std::size_t i = 0; i < in.rows(); ++i)
            out(i, j) = g * ((in(i, j) - mu) * inv) + b;
    }
}

void apply_relu(const Matrix& in, Matrix& out) {
    out = in;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
}

// Statistics each BN layer should normalize with under a fixed-stats mode.
std::vector<FeatureStats> resolve_bn_stats(const Network& net, const EvalMode& mode) {
    const auto bn_idx = net.bn_layer_indices();
    std::vector<FeatureStats> resolved;
    resolved.reserve(bn_idx.size());
    if (std::holds_alternative<SourceStatsMode>(mode)) {
        for (std::size_t idx : bn_idx) {
            const auto& bn = std::get<BatchNormLayer>(net.layers[idx]);
            if (bn.source_stats.empty())
                throw std::invalid_argument("forward: source statistics not populated");
            resolved.push_back(bn.source_stats);
        }
        return resolved;
    }
    const auto& adapted = std::get<AdaptedStatsMode>(mode);
    if (adapted.target_stats.size() != bn_idx.size())
        throw std::invalid_argument("forward: adapted statistics count mismatch");
    for (std::size_t k = 0; k < bn_idx.size(); ++k) {
        const auto& bn = std::get<BatchNormLayer>(net.layers[bn_idx[k]]);
        CombineConfig cfg = adapted.combine;
        resolved.push_back(combine_stats(bn.source_stats, adapted.target_stats[k], cfg));
    }
    return resolved;
}

// Softmax probabilities, row-wise, numerically shifted by the row max.
Matrix softmax(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double mx = logits(i, 0);
        for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            p(i, j) = std::exp(logits(i, j) - mx);
            sum += p(i, j);
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) p(i, j) /= sum;
    }
    return p;
}

struct BnCache {
    FeatureStats stats;          // statistics used for normalization
    std::vector<double> inv_std; // 1/sqrt(var + eps)
    Matrix xhat;                 // normalized pre-affine activations
};

struct ForwardCache {
    std::vector<Matrix> inputs; // input of every layer
    std::vector<BnCache> bn;    // one per BN layer, in order
    Matrix logits;
};

// Training-semantics forward pass that records everything the backward pass
// needs. BN layers normalize with their input batch statistics.
ForwardCache forward_train_cached(const Network& net, const Matrix& batch) {
    if (batch.rows() < 2) throw std::invalid_argument("train-mode batch too small");
    ForwardCache cache;
    Matrix cur = batch;
    for (const Layer& layer : net.layers) {
        cache.inputs.push_back(cur);
        Matrix next;
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            apply_dense(*dense, cur, next);
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            BnCache bc;
            bc.stats = estimate_stats(cur);
            bc.inv_std.resize(bc.stats.dim());
            for (std::size_t j = 0; j < bc.stats.dim(); ++j)
                bc.inv_std[j] = 1.0 / std::sqrt(bc.stats.variance[j] + bn->epsilon);
            bc.xhat = Matrix(cur.rows(), cur.cols());
            next = Matrix(cur.rows(), cur.cols());
            for (std::size_t j = 0; j < cur.cols(); ++j)
                for (std::size_t i = 0; i < cur.rows(); ++i) {
                    bc.xhat(i, j) = (cur(i, j) - bc.stats.mean[j]) * bc.inv_std[j];
                    next(i, j) = bn->gamma[j] * bc.xhat(i, j) + bn->beta[j];
                }
            cache.bn.push_back(std::move(bc));
        } else {
            apply_relu(cur, next);
        }
        cur = std::move(next);
    }
    cache.logits = std::move(cur);
    return cache;
}

double mean_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    const auto p = softmax(logits);
    double loss = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i)
        loss -= std::log(std::max(p(i, static_cast<std::size_t>(labels[i])), 1e-300));
    return loss / static_cast<double>(p.rows());
}

// Full backward pass through the cached forward; returns per-layer parameter
// gradients of the mean cross-entropy.
ParamGradients backward(const Network& net, const ForwardCache& cache,
                        const std::vector<int>& labels) {
    const std::size_t n = cache.logits.rows();
    Matrix delta = softmax(cache.logits);
    for (std::size_t i = 0; i < n; ++i) {
        delta(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    }
    for (double& v : delta.data()) v /= static_cast<double>(n);

    ParamGradients grads(net.layers.size());
    std::size_t bn_cursor = cache.bn.size();
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& layer = net.layers[li];
        const Matrix& input = cache.inputs[li];
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            LayerGrads g;
            g.a.assign(dense->weights.rows() * dense->weights.cols(), 0.0);
            g.b.assign(dense->bias.size(), 0.0);
            for (std::size_t i = 0; i < delta.rows(); ++i)
                for (std::size_t o = 0; o < dense->weights.rows(); ++o) {
                    const double d = delta(i, o);
                    g.b[o] += d;
                    for (std::size_t k = 0; k < dense->weights.cols(); ++k)
                        g.a[o * dense->weights.cols() + k] += d * input(i, k);
                }
            grads[li] = std::move(g);
            delta = matmul(delta, dense->weights);
        } else if (std::get_if<BatchNormLayer>(&layer)) {
            const auto* bn = std::get_if<BatchNormLayer>(&layer);
            const BnCache& bc = cache.bn[--bn_cursor];
            const std::size_t d = bn->gamma.size();
            LayerGrads g;
            g.a.assign(d, 0.0);
            g.b.assign(d, 0.0);
            Matrix dx(delta.rows(), d);
            const double inv_n = 1.0 / static_cast<double>(delta.rows());
            for (std::size_t j = 0; j < d; ++j) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t i = 0; i < delta.rows(); ++i) {
                    sum_dy += delta(i, j);
                    sum_dy_xhat += delta(i, j) * bc.xhat(i, j);
                }
                g.a[j] = sum_dy_xhat;
                g.b[j] = sum_dy;
                // dL/dx = gamma*inv/n * (n*dy - sum(dy) - xhat*sum(dy*xhat))
                const double scale = bn->gamma[j] * bc.inv_std[j] * inv_n;
                for (std::size_t i = 0; i < delta.rows(); ++i)
                    dx(i, j) = scale * (static_cast<double>(delta.rows()) * delta(i, j) -
                                        sum_dy - bc.xhat(i, j) * sum_dy_xhat);
            }
            grads[li] = std::move(g);
            delta = std::move(dx);
        } else {
            for (std::size_t i = 0; i < delta.rows(); ++i)
                for (std::size_t j = 0; j < delta.cols(); ++j)
                    if (input(i, j) <= 0.0) delta(i, j) = 0.0;
        }
    }
    return grads;
}

FeatureStats empty_stats(std::size_t dim) {
    FeatureStats s;
    s.mean.assign(dim, 0.0);
    s.variance.assign(dim, 1.0);
    s.count = 0.0;
    return s;
}

} // namespace

// ---------------------------------------------------------------------------
// Network basics.
// ---------------------------------------------------------------------------

std::size_t Network::input_dim() const {
    for (const Layer& layer : layers) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) return dense->weights.cols();
        if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) return bn->gamma.size();
    }
    throw std::invalid_argument("Network: no sized layer");
}

std::vector<std::size_t> Network::bn_layer_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (std::holds_alternative<BatchNormLayer>(layers[i])) idx.push_back(i);
    return idx;
}

void Network::validate() const {
    if (layers.empty()) throw std::invalid_argument("Network: no layers");
    if (class_count < 2) throw std::invalid_argument("Network: class_count must be >= 2");
    std::size_t dim = layer_input_dim(layers.front(), 0);
    for (const Layer& layer : layers) {
        if (layer_input_dim(layer, dim) != dim)
            throw std::invalid_argument("Network: adjacent layer dimensions do not chain");
        if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            if (bn->gamma.size() != bn->beta.size() || bn->source_stats.dim() != bn->gamma.size())
                throw std::invalid_argument("Network: inconsistent BN parameter sizes");
            if (!(bn->epsilon > 0.0)) throw std::invalid_argument("Network: epsilon must be > 0");
        }
        dim = layer_output_dim(layer, dim);
    }
    if (dim != static_cast<std::size_t>(class_count))
        throw std::invalid_argument("Network: final layer width differs from class_count");
}

Network make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, int classes,
                 std::uint64_t seed, double bn_epsilon) {
    if (classes < 2) throw std::invalid_argument("make_mlp: classes must be >= 2");
    Rng rng(Rng::derive(seed, 0x1717));
    Network net;
    net.class_count = classes;
    std::size_t in_dim = input_dim;
    auto add_dense = [&](std::size_t out_dim) {
        DenseLayer dense;
        dense.weights = Matrix(out_dim, in_dim);
        const double limit = std::sqrt(6.0 / static_cast<double>(in_dim));
        for (double& w : dense.weights.data()) w = (2.0 * rng.uniform() - 1.0) * limit;
        dense.bias.assign(out_dim, 0.0);
        net.layers.emplace_back(std::move(dense));
        in_dim = out_dim;
    };
    for (std::size_t width : hidden) {
        add_dense(width);
        BatchNormLayer bn;
        bn.source_stats = empty_stats(width);
        bn.gamma.assign(width, 1.0);
        bn.beta.assign(width, 0.0);
        bn.epsilon = bn_epsilon;
        net.layers.emplace_back(std::move(bn));
        net.layers.emplace_back(ReluLayer{});
    }
    add_dense(static_cast<std::size_t>(classes));
    net.validate();
    return net;
}

// ---------------------------------------------------------------------------
// Forward / evaluation.
// ---------------------------------------------------------------------------

Matrix forward(const Network& net, const Matrix& batch, const EvalMode& mode) {
    if (batch.rows() == 0) throw std::invalid_argument("forward: empty batch");
    if (batch.cols() != net.input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");

    if (std::holds_alternative<TrainStatsMode>(mode)) {
        if (batch.rows() < 2) throw std::invalid_argument("train-mode batch too small");
        return forward_train_cached(net, batch).logits;
    }

    const auto resolved = resolve_bn_stats(net, mode);
    Matrix cur = batch;
    std::size_t bn_cursor = 0;
    for (const Layer& layer : net.layers) {
        Matrix next;
        if (const auto* dense = std::get_if<DenseLayer>(&layer))
            apply_dense(*dense, cur, next);
        else if (const auto* bn = std::get_if<BatchNormLayer>(&layer))
            apply_bn(*bn, resolved[bn_cursor++], cur, next);
        else
            apply_relu(cur, next);
        cur = std::move(next);
    }
    return cur;
}

double evaluate_error(const Network& net, const Dataset& data, const EvalMode& mode) {
    const Matrix logits = forward(net, data.x, mode);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j)
            if (logits(i, j) > logits(i, best)) best = j;
        if (best != static_cast<std::size_t>(data.y[i])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(logits.rows());
}

double batch_loss(const Network& net, const Dataset& batch) {
    const auto cache = forward_train_cached(net, batch.x);
    return mean_cross_entropy(cache.logits, batch.y);
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

Network train(Network net, const Dataset& data, const TrainSchedule& schedule,
              std::vector<EpochLog>* log) {
    net.validate();
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    const int max_label = *std::max_element(data.y.begin(), data.y.end());
    if (max_label >= net.class_count)
        throw std::invalid_argument("train: label out of range");
    if (schedule.batch_size < 2) throw std::invalid_argument("train: batch_size must be >= 2");

    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(Rng::derive(schedule.seed, 0xE90C0 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t epoch_hits = 0, epoch_samples = 0, batches = 0;
        for (std::size_t start = 0; start < data.size(); start += schedule.batch_size) {
            const std::size_t end = std::min(start + schedule.batch_size, data.size());
            if (end - start < 2) break; // a single trailing sample has no batch variance
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
            const Dataset batch = data.subset(idx);

            const auto cache = forward_train_cached(net, batch.x);
            const double loss = mean_cross_entropy(cache.logits, batch.y);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch));
            const auto grads = backward(net, cache, batch.y);

            for (std::size_t li = 0; li < net.layers.size(); ++li) {
                if (auto* dense = std::get_if<DenseLayer>(&net.layers[li])) {
                    auto& w = dense->weights.data();
                    for (std::size_t k = 0; k < w.size(); ++k)
                        w[k] -= schedule.learning_rate * grads[li].a[k];
                    for (std::size_t k = 0; k < dense->bias.size(); ++k)
                        dense->bias[k] -= schedule.learning_rate * grads[li].b[k];
                } else if (auto* bn = std::get_if<BatchNormLayer>(&net.layers[li])) {
                    for (std::size_t k = 0; k < bn->gamma.size(); ++k) {
                        bn->gamma[k] -= schedule.learning_rate * grads[li].a[k];
                        bn->beta[k] -= schedule.learning_rate * grads[li].b[k];
                    }
                }
            }

            for (std::size_t li = 0; li < net.layers.size(); ++li) {
                const auto finite = [](const std::vector<double>& v) {
                    for (double x : v)
                        if (!std::isfinite(x)) return false;
                    return true;
                };
                bool ok = true;
                if (const auto* dense = std::get_if<DenseLayer>(&net.layers[li]))
                    ok = finite(dense->weights.data()) && finite(dense->bias);
                else if (const auto* bn = std::get_if<BatchNormLayer>(&net.layers[li]))
                    ok = finite(bn->gamma) && finite(bn->beta);
                if (!ok)
                    throw std::runtime_error("train: diverged (non-finite parameters) at epoch " +
                                             std::to_string(epoch));
            }

            epoch_loss += loss;
            ++batches;
            for (std::size_t i = 0; i < cache.logits.rows(); ++i) {
                std::size_t best = 0;
                for (std::size_t j = 1; j < cache.logits.cols(); ++j)
                    if (cache.logits(i, j) > cache.logits(i, best)) best = j;
                if (best == static_cast<std::size_t>(batch.y[i])) ++epoch_hits;
            }
            epoch_samples += end - start;
        }
        if (log && batches > 0)
            log->push_back({epoch, epoch_loss / static_cast<double>(batches),
                            static_cast<double>(epoch_hits) / static_cast<double>(epoch_samples)});
    }

    // Final full pass under training semantics populates the source stats.
    const auto stats = collect_stats(net, data.x, TrainStatsMode{});
    return with_bn_stats(std::move(net), stats);
}

// ---------------------------------------------------------------------------
// Statistics collection and adaptation.
// ---------------------------------------------------------------------------

std::vector<FeatureStats> collect_stats(const Network& net, const Matrix& data,
                                        const EvalMode& mode) {
    if (data.rows() == 0) throw std::invalid_argument("collect_stats: empty data");
    if (data.cols() != net.input_dim())
        throw std::invalid_argument("collect_stats: input dimension mismatch");

    if (std::holds_alternative<TrainStatsMode>(mode)) {
        // One batch; each BN layer normalizes with the statistics of its own
        // input, which is what the collected values describe.
        std::vector<FeatureStats> collected;
        Matrix cur = data;
        for (const Layer& layer : net.layers) {
            Matrix next;
            if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
                apply_dense(*dense, cur, next);
            } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
                FeatureStats stats = estimate_stats(cur);
                apply_bn(*bn, stats, cur, next);
                collected.push_back(std::move(stats));
            } else {
                apply_relu(cur, next);
            }
            cur = std::move(next);
        }
        return collected;
    }

    const auto resolved = resolve_bn_stats(net, mode);
    constexpr std::size_t kChunk = 4096;
    std::vector<FeatureStats> pooled;
    for (std::size_t start = 0; start < data.rows(); start += kChunk) {
        const std::size_t end = std::min(start + kChunk, data.rows());
        Matrix cur(end - start, data.cols());
        for (std::size_t i = start; i < end; ++i)
            for (std::size_t j = 0; j < data.cols(); ++j) cur(i - start, j) = data(i, j);

        std::vector<FeatureStats> chunk_stats;
        std::size_t bn_cursor = 0;
        for (const Layer& layer : net.layers) {
            Matrix next;
            if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
                apply_dense(*dense, cur, next);
            } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
                chunk_stats.push_back(estimate_stats(cur));
                apply_bn(*bn, resolved[bn_cursor++], cur, next);
            } else {
                apply_relu(cur, next);
            }
            cur = std::move(next);
        }
        if (pooled.empty()) {
            pooled = std::move(chunk_stats);
        } else {
            for (std::size_t k = 0; k < pooled.size(); ++k)
                pooled[k] = merge_stats(pooled[k], chunk_stats[k]);
        }
    }
    return pooled;
}

Network with_bn_stats(Network net, const std::vector<FeatureStats>& stats) {
    const auto bn_idx = net.bn_layer_indices();
    if (stats.size() != bn_idx.size())
        throw std::invalid_argument("with_bn_stats: statistics count mismatch");
    for (std::size_t k = 0; k < bn_idx.size(); ++k) {
        auto& bn = std::get<BatchNormLayer>(net.layers[bn_idx[k]]);
        if (stats[k].dim() != bn.gamma.size())
            throw std::invalid_argument("with_bn_stats: dimension mismatch");
        bn.source_stats = stats[k];
    }
    return net;
}

Network adapt_layerwise(const Network& net, const Matrix& data,
                        const std::vector<StageRange>& stages) {
    // The stages must partition the layer list in order.
    std::size_t expected = 0;
    for (const auto& [begin, end] : stages) {
        if (begin != expected || end <= begin || end > net.layers.size())
            throw std::invalid_argument("adapt_layerwise: stages do not partition the layers");
        expected = end;
    }
    if (expected != net.layers.size())
        throw std::invalid_argument("adapt_layerwise: stages do not cover all layers");

    Network adapted = net;
    const auto bn_idx = adapted.bn_layer_indices();
    for (const auto& [begin, end] : stages) {
        std::size_t stage_bn = 0;
        for (std::size_t idx : bn_idx)
            if (idx >= begin && idx < end) ++stage_bn;
        // One pass per BN layer in the stage; pass p settles the p-th layer.
        for (std::size_t pass = 0; pass < stage_bn; ++pass) {
            const auto collected = collect_stats(adapted, data, SourceStatsMode{});
            auto merged = collected;
            for (std::size_t k = 0; k < bn_idx.size(); ++k)
                if (bn_idx[k] < begin || bn_idx[k] >= end)
                    merged[k] = std::get<BatchNormLayer>(adapted.layers[bn_idx[k]]).source_stats;
            adapted = with_bn_stats(std::move(adapted), merged);
        }
    }
    return adapted;
}

AdaptedStatsMode adapt_full(const Network& net, const Matrix& target_data, CombineConfig cfg) {
    if (target_data.rows() == 0) throw std::invalid_argument("adapt_full: empty data");
    AdaptedStatsMode mode;
    mode.target_stats = collect_stats(net, target_data, TrainStatsMode{});
    mode.combine = cfg;
    if (mode.combine.target_count_n == 0) mode.combine.target_count_n = target_data.rows();
    return mode;
}

// ---------------------------------------------------------------------------
// Gradient verification.
// ---------------------------------------------------------------------------

ParamGradients analytic_gradients(const Network& net, const Dataset& batch) {
    const auto cache = forward_train_cached(net, batch.x);
    return backward(net, cache, batch.y);
}

ParamGradients numeric_gradients(const Network& net, const Dataset& batch, double step) {
    Network work = net;
    ParamGradients grads(net.layers.size());
    auto probe = [&](double& param) {
        const double saved = param;
        param = saved + step;
        const double up = batch_loss(work, batch);
        param = saved - step;
        const double down = batch_loss(work, batch);
        param = saved;
        return (up - down) / (2.0 * step);
    };
    for (std::size_t li = 0; li < work.layers.size(); ++li) {
        if (auto* dense = std::get_if<DenseLayer>(&work.layers[li])) {
            for (double& w : dense->weights.data()) grads[li].a.push_back(probe(w));
            for (double& b : dense->bias) grads[li].b.push_back(probe(b));
        } else if (auto* bn = std::get_if<BatchNormLayer>(&work.layers[li])) {
            for (double& g : bn->gamma) grads[li].a.push_back(probe(g));
            for (double& b : bn->beta) grads[li].b.push_back(probe(b));
        }
    }
    return grads;
}

GradCheckReport compare_gradients(const ParamGradients& analytic, const ParamGradients& numeric,
                                  double tolerance) {
    if (analytic.size() != numeric.size())
        throw std::invalid_argument("compare_gradients: layer count mismatch");
    constexpr double kAbsFloor = 1e-8;
    GradCheckReport report;
    auto compare_vec = [&](const std::vector<double>& a, const std::vector<double>& n) {
        if (a.size() != n.size())
            throw std::invalid_argument("compare_gradients: parameter count mismatch");
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::abs(a[i]) + std::abs(n[i]) < kAbsFloor) continue;
            const double rel = std::abs(a[i] - n[i]) / std::max(std::abs(a[i]), std::abs(n[i]));
            report.max_rel_error = std::max(report.max_rel_error, rel);
        }
    };
    for (std::size_t li = 0; li < analytic.size(); ++li) {
        compare_vec(analytic[li].a, numeric[li].a);
        compare_vec(analytic[li].b, numeric[li].b);
    }
    report.pass = report.max_rel_error < tolerance;
    return report;
}

GradCheckReport gradient_check(const Network& net, const Dataset& batch, double tolerance) {
    return compare_gradients(analytic_gradients(net, batch), numeric_gradients(net, batch),
                             tolerance);
}

// ---------------------------------------------------------------------------
// Checkpoint serialization.
// ---------------------------------------------------------------------------

std::string Network::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["layers"] = nlohmann::ordered_json::array();
    for (const Layer& layer : layers) {
        nlohmann::ordered_json lj;
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            lj["type"] = "dense";
            auto rows = nlohmann::ordered_json::array();
            for (std::size_t r = 0; r < dense->weights.rows(); ++r) {
                std::vector<double> row(dense->weights.row_ptr(r),
                                        dense->weights.row_ptr(r) + dense->weights.cols());
                rows.push_back(row);
            }
            lj["w"] = std::move(rows);
            lj["b"] = dense->bias;
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            lj["type"] = "bn";
            lj["gamma"] = bn->gamma;
            lj["beta"] = bn->beta;
            lj["mean"] = bn->source_stats.mean;
            lj["var"] = bn->source_stats.variance;
            lj["count"] = bn->source_stats.count;
            lj["eps"] = bn->epsilon;
        } else {
            lj["type"] = "relu";
        }
        j["layers"].push_back(std::move(lj));
    }
    j["classes"] = class_count;
    return j.dump(2) + "\n";
}

Network Network::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != 1)
        throw std::invalid_argument("Network: unsupported format_version");
    Network net;
    net.class_count = j.at("classes").get<int>();
    for (const auto& lj : j.at("layers")) {
        const std::string type = lj.at("type").get<std::string>();
        if (type == "dense") {
            DenseLayer dense;
            const auto rows = lj.at("w").get<std::vector<std::vector<double>>>();
            dense.weights = Matrix::from_rows(rows);
            dense.bias = lj.at("b").get<std::vector<double>>();
            if (dense.bias.size() != dense.weights.rows())
                throw std::invalid_argument("Network: dense bias size mismatch");
            net.layers.emplace_back(std::move(dense));
        } else if (type == "bn") {
            BatchNormLayer bn;
            bn.gamma = lj.at("gamma").get<std::vector<double>>();
            bn.beta = lj.at("beta").get<std::vector<double>>();
            bn.epsilon = lj.at("eps").get<double>();
            const double count = lj.at("count").get<double>();
            if (count > 0.0) {
                bn.source_stats = FeatureStats::make(lj.at("mean").get<std::vector<double>>(),
                                                     lj.at("var").get<std::vector<double>>(), count);
            } else {
                bn.source_stats = empty_stats(bn.gamma.size());
            }
            net.layers.emplace_back(std::move(bn));
        } else if (type == "relu") {
            net.layers.emplace_back(ReluLayer{});
        } else {
            throw std::invalid_argument("Network: unknown layer type '" + type + "'");
        }
    }
    net.validate();
    return net;
}

} // namespace shiftnorm
