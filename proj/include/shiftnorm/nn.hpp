#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "shiftnorm/dataset.hpp"
#include "shiftnorm/matrix.hpp"
#include "shiftnorm/stats.hpp"

namespace shiftnorm {

// ---------------------------------------------------------------------------
// Layers. A network is a flat ordered list; batch-norm layers carry the
// statistics estimated on the training data plus learned affine parameters.
// ---------------------------------------------------------------------------

struct DenseLayer {
    Matrix weights; // out x in
    std::vector<double> bias;
};

struct BatchNormLayer {
    FeatureStats source_stats; // count 0 until populated by training
    std::vector<double> gamma;
    std::vector<double> beta;
    double epsilon = 1e-5;
};

struct ReluLayer {};

using Layer = std::variant<DenseLayer, BatchNormLayer, ReluLayer>;

struct Network {
    std::vector<Layer> layers;
    int class_count = 2;

    std::size_t input_dim() const;
    std::vector<std::size_t> bn_layer_indices() const;
    void validate() const;

    std::string to_json() const;
    static Network from_json(const std::string& text);
};

// Fully connected stack: Dense -> BN -> ReLU per hidden width, then a final
// Dense onto the classes. Weights drawn fan-in scaled uniform from the seed.
Network make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                 int classes, std::uint64_t seed, double bn_epsilon = 1e-5);

// ---------------------------------------------------------------------------
// Evaluation modes: per-batch statistics (training semantics), the stored
// source statistics, or externally supplied target statistics combined with
// the source prior.
// ---------------------------------------------------------------------------

struct TrainStatsMode {};
struct SourceStatsMode {};
struct AdaptedStatsMode {
    std::vector<FeatureStats> target_stats; // one per BN layer, in order
    CombineConfig combine;
};

using EvalMode = std::variant<TrainStatsMode, SourceStatsMode, AdaptedStatsMode>;

Matrix forward(const Network& net, const Matrix& batch, const EvalMode& mode);

double evaluate_error(const Network& net, const Dataset& data, const EvalMode& mode);

// Mean softmax cross-entropy of a labeled batch under training semantics.
double batch_loss(const Network& net, const Dataset& batch);

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct TrainSchedule {
    int epochs = 20;
    double learning_rate = 0.05;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

// Plain SGD on softmax cross-entropy with the full batch-norm backward pass.
// After the last epoch each BN layer's source_stats is replaced with the
// statistics of a full pass over the training data under training semantics.
Network train(Network net, const Dataset& data, const TrainSchedule& schedule,
              std::vector<EpochLog>* log = nullptr);

// ---------------------------------------------------------------------------
// Statistics collection and adaptation.
// ---------------------------------------------------------------------------

// Statistics of each BN layer's input activations. Upstream BN layers
// normalize with the statistics selected by `mode`; under TrainStatsMode the
// dataset is processed as a single batch, otherwise chunks are pooled
// exactly via merge_stats.
std::vector<FeatureStats> collect_stats(const Network& net, const Matrix& data,
                                        const EvalMode& mode = SourceStatsMode{});

// Copy of the network with the stored BN statistics replaced.
Network with_bn_stats(Network net, const std::vector<FeatureStats>& stats);

// Stage-wise re-estimation: stages partition the layer list; each stage runs
// as many collection passes as it has BN layers, with upstream stages already
// adapted, re-estimating the stage statistics each pass.
using StageRange = std::pair<std::size_t, std::size_t>; // [begin, end)
Network adapt_layerwise(const Network& net, const Matrix& data,
                        const std::vector<StageRange>& stages);

// Target statistics of the full dataset combined with the source prior.
// A zero target_count_n in cfg is replaced by the dataset size.
AdaptedStatsMode adapt_full(const Network& net, const Matrix& target_data, CombineConfig cfg);

// ---------------------------------------------------------------------------
// Gradient verification.
// ---------------------------------------------------------------------------

struct LayerGrads {
    std::vector<double> a; // dense: d(weights) row-major; bn: d(gamma)
    std::vector<double> b; // dense: d(bias);              bn: d(beta)
};

using ParamGradients = std::vector<LayerGrads>; // one entry per layer

ParamGradients analytic_gradients(const Network& net, const Dataset& batch);
ParamGradients numeric_gradients(const Network& net, const Dataset& batch, double step = 1e-5);

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool pass = false;
};

// Relative comparison with an absolute floor so near-zero gradients compare
// vacuously.
GradCheckReport compare_gradients(const ParamGradients& analytic, const ParamGradients& numeric,
                                  double tolerance);

GradCheckReport gradient_check(const Network& net, const Dataset& batch, double tolerance = 1e-6);

} // namespace shiftnorm
