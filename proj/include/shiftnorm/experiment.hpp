#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shiftnorm/config.hpp"
#include "shiftnorm/corrupt.hpp"
#include "shiftnorm/nn.hpp"

namespace shiftnorm {

// Derivation streams hanging off the master seed. Every source of
// randomness in a run flows from exactly one of these.
namespace seed_stream {
constexpr std::uint64_t kData = 0xDA7A;
constexpr std::uint64_t kInit = 0x1217;
constexpr std::uint64_t kTrain = 0x7EA1;
constexpr std::uint64_t kCorrupt = 0xC0;
constexpr std::uint64_t kSweep = 0x53EE;
constexpr std::uint64_t kScan = 0x5CA1;
constexpr std::uint64_t kBounds = 0xB0;
} // namespace seed_stream

// The default experiment: a four-class planar mixture, a two-hidden-layer
// network, and the frozen corruption tables.
struct ExperimentSetup {
    std::uint64_t seed = 44;
    int classes = 4;
    std::size_t dim = 2;
    std::size_t per_class_train = 512;
    std::size_t per_class_eval = 512;
    std::vector<std::size_t> hidden{32, 32};
    int epochs = 25;
    double learning_rate = 0.05;
    std::size_t batch_size = 64;
    double bn_epsilon = 1e-5;
    SeverityTables tables;
    std::string holdout_family = "impulse";
};

// Reads the setup from a config, consuming the keys it understands.
ExperimentSetup read_setup(Config& cfg);

// Train/eval splits of the experiment mixture.
std::pair<Dataset, Dataset> setup_data(const ExperimentSetup& setup);

// Network trained from scratch per the setup, with a training log if given.
Network train_default_network(const ExperimentSetup& setup, const Dataset& train_data,
                              std::vector<EpochLog>* log = nullptr);

} // namespace shiftnorm
