#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shiftnorm/dataset.hpp"

namespace shiftnorm {

// Parametric input corruptions with five severity levels each. Labels are
// never touched; only the feature columns change.
enum class CorruptionFamily { Shift, Scale, GaussNoise, Impulse };

CorruptionFamily corruption_family_from_name(const std::string& name);
std::string corruption_family_name(CorruptionFamily family);
std::vector<CorruptionFamily> all_corruption_families();

// Severity parameter tables, index 0 = severity 1.
struct SeverityTables {
    std::array<double, 5> shift{0.5, 1.0, 1.5, 2.0, 2.5};         // additive constant
    std::array<double, 5> scale{1.25, 1.5, 2.0, 3.0, 4.0};        // multiplicative factor
    std::array<double, 5> gauss_noise{0.25, 0.5, 1.0, 1.5, 2.0};  // added noise std dev
    std::array<double, 5> impulse{0.01, 0.05, 0.12, 0.3, 0.5};    // replacement probability
};

struct CorruptionSpec {
    CorruptionFamily family = CorruptionFamily::Shift;
    int severity = 1; // 1..5

    // The family parameter at this severity.
    double parameter(const SeverityTables& tables = SeverityTables{}) const;
    std::string label() const { return corruption_family_name(family); }
};

// Gaussian mixture classification data: k class means placed at pairwise
// distance >= 4 (unit component variance), m samples per class, labels
// blocked by class. Deterministic in the seed.
Dataset make_dataset(std::uint64_t seed, int classes, std::size_t dim, std::size_t per_class);

// One mixture, two disjoint draws: per class, the first per_class_train
// samples go to the training split and the next per_class_eval to the
// evaluation split.
std::pair<Dataset, Dataset> make_train_eval(std::uint64_t seed, int classes, std::size_t dim,
                                            std::size_t per_class_train,
                                            std::size_t per_class_eval);

// Applies one corruption to every sample. Shift and Scale are deterministic;
// GaussNoise and Impulse draw from a per-sample stream derived from the seed.
Dataset apply_corruption(const Dataset& data, const CorruptionSpec& spec, std::uint64_t seed,
                         const SeverityTables& tables = SeverityTables{});

// Each sample independently receives a uniformly drawn spec from the list.
Dataset mixed_corruptions(const Dataset& data, const std::vector<CorruptionSpec>& specs,
                          std::uint64_t seed, const SeverityTables& tables = SeverityTables{});

// Sidecar metadata written next to corrupted dataset files.
std::string corruption_sidecar_json(const CorruptionSpec& spec, std::uint64_t seed,
                                    const SeverityTables& tables = SeverityTables{});

} // namespace shiftnorm
