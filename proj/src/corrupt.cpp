#include "shiftnorm/corrupt.hpp"

#include <cmath>
#include <vector>
#include <stdexcept>

#include <json.hpp>

#include "shiftnorm/rng.hpp"

namespace shiftnorm {

CorruptionFamily corruption_family_from_name(const std::string& name) {
    if (name == "shift") return CorruptionFamily::Shift;
    if (name == "scale") return CorruptionFamily::Scale;
    if (name == "gauss_noise") return CorruptionFamily::GaussNoise;
    if (name == "impulse") return CorruptionFamily::Impulse;
    throw std::invalid_argument("unknown corruption family '" + name + "'");
}

std::string corruption_family_name(CorruptionFamily family) {
    switch (family) {
        case CorruptionFamily::Shift: return "shift";
        case CorruptionFamily::Scale: return "scale";
        case CorruptionFamily::GaussNoise: return "gauss_noise";
        case CorruptionFamily::Impulse: return "impulse";
    }
    throw std::invalid_argument("corruption_family_name: bad enum");
}

std::vector<CorruptionFamily> all_corruption_families() {
    return {CorruptionFamily::Shift, CorruptionFamily::Scale, CorruptionFamily::GaussNoise,
            CorruptionFamily::Impulse};
}

double CorruptionSpec::parameter(const SeverityTables& tables) const {
    if (severity < 1 || severity > 5)
        throw std::invalid_argument("CorruptionSpec: severity must lie in 1..5");
    const std::size_t i = static_cast<std::size_t>(severity - 1);
    switch (family) {
        case CorruptionFamily::Shift: return tables.shift[i];
        case CorruptionFamily::Scale: return tables.scale[i];
        case CorruptionFamily::GaussNoise: return tables.gauss_noise[i];
        case CorruptionFamily::Impulse: return tables.impulse[i];
    }
    throw std::invalid_argument("CorruptionSpec: bad family");
}

Dataset make_dataset(std::uint64_t seed, int classes, std::size_t dim, std::size_t per_class) {
    if (classes < 2 || dim < 1) throw std::invalid_argument("make_dataset: degenerate parameters");
    if (static_cast<std::size_t>(classes) * per_class < 64)
        throw std::invalid_argument("make_dataset: needs at least 64 samples in total");

    // Means proposed uniformly in a cube just wide enough for the separation
    // constraint; rejection keeps every pair at distance >= 4 while typical
    // distances stay near that floor, so corruptions of a few sigma matter.
    constexpr double kMinDistance = 4.0;
    // The cube sits entirely in the positive orthant, the analog of pixel
    // data living in a fixed nonnegative range; multiplicative corruptions
    // then move the data off its manifold the way contrast changes do.
    constexpr double kMeanOffset = 5.5;
    double half_width = (3.0 + 0.25 * static_cast<double>(classes)) *
                        std::sqrt(2.0 / static_cast<double>(dim));
    if (half_width < 1.6) half_width = 1.6;
    if (dim == 1) half_width = 2.0 * kMinDistance * static_cast<double>(classes);
    Rng mean_rng(Rng::derive(seed, 0x11EA15));
    std::vector<std::vector<double>> means;
    int attempts = 0;
    while (means.size() < static_cast<std::size_t>(classes)) {
        if (++attempts > 100000)
            throw std::invalid_argument("make_dataset: degenerate parameters (mean placement)");
        std::vector<double> candidate(dim);
        for (double& v : candidate) v = kMeanOffset + (2.0 * mean_rng.uniform() - 1.0) * half_width;
        bool ok = true;
        for (const auto& existing : means) {
            double dist_sq = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = candidate[j] - existing[j];
                dist_sq += d * d;
            }
            if (dist_sq < kMinDistance * kMinDistance) {
                ok = false;
                break;
            }
        }
        if (ok) means.push_back(std::move(candidate));
    }

    Rng draw_rng(Rng::derive(seed, 0xD2A15));
    Dataset out;
    out.x = Matrix(static_cast<std::size_t>(classes) * per_class, dim);
    out.y.resize(out.x.rows());
    std::size_t row = 0;
    for (int c = 0; c < classes; ++c)
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            for (std::size_t j = 0; j < dim; ++j)
                out.x(row, j) = means[static_cast<std::size_t>(c)][j] + draw_rng.normal();
            out.y[row] = c;
        }
    return out;
}

std::pair<Dataset, Dataset> make_train_eval(std::uint64_t seed, int classes, std::size_t dim,
                                            std::size_t per_class_train,
                                            std::size_t per_class_eval) {
    const std::size_t per_class = per_class_train + per_class_eval;
    const Dataset all = make_dataset(seed, classes, dim, per_class);
    std::vector<std::size_t> train_idx, eval_idx;
    for (int c = 0; c < classes; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * per_class;
        for (std::size_t i = 0; i < per_class_train; ++i) train_idx.push_back(base + i);
        for (std::size_t i = 0; i < per_class_eval; ++i)
            eval_idx.push_back(base + per_class_train + i);
    }
    return {all.subset(train_idx), all.subset(eval_idx)};
}

Dataset apply_corruption(const Dataset& data, const CorruptionSpec& spec, std::uint64_t seed,
                         const SeverityTables& tables) {
    const double param = spec.parameter(tables);
    Dataset out = data;
    switch (spec.family) {
        case CorruptionFamily::Shift:
            for (double& v : out.x.data()) v += param;
            break;
        case CorruptionFamily::Scale:
            for (double& v : out.x.data()) v *= param;
            break;
        case CorruptionFamily::GaussNoise: {
            for (std::size_t i = 0; i < out.size(); ++i) {
                Rng rng(Rng::derive(seed, 0x6E015E ^ (i * 2654435761ULL)));
                for (std::size_t j = 0; j < out.dim(); ++j)
                    out.x(i, j) += param * rng.normal();
            }
            break;
        }
        case CorruptionFamily::Impulse: {
            // Each coordinate is replaced with probability `param` by a
            // uniform draw around that coordinate's observed value range, the
            // analog of impulse noise hitting the extremes of the pixel range.
            constexpr double kRangeMultiplier = 4.0;
            std::vector<double> center(data.dim()), half(data.dim());
            for (std::size_t j = 0; j < data.dim(); ++j) {
                double lo = data.x(0, j), hi = lo;
                for (std::size_t i = 1; i < data.size(); ++i) {
                    lo = std::min(lo, data.x(i, j));
                    hi = std::max(hi, data.x(i, j));
                }
                center[j] = 0.5 * (lo + hi);
                half[j] = 0.5 * (hi - lo) * kRangeMultiplier;
            }
            for (std::size_t i = 0; i < out.size(); ++i) {
                Rng rng(Rng::derive(seed, 0x1A9B27 ^ (i * 2654435761ULL)));
                for (std::size_t j = 0; j < out.dim(); ++j) {
                    const double u = rng.uniform();
                    const double replacement = center[j] + (2.0 * rng.uniform() - 1.0) * half[j];
                    if (u < param) out.x(i, j) = replacement;
                }
            }
            break;
        }
    }
    return out;
}

Dataset mixed_corruptions(const Dataset& data, const std::vector<CorruptionSpec>& specs,
                          std::uint64_t seed, const SeverityTables& tables) {
    if (specs.empty()) throw std::invalid_argument("mixed_corruptions: empty spec list");
    // Corrupt the whole set once per spec and pick rows, so a single-spec
    // list reproduces apply_corruption exactly.
    std::vector<Dataset> variants;
    variants.reserve(specs.size());
    for (const auto& spec : specs) variants.push_back(apply_corruption(data, spec, seed, tables));

    Dataset out = data;
    Rng pick_rng(Rng::derive(seed, 0x313ED));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Dataset& chosen = variants[pick_rng.uniform_int(specs.size())];
        for (std::size_t j = 0; j < data.dim(); ++j) out.x(i, j) = chosen.x(i, j);
    }
    return out;
}

std::string corruption_sidecar_json(const CorruptionSpec& spec, std::uint64_t seed,
                                    const SeverityTables& tables) {
    nlohmann::ordered_json j;
    j["family"] = corruption_family_name(spec.family);
    j["severity"] = spec.severity;
    j["parameter"] = spec.parameter(tables);
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

} // namespace shiftnorm
