#include "shiftnorm/experiment.hpp"

#include <algorithm>
#include <stdexcept>

#include "shiftnorm/rng.hpp"

namespace shiftnorm {

ExperimentSetup read_setup(Config& cfg) {
    ExperimentSetup s;
    s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 44));
    s.classes = static_cast<int>(cfg.get_int("data.classes", 4));
    s.dim = static_cast<std::size_t>(cfg.get_int("data.dim", 2));
    s.per_class_train = static_cast<std::size_t>(cfg.get_int("data.per_class_train", 512));
    s.per_class_eval = static_cast<std::size_t>(cfg.get_int("data.per_class_eval", 512));
    const auto hidden = cfg.get_double_list("net.hidden", {32, 32});
    s.hidden.clear();
    for (double h : hidden) s.hidden.push_back(static_cast<std::size_t>(h));
    s.epochs = static_cast<int>(cfg.get_int("net.epochs", 25));
    s.learning_rate = cfg.get_double("net.learning_rate", 0.05);
    s.batch_size = static_cast<std::size_t>(cfg.get_int("net.batch_size", 64));
    s.bn_epsilon = cfg.get_double("net.bn_epsilon", 1e-5);

    const auto read_table = [&cfg](const char* key, const std::array<double, 5>& fallback) {
        const auto v =
            cfg.get_double_list(key, std::vector<double>(fallback.begin(), fallback.end()));
        if (v.size() != 5)
            throw std::invalid_argument(std::string("config: ") + key + " needs 5 severities");
        std::array<double, 5> out;
        std::copy(v.begin(), v.end(), out.begin());
        return out;
    };
    s.tables.shift = read_table("corrupt.shift", SeverityTables{}.shift);
    s.tables.scale = read_table("corrupt.scale", SeverityTables{}.scale);
    s.tables.gauss_noise = read_table("corrupt.gauss_noise", SeverityTables{}.gauss_noise);
    s.tables.impulse = read_table("corrupt.impulse", SeverityTables{}.impulse);
    s.holdout_family = cfg.get_string("corrupt.holdout_family", "impulse");
    return s;
}

std::pair<Dataset, Dataset> setup_data(const ExperimentSetup& setup) {
    return make_train_eval(Rng::derive(setup.seed, seed_stream::kData), setup.classes, setup.dim,
                           setup.per_class_train, setup.per_class_eval);
}

Network train_default_network(const ExperimentSetup& setup, const Dataset& train_data,
                              std::vector<EpochLog>* log) {
    Network net = make_mlp(setup.dim, setup.hidden, setup.classes,
                           Rng::derive(setup.seed, seed_stream::kInit), setup.bn_epsilon);
    TrainSchedule schedule{setup.epochs, setup.learning_rate, setup.batch_size,
                           Rng::derive(setup.seed, seed_stream::kTrain)};
    return train(std::move(net), train_data, schedule, log);
}

} // namespace shiftnorm
