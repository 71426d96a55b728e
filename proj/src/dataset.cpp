#include "shiftnorm/dataset.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

#include "shiftnorm/csv.hpp"
#include "shiftnorm/rng.hpp"

namespace shiftnorm {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.x = Matrix(indices.size(), dim());
    out.y.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= size()) throw std::out_of_range("Dataset::subset: index out of range");
        for (std::size_t j = 0; j < dim(); ++j) out.x(i, j) = x(src, j);
        out.y[i] = y[src];
    }
    return out;
}

Dataset Dataset::shuffled(std::uint64_t seed) const {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    return subset(order);
}

std::string Dataset::to_csv() const {
    std::ostringstream out;
    for (std::size_t j = 0; j < dim(); ++j) out << 'f' << j << ',';
    out << "y\n";
    for (std::size_t i = 0; i < size(); ++i) {
        for (std::size_t j = 0; j < dim(); ++j) out << format_double(x(i, j)) << ',';
        out << y[i] << '\n';
    }
    return out.str();
}

Dataset Dataset::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("Dataset::from_csv: empty input");
    const auto header = split_line(line, ',');
    if (header.size() < 2 || header.back() != "y")
        throw std::invalid_argument("Dataset::from_csv: bad header");
    const std::size_t d = header.size() - 1;

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_line(line, ',');
        if (fields.size() != d + 1)
            throw std::invalid_argument("Dataset::from_csv: wrong field count");
        std::vector<double> row(d);
        for (std::size_t j = 0; j < d; ++j) row[j] = parse_double(fields[j]);
        rows.push_back(std::move(row));
        labels.push_back(static_cast<int>(std::stol(fields[d])));
    }
    Dataset out;
    out.x = Matrix::from_rows(rows);
    out.y = std::move(labels);
    return out;
}

} // namespace shiftnorm
