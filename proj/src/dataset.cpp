#include "bayeseval/dataset.hpp"

#include <cmath>
#include <numeric>

#include "bayeseval/errors.hpp"

namespace bayeseval {

namespace {

int shape_product(const std::vector<int>& shape) {
    int p = 1;
    for (int s : shape) {
        if (s <= 0) throw ConfigError("bad_shape", "observation shape entries must be positive");
        p *= s;
    }
    return p;
}

}  // namespace

Dataset::Dataset(std::vector<int> shape, RowMatrix values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_.empty()) throw ConfigError("bad_shape", "observation shape must be non-empty");
    const int expected = shape_product(shape_);
    if (values_.cols() != expected) {
        throw ConfigError("bad_shape", "observation size does not match shape",
                          {{"shape_size", expected}, {"row_size", values_.cols()}});
    }
    if (!values_.allFinite()) {
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            if (!values_.row(i).allFinite()) {
                throw DomainError("non_finite_data", "dataset contains a non-finite value",
                                  {{"index", i}});
            }
        }
    }
}

Dataset Dataset::from_rows(std::vector<int> shape, const std::vector<std::vector<double>>& rows) {
    const int cols = shape_product(shape);
    RowMatrix m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<int>(rows[i].size()) != cols) {
            throw ConfigError("bad_shape", "row size does not match shape", {{"index", i}});
        }
        for (int c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    }
    return Dataset(std::move(shape), std::move(m));
}

Dataset Dataset::from_scalars(std::span<const double> values) {
    RowMatrix m(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
    return Dataset({1}, std::move(m));
}

DataView Dataset::view() const { return DataView(*this, 0, size()); }

std::pair<DataView, DataView> Dataset::split(std::size_t n1) const {
    if (n1 == 0 || n1 >= size()) {
        throw ConfigError("bad_split", "split point must leave both halves non-empty",
                          {{"n", size()}, {"n1", n1}});
    }
    return {DataView(*this, 0, n1), DataView(*this, n1, size())};
}

nlohmann::json Dataset::to_json() const {
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = 0; i < size(); ++i) {
        nlohmann::json obs = nlohmann::json::array();
        for (double x : row(i)) obs.push_back(x);
        items.push_back(std::move(obs));
    }
    return {{"shape", shape_}, {"items", std::move(items)}};
}

Dataset Dataset::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("shape") || !j.contains("items")) {
        throw ConfigError("bad_data", "dataset JSON must be {\"shape\": [...], \"items\": [...]}");
    }
    std::vector<int> shape = j.at("shape").get<std::vector<int>>();
    std::vector<std::vector<double>> rows;
    for (const auto& item : j.at("items")) {
        if (item.is_number()) {
            rows.push_back({item.get<double>()});
        } else {
            rows.push_back(item.get<std::vector<double>>());
        }
    }
    return from_rows(std::move(shape), rows);
}

DataView::DataView(const Dataset& data, std::size_t begin, std::size_t end, std::ptrdiff_t skip)
    : data_(&data), begin_(begin), end_(end), skip_(skip) {
    if (end_ > data.size() || begin_ > end_) {
        throw ConfigError("bad_view", "view range out of bounds",
                          {{"begin", begin_}, {"end", end_}, {"n", data.size()}});
    }
    size_ = end_ - begin_;
    if (skip_ >= 0) {
        if (static_cast<std::size_t>(skip_) < begin_ || static_cast<std::size_t>(skip_) >= end_) {
            throw ConfigError("bad_view", "skipped index outside view range");
        }
        --size_;
    }
}

DataView DataView::excluding(std::size_t k) const {
    if (skip_ >= 0) throw ConfigError("bad_view", "view already skips an observation");
    if (k >= size_) {
        throw ConfigError("bad_view", "excluded index out of range", {{"index", k}, {"size", size_}});
    }
    return DataView(*data_, begin_, end_, static_cast<std::ptrdiff_t>(begin_ + k));
}

}  // namespace bayeseval
