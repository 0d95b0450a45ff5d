#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace bayeseval {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class DataView;

// Immutable block of n observations with a fixed shape.  Observations are
// flattened row-major into one row per observation.
class Dataset {
public:
    Dataset(std::vector<int> shape, RowMatrix values);

    static Dataset from_rows(std::vector<int> shape, const std::vector<std::vector<double>>& rows);
    static Dataset from_scalars(std::span<const double> values);

    std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
    int obs_size() const { return static_cast<int>(values_.cols()); }
    const std::vector<int>& shape() const { return shape_; }
    const RowMatrix& values() const { return values_; }

    std::span<const double> row(std::size_t i) const {
        return {values_.row(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(values_.cols())};
    }

    DataView view() const;
    // contiguous split into [0, n1) and [n1, n)
    std::pair<DataView, DataView> split(std::size_t n1) const;

    nlohmann::json to_json() const;
    static Dataset from_json(const nlohmann::json& j);

private:
    std::vector<int> shape_;
    RowMatrix values_;
};

// Non-owning contiguous range over a Dataset, with at most one skipped
// index so leave-one-out refits can reuse the parent's storage.
class DataView {
public:
    DataView(const Dataset& data, std::size_t begin, std::size_t end, std::ptrdiff_t skip = -1);

    std::size_t size() const { return size_; }
    int obs_size() const { return data_->obs_size(); }
    const Dataset& dataset() const { return *data_; }

    // k-th included observation
    std::span<const double> row(std::size_t k) const {
        return data_->row(absolute_index(k));
    }
    std::size_t absolute_index(std::size_t k) const {
        std::size_t i = begin_ + k;
        if (skip_ >= 0 && i >= static_cast<std::size_t>(skip_)) ++i;
        return i;
    }

    // view over the same range with the k-th included observation removed
    DataView excluding(std::size_t k) const;

private:
    const Dataset* data_;
    std::size_t begin_;
    std::size_t end_;       // one past the last candidate index
    std::ptrdiff_t skip_;   // absolute index, -1 for none
    std::size_t size_;
};

}  // namespace bayeseval
