#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace spgnm {

using numvec = std::vector<double>;

/// Dense row-major rows x cols table of doubles. Rows are states, columns
/// actions everywhere in this library.
class Table {
public:
    Table() = default;
    Table(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Builds from nested rows; throws InvalidInput if rows are ragged.
    Table(std::initializer_list<std::initializer_list<double>> rows);
    static Table from_rows(const std::vector<numvec>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    std::vector<numvec> to_rows() const;

    bool same_shape(const Table& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const noexcept;
    double max_abs() const noexcept;

    friend bool operator==(const Table&, const Table&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    numvec data_;
};

/// Largest absolute entrywise difference; tables must share a shape.
double max_abs_diff(const Table& a, const Table& b);

}  // namespace spgnm
