#include "spgnm/table.hpp"

#include <algorithm>
#include <cmath>

#include "spgnm/error.hpp"

namespace spgnm {

Table::Table(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw InvalidInput("ragged table rows");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Table Table::from_rows(const std::vector<numvec>& rows) {
    Table t(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != t.cols_) throw InvalidInput("ragged table rows");
        std::copy(rows[r].begin(), rows[r].end(), t.row(r).begin());
    }
    return t;
}

std::vector<numvec> Table::to_rows() const {
    std::vector<numvec> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r].assign(row(r).begin(), row(r).end());
    return out;
}

bool Table::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Table::max_abs() const noexcept {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

double max_abs_diff(const Table& a, const Table& b) {
    if (!a.same_shape(b)) throw InvalidInput("max_abs_diff: shape mismatch");
    double m = 0.0;
    auto fa = a.flat();
    auto fb = b.flat();
    for (std::size_t i = 0; i < fa.size(); ++i) m = std::max(m, std::abs(fa[i] - fb[i]));
    return m;
}

}  // namespace spgnm
