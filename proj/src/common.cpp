#include "dkfair/common.hpp"

namespace dkfair {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::DuplicateKey: return "duplicate-key";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::EmptyGroup: return "empty-group";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void Matrix::push_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) {
        throw Error(ErrorKind::Domain, "row width " + std::to_string(values.size()) +
                                           " does not match matrix width " + std::to_string(cols_));
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix Matrix::select_cols(std::span<const std::size_t> indices) const {
    Matrix out(rows_, indices.size());
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t j = 0; j < indices.size(); ++j) out(r, j) = (*this)(r, indices[j]);
    return out;
}

}  // namespace dkfair
