#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dkfair {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
    Usage,      // bad flags or configuration values
    Schema,     // header/schema mismatch, unknown field names
    Parse,      // malformed tokens in an input table
    DuplicateKey,
    Domain,     // inputs outside an operation's domain (empty, non-finite, ...)
    EmptyGroup,
    UndefinedMetric,
    Numeric,    // optimization produced non-finite values
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const;

    /// Appends one row; the first push on an empty 0x0 matrix fixes the width.
    void push_row(std::span<const double> values);

    Matrix select_rows(std::span<const std::size_t> indices) const;
    Matrix select_cols(std::span<const std::size_t> indices) const;

    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

template <typename T>
std::vector<T> gather(std::span<const T> values, std::span<const std::size_t> indices) {
    std::vector<T> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(values[i]);
    return out;
}

}  // namespace dkfair
