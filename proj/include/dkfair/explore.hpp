#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkfair/common.hpp"

namespace dkfair {

/// Sample Pearson product-moment correlation. Throws UndefinedMetric when
/// either column has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationMatrix {
    std::vector<std::string> names;
    /// Row-major; nullopt marks a pair left undefined by a zero-variance column.
    std::vector<std::optional<double>> r;

    std::size_t size() const noexcept { return names.size(); }
    std::optional<double> at(std::size_t i, std::size_t j) const { return r[i * names.size() + j]; }
    std::optional<double> at(std::string_view a, std::string_view b) const;
};

struct NamedColumn {
    std::string name;
    std::vector<double> values;
};

CorrelationMatrix correlation_matrix(std::span<const NamedColumn> columns);

struct GroupDensity {
    std::string label;
    std::size_t size = 0;
    std::vector<std::size_t> counts;  // histogram, one per bin
    std::vector<double> smoothed;     // empty when smoothing is unavailable
    std::optional<double> bandwidth;
    std::string note;                 // why smoothing is unavailable, if it is
};

struct Density1D {
    std::vector<double> bin_edges;    // bins + 1 edges over the pooled range
    std::vector<double> grid;         // evaluation points of the smoothed curves
    std::vector<GroupDensity> groups; // index 0 = "Low", 1 = "High"
};

/// Per-group histograms on shared equal-width bins (half-open, last bin
/// closed) plus Gaussian KDE curves with Silverman bandwidths. The KDE grid
/// spans the pooled range padded by four of the widest bandwidth.
Density1D density_1d(std::span<const double> values, std::span<const int> groups, std::size_t bins = 30,
                     std::size_t grid_points = 512);

double silverman_bandwidth(std::span<const double> values);

struct Density2D {
    std::vector<double> x_edges;
    std::vector<double> y_edges;
    std::size_t gx = 0, gy = 0;
    std::vector<std::size_t> counts;  // row-major, index = iy * gx + ix
    std::size_t at(std::size_t ix, std::size_t iy) const { return counts[iy * gx + ix]; }
};

/// Cell counts over the bounding box. An axis with no spread collapses to a
/// single cell along that axis.
Density2D density_2d(std::span<const double> x, std::span<const double> y, std::size_t gx = 50, std::size_t gy = 50);

std::string correlation_csv(const CorrelationMatrix& m);
std::string density_1d_csv(const Density1D& d);
std::string density_2d_csv(const Density2D& d);

std::string histogram_svg(const Density1D& d, const std::string& title);
std::string smoothed_svg(const Density1D& d, const std::string& title);
std::string density_2d_svg(const Density2D& d, const std::string& title);

}  // namespace dkfair
