#include "dkfair/explore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "dkfair/common.hpp"
#include "dkfair/preprocess.hpp"

namespace dkfair {
namespace {

struct Range {
    double lo, hi;
};

Range pooled_range(std::span<const double> v) {
    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    Range r{*mn, *mx};
    if (r.hi == r.lo) {
        r.lo -= 0.5;
        r.hi += 0.5;
    }
    return r;
}

std::size_t bin_of(double v, const Range& r, std::size_t bins) {
    if (v >= r.hi) return bins - 1;
    const double pos = (v - r.lo) / (r.hi - r.lo) * static_cast<double>(bins);
    return std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, std::floor(pos))));
}

std::vector<double> edges(const Range& r, std::size_t bins) {
    std::vector<double> e(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        e[i] = r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(bins);
    e.back() = r.hi;
    return e;
}

double sample_sd(std::span<const double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

const char* kGroupColors[] = {"#1f77b4", "#d62728"};

std::string svg_open(const std::string& title) {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n"
        "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n"
        "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n"
        "<line x1=\"50\" y1=\"360\" x2=\"620\" y2=\"360\" stroke=\"black\"/>\n"
        "<line x1=\"50\" y1=\"40\" x2=\"50\" y2=\"360\" stroke=\"black\"/>\n",
        title);
}

std::string axis_labels(double xlo, double xhi, double ymax) {
    return fmt::format(
        "<text x=\"50\" y=\"378\" font-family=\"sans-serif\" font-size=\"11\">{:.4g}</text>\n"
        "<text x=\"620\" y=\"378\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.4g}</text>\n"
        "<text x=\"45\" y=\"44\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.4g}</text>\n",
        xlo, xhi, ymax);
}

std::string legend(const Density1D& d) {
    std::string out;
    for (std::size_t g = 0; g < d.groups.size(); ++g) {
        out += fmt::format(
            "<rect x=\"520\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>"
            "<text x=\"538\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{} (n={})</text>\n",
            40 + 18 * g, kGroupColors[g % 2], 50 + 18 * g, d.groups[g].label, d.groups[g].size);
    }
    return out;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorKind::Domain, "pearson: columns differ in length");
    if (x.size() < 2) throw Error(ErrorKind::Domain, "pearson: need at least two observations");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw Error(ErrorKind::UndefinedMetric, "pearson: zero variance, correlation undefined");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> CorrelationMatrix::at(std::string_view a, std::string_view b) const {
    auto ia = std::find(names.begin(), names.end(), a);
    auto ib = std::find(names.begin(), names.end(), b);
    if (ia == names.end() || ib == names.end())
        throw Error(ErrorKind::Schema, fmt::format("correlation matrix has no column '{}'", ia == names.end() ? a : b));
    return at(static_cast<std::size_t>(ia - names.begin()), static_cast<std::size_t>(ib - names.begin()));
}

CorrelationMatrix correlation_matrix(std::span<const NamedColumn> columns) {
    CorrelationMatrix m;
    const std::size_t k = columns.size();
    for (const auto& c : columns) m.names.push_back(c.name);
    m.r.assign(k * k, std::nullopt);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            std::optional<double> v;
            try {
                v = i == j ? (pearson(columns[i].values, columns[i].values), 1.0)
                           : pearson(columns[i].values, columns[j].values);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::UndefinedMetric) throw;
            }
            m.r[i * k + j] = v;
            m.r[j * k + i] = v;
        }
    }
    return m;
}

double silverman_bandwidth(std::span<const double> values) {
    if (values.size() < 2) throw Error(ErrorKind::Domain, "bandwidth needs at least two points");
    const double sd = sample_sd(values);
    const double iqr = percentile(values, 75.0) - percentile(values, 25.0);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
}

Density1D density_1d(std::span<const double> values, std::span<const int> groups, std::size_t bins,
                     std::size_t grid_points) {
    if (values.size() != groups.size()) throw Error(ErrorKind::Domain, "density_1d: values and groups differ in length");
    if (values.empty()) throw Error(ErrorKind::Domain, "density_1d: no values");
    if (bins == 0 || grid_points < 2) throw Error(ErrorKind::Usage, "density_1d: need bins >= 1 and grid_points >= 2");
    for (double v : values)
        if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "density_1d: non-finite value");

    const Range range = pooled_range(values);
    Density1D out;
    out.bin_edges = edges(range, bins);

    std::vector<double> members[2];
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (groups[i] != 0 && groups[i] != 1) throw Error(ErrorKind::Domain, "density_1d: groups must be 0 or 1");
        members[groups[i]].push_back(values[i]);
    }

    double widest = 0.0;
    for (int g = 0; g < 2; ++g) {
        GroupDensity gd;
        gd.label = g == 0 ? "Low" : "High";
        gd.size = members[g].size();
        gd.counts.assign(bins, 0);
        for (double v : members[g]) ++gd.counts[bin_of(v, range, bins)];
        if (members[g].size() < 2) {
            gd.note = fmt::format("smoothing unavailable: group has {} point(s)", members[g].size());
        } else {
            const double h = silverman_bandwidth(members[g]);
            if (h > 0.0) {
                gd.bandwidth = h;
                widest = std::max(widest, h);
            } else {
                gd.note = "smoothing unavailable: group has no spread";
            }
        }
        out.groups.push_back(std::move(gd));
    }

    const double lo = range.lo - 4.0 * widest, hi = range.hi + 4.0 * widest;
    out.grid.resize(grid_points);
    for (std::size_t k = 0; k < grid_points; ++k)
        out.grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid_points - 1);

    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (int g = 0; g < 2; ++g) {
        auto& gd = out.groups[g];
        if (!gd.bandwidth) continue;
        const double h = *gd.bandwidth;
        const double scale = norm / (h * static_cast<double>(members[g].size()));
        gd.smoothed.assign(grid_points, 0.0);
        for (std::size_t k = 0; k < grid_points; ++k) {
            double s = 0.0;
            for (double v : members[g]) {
                const double u = (out.grid[k] - v) / h;
                s += std::exp(-0.5 * u * u);
            }
            gd.smoothed[k] = s * scale;
        }
    }
    return out;
}

Density2D density_2d(std::span<const double> x, std::span<const double> y, std::size_t gx, std::size_t gy) {
    if (x.size() != y.size()) throw Error(ErrorKind::Domain, "density_2d: x and y differ in length");
    if (x.empty()) throw Error(ErrorKind::Domain, "density_2d: no points");
    if (gx == 0 || gy == 0) throw Error(ErrorKind::Usage, "density_2d: grid dimensions must be positive");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error(ErrorKind::Domain, "density_2d: non-finite point");

    auto axis = [](std::span<const double> v, std::size_t& cells, std::vector<double>& e) {
        auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        Range r{*mn, *mx};
        if (r.hi == r.lo) {
            cells = 1;
            e = {r.lo, r.hi};
        } else {
            e = edges(r, cells);
        }
        return r;
    };

    Density2D out;
    out.gx = gx;
    out.gy = gy;
    const Range rx = axis(x, out.gx, out.x_edges);
    const Range ry = axis(y, out.gy, out.y_edges);
    out.counts.assign(out.gx * out.gy, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t ix = out.gx == 1 ? 0 : bin_of(x[i], rx, out.gx);
        const std::size_t iy = out.gy == 1 ? 0 : bin_of(y[i], ry, out.gy);
        ++out.counts[iy * out.gx + ix];
    }
    return out;
}

std::string correlation_csv(const CorrelationMatrix& m) {
    std::string out = "variable";
    for (const auto& n : m.names) out += "," + n;
    out += "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        out += m.names[i];
        for (std::size_t j = 0; j < m.size(); ++j) {
            auto v = m.at(i, j);
            out += v ? fmt::format(",{:.6f}", *v) : std::string(",undefined");
        }
        out += "\n";
    }
    return out;
}

std::string density_1d_csv(const Density1D& d) {
    std::string out = "# histogram\nbin_lo,bin_hi";
    for (const auto& g : d.groups) out += ",count_" + g.label;
    out += "\n";
    for (std::size_t b = 0; b + 1 < d.bin_edges.size(); ++b) {
        out += fmt::format("{:.6g},{:.6g}", d.bin_edges[b], d.bin_edges[b + 1]);
        for (const auto& g : d.groups) out += fmt::format(",{}", g.counts[b]);
        out += "\n";
    }
    out += "# smoothed";
    for (const auto& g : d.groups)
        out += g.bandwidth ? fmt::format(" bandwidth_{}={:.6g}", g.label, *g.bandwidth)
                           : fmt::format(" {}: {}", g.label, g.note);
    out += "\nx";
    for (const auto& g : d.groups) out += ",density_" + g.label;
    out += "\n";
    for (std::size_t k = 0; k < d.grid.size(); ++k) {
        out += fmt::format("{:.6g}", d.grid[k]);
        for (const auto& g : d.groups) out += g.smoothed.empty() ? std::string(",") : fmt::format(",{:.6g}", g.smoothed[k]);
        out += "\n";
    }
    return out;
}

std::string density_2d_csv(const Density2D& d) {
    std::string out = "x_lo,x_hi,y_lo,y_hi,count\n";
    for (std::size_t iy = 0; iy < d.gy; ++iy)
        for (std::size_t ix = 0; ix < d.gx; ++ix)
            out += fmt::format("{:.6g},{:.6g},{:.6g},{:.6g},{}\n", d.x_edges[ix], d.x_edges[ix + 1], d.y_edges[iy],
                               d.y_edges[iy + 1], d.at(ix, iy));
    return out;
}

std::string histogram_svg(const Density1D& d, const std::string& title) {
    std::string out = svg_open(title);
    const std::size_t bins = d.bin_edges.size() - 1;
    std::size_t peak = 1;
    for (const auto& g : d.groups)
        for (auto c : g.counts) peak = std::max(peak, c);
    const double slot = 570.0 / static_cast<double>(bins);
    const double bar = slot / static_cast<double>(std::max<std::size_t>(1, d.groups.size()));
    for (std::size_t g = 0; g < d.groups.size(); ++g) {
        for (std::size_t b = 0; b < bins; ++b) {
            const double h = 320.0 * static_cast<double>(d.groups[g].counts[b]) / static_cast<double>(peak);
            out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                               50.0 + slot * static_cast<double>(b) + bar * static_cast<double>(g), 360.0 - h, bar, h,
                               kGroupColors[g % 2]);
        }
    }
    out += axis_labels(d.bin_edges.front(), d.bin_edges.back(), static_cast<double>(peak));
    out += legend(d) + "</svg>\n";
    return out;
}

std::string smoothed_svg(const Density1D& d, const std::string& title) {
    std::string out = svg_open(title);
    double peak = 0.0;
    for (const auto& g : d.groups)
        for (double v : g.smoothed) peak = std::max(peak, v);
    if (peak <= 0.0) peak = 1.0;
    const double x0 = d.grid.front(), x1 = d.grid.back();
    for (std::size_t g = 0; g < d.groups.size(); ++g) {
        if (d.groups[g].smoothed.empty()) continue;
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"", kGroupColors[g % 2]);
        for (std::size_t k = 0; k < d.grid.size(); ++k) {
            const double px = 50.0 + 570.0 * (d.grid[k] - x0) / (x1 - x0);
            const double py = 360.0 - 320.0 * d.groups[g].smoothed[k] / peak;
            out += fmt::format("{}{:.2f},{:.2f}", k ? " " : "", px, py);
        }
        out += "\"/>\n";
    }
    out += axis_labels(x0, x1, peak);
    out += legend(d) + "</svg>\n";
    return out;
}

std::string density_2d_svg(const Density2D& d, const std::string& title) {
    std::string out = svg_open(title);
    std::size_t peak = 1;
    for (auto c : d.counts) peak = std::max(peak, c);
    const double cw = 570.0 / static_cast<double>(d.gx), ch = 320.0 / static_cast<double>(d.gy);
    for (std::size_t iy = 0; iy < d.gy; ++iy) {
        for (std::size_t ix = 0; ix < d.gx; ++ix) {
            const std::size_t c = d.at(ix, iy);
            if (c == 0) continue;
            const double shade = static_cast<double>(c) / static_cast<double>(peak);
            out += fmt::format(
                "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#08306b\" "
                "fill-opacity=\"{:.3f}\"/>\n",
                50.0 + cw * static_cast<double>(ix), 360.0 - ch * static_cast<double>(iy + 1), cw, ch, shade);
        }
    }
    out += axis_labels(d.x_edges.front(), d.x_edges.back(), d.y_edges.back());
    out += "</svg>\n";
    return out;
}

}  // namespace dkfair
