#include "hjblab/grid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hjblab/errors.hpp"

namespace hjb {

std::size_t Grid::n_nodes() const {
    std::size_t n = 1;
    for (int i = 0; i < dim(); ++i) n *= static_cast<std::size_t>(n_x);
    return n;
}

void Grid::node_index(std::size_t flat, int* idx) const {
    const int d = dim();
    for (int axis = d - 1; axis >= 0; --axis) {
        idx[axis] = static_cast<int>(flat % static_cast<std::size_t>(n_x));
        flat /= static_cast<std::size_t>(n_x);
    }
}

std::vector<double> Grid::node_coords(std::size_t flat) const {
    std::vector<double> x(dim());
    node_coords(flat, x.data());
    return x;
}

void Grid::node_coords(std::size_t flat, double* x) const {
    const int d = dim();
    for (int axis = d - 1; axis >= 0; --axis) {
        const int k = static_cast<int>(flat % static_cast<std::size_t>(n_x));
        flat /= static_cast<std::size_t>(n_x);
        x[axis] = axis_coord(axis, k);
    }
}

std::size_t Grid::flat_index(const int* idx) const {
    std::size_t flat = 0;
    for (int axis = 0; axis < dim(); ++axis) {
        flat = flat * static_cast<std::size_t>(n_x) + static_cast<std::size_t>(idx[axis]);
    }
    return flat;
}

std::size_t Grid::stride(int axis) const {
    std::size_t s = 1;
    for (int a = dim() - 1; a > axis; --a) s *= static_cast<std::size_t>(n_x);
    return s;
}

Grid build_grid(std::vector<double> center, double R_x, int n_x, int n_t, double T) {
    if (center.empty()) throw std::invalid_argument("build_grid: dimension must be >= 1");
    for (double c : center) {
        if (!std::isfinite(c)) throw std::invalid_argument("build_grid: center must be finite");
    }
    if (!(R_x > 0.0) || !std::isfinite(R_x))
        throw std::invalid_argument("build_grid: R_x must be positive and finite");
    if (n_x < 3) throw std::invalid_argument("build_grid: n_x must be >= 3");
    if (n_t < 1) throw std::invalid_argument("build_grid: n_t must be >= 1");
    if (!(T > 0.0) || !std::isfinite(T))
        throw std::invalid_argument("build_grid: T must be positive and finite");
    Grid g;
    g.center = std::move(center);
    g.R_x = R_x;
    g.n_x = n_x;
    g.n_t = n_t;
    g.T = T;
    return g;
}

std::vector<double> gradient_of_layer(const Grid& grid, const double* layer_values,
                                      std::size_t node) {
    const int d = grid.dim();
    const double h = grid.h();
    std::vector<int> idx(d);
    grid.node_index(node, idx.data());
    std::vector<double> grad(d);
    for (int axis = 0; axis < d; ++axis) {
        const std::size_t s = grid.stride(axis);
        const int k = idx[axis];
        if (k == 0) {
            grad[axis] = (layer_values[node + s] - layer_values[node]) / h;
        } else if (k == grid.n_x - 1) {
            grad[axis] = (layer_values[node] - layer_values[node - s]) / h;
        } else {
            grad[axis] = (layer_values[node + s] - layer_values[node - s]) / (2.0 * h);
        }
    }
    return grad;
}

std::vector<double> gradient_at(const ValueFunction& u, int layer, std::size_t node) {
    if (layer < 0 || layer >= u.grid.n_layers())
        throw std::out_of_range("gradient_at: layer index out of range");
    if (node >= u.grid.n_nodes())
        throw std::out_of_range("gradient_at: node index out of range");
    return gradient_of_layer(u.grid, u.layer(layer), node);
}

namespace {

/// Locate `q` on the axis lattice {lo + k h}: cell index and barycentric
/// weight, with roundoff-tolerant clamping at both ends.
void locate(double q, double lo, double h, int n, double span, const char* what,
            int* cell, double* w) {
    const double tol = 1e-12 * std::max(1.0, std::fabs(lo) + span);
    if (q < lo - tol || q > lo + span + tol) {
        std::ostringstream os;
        os << "interpolate: " << what << " = " << q << " outside [" << lo << ", "
           << lo + span << "]";
        throw std::domain_error(os.str());
    }
    double s = (q - lo) / h;
    if (s < 0.0) s = 0.0;
    const double s_max = static_cast<double>(n - 1);
    if (s > s_max) s = s_max;
    int c = static_cast<int>(s);
    if (c > n - 2) c = n - 2;
    *cell = c;
    *w = s - static_cast<double>(c);
}

}  // namespace

double interpolate(const ValueFunction& u, double t, const std::vector<double>& x) {
    const Grid& g = u.grid;
    const int d = g.dim();
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("interpolate: query dimension mismatch");

    int t_cell;
    double t_w;
    locate(t, 0.0, g.dt(), g.n_layers(), g.T, "t", &t_cell, &t_w);

    std::vector<int> cell(d);
    std::vector<double> w(d);
    for (int axis = 0; axis < d; ++axis) {
        std::ostringstream name;
        name << "x_" << (axis + 1);
        locate(x[axis], g.center[axis] - g.R_x, g.h(), g.n_x, 2.0 * g.R_x,
               name.str().c_str(), &cell[axis], &w[axis]);
    }

    // Multilinear blend over the 2^d spatial cell corners, per time layer.
    const std::size_t corners = std::size_t{1} << d;
    double layer_vals[2] = {0.0, 0.0};
    for (int tl = 0; tl < 2; ++tl) {
        const double* lv = u.layer(t_cell + tl);
        double acc = 0.0;
        for (std::size_t corner = 0; corner < corners; ++corner) {
            double weight = 1.0;
            std::size_t flat = 0;
            for (int axis = 0; axis < d; ++axis) {
                const int bit = static_cast<int>((corner >> (d - 1 - axis)) & 1u);
                weight *= bit ? w[axis] : (1.0 - w[axis]);
                flat = flat * static_cast<std::size_t>(g.n_x) +
                       static_cast<std::size_t>(cell[axis] + bit);
            }
            acc += weight * lv[flat];
        }
        layer_vals[tl] = acc;
    }
    return (1.0 - t_w) * layer_vals[0] + t_w * layer_vals[1];
}

std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

void write_value_csv(const ValueFunction& u, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_value_csv: cannot open " + path + " for writing");
    const Grid& g = u.grid;
    const int d = g.dim();

    out << "t";
    for (int axis = 0; axis < d; ++axis) out << ",x_" << (axis + 1);
    out << ",u,grad_norm\n";

    const std::size_t nn = g.n_nodes();
    std::vector<double> coords(d);
    for (int l = 0; l < g.n_layers(); ++l) {
        const double t = g.time_at(l);
        const double* lv = u.layer(l);
        for (std::size_t node = 0; node < nn; ++node) {
            g.node_coords(node, coords.data());
            const std::vector<double> grad = gradient_of_layer(g, lv, node);
            double norm_sq = 0.0;
            for (double gi : grad) norm_sq += gi * gi;
            out << format_float(t);
            for (int axis = 0; axis < d; ++axis) out << ',' << format_float(coords[axis]);
            out << ',' << format_float(lv[node]) << ',' << format_float(std::sqrt(norm_sq))
                << '\n';
        }
    }
    if (!out) throw DataError("write_value_csv: write failure on " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_field(const std::string& s, const std::string& path, std::size_t row) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw DataError("read_value_csv: " + path + " row " + std::to_string(row) +
                        ": cannot parse numeric field '" + s + "'");
    }
}

}  // namespace

ValueFunction read_value_csv(const Grid& grid, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_value_csv: cannot open " + path);
    const int d = grid.dim();

    std::string line;
    if (!std::getline(in, line)) throw DataError("read_value_csv: " + path + " is empty");
    {
        std::string expect = "t";
        for (int axis = 0; axis < d; ++axis) expect += ",x_" + std::to_string(axis + 1);
        expect += ",u,grad_norm";
        const std::vector<std::string> got = split_csv_line(line);
        const std::vector<std::string> want = split_csv_line(expect);
        if (got != want)
            throw DataError("read_value_csv: " + path + ": header '" + line +
                            "' does not match expected '" + expect + "'");
    }

    ValueFunction u(grid);
    const std::size_t nn = grid.n_nodes();
    const std::size_t expect_rows = static_cast<std::size_t>(grid.n_layers()) * nn;
    std::vector<double> coords(d);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= expect_rows)
            throw DataError("read_value_csv: " + path + ": more than " +
                            std::to_string(expect_rows) + " data rows");
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != static_cast<std::size_t>(d) + 3)
            throw DataError("read_value_csv: " + path + " row " + std::to_string(row + 1) +
                            ": expected " + std::to_string(d + 3) + " fields, got " +
                            std::to_string(fields.size()));
        const int l = static_cast<int>(row / nn);
        const std::size_t node = row % nn;
        const double t = parse_field(fields[0], path, row + 1);
        grid.node_coords(node, coords.data());
        const double scale_t = std::max(1.0, grid.T);
        if (std::fabs(t - grid.time_at(l)) > 1e-9 * scale_t)
            throw DataError("read_value_csv: " + path + " row " + std::to_string(row + 1) +
                            ": time " + format_float(t) + " does not match grid layer time " +
                            format_float(grid.time_at(l)));
        for (int axis = 0; axis < d; ++axis) {
            const double x = parse_field(fields[axis + 1], path, row + 1);
            const double scale_x = std::max(1.0, std::fabs(grid.center[axis]) + grid.R_x);
            if (std::fabs(x - coords[axis]) > 1e-9 * scale_x)
                throw DataError("read_value_csv: " + path + " row " + std::to_string(row + 1) +
                                ": x_" + std::to_string(axis + 1) + " = " + format_float(x) +
                                " does not match grid node coordinate " +
                                format_float(coords[axis]));
        }
        u.at(l, node) = parse_field(fields[d + 1], path, row + 1);
        ++row;
    }
    if (row != expect_rows)
        throw DataError("read_value_csv: " + path + ": expected " + std::to_string(expect_rows) +
                        " data rows, got " + std::to_string(row));
    return u;
}

}  // namespace hjb
