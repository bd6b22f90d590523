#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hjb {

/// Tensor-product space-time mesh over a truncated box.
///
/// Space: the box { |x_i - center_i| <= R_x } sampled with n_x nodes per axis,
/// spacing h = 2 R_x / (n_x - 1); axis node k sits at center_i - R_x + k h
/// (reproducible exactly from the triple (center, R_x, n_x)). Time: n_t steps
/// of dt = T / n_t, so layers l = 0..n_t live at t = l dt and layer n_t is the
/// terminal time. Spatial flattening is lexicographic in the multi-index with
/// the last axis fastest.
struct Grid {
    std::vector<double> center;  // spatial center, size d
    double R_x = 0.0;            // box half-width per axis
    int n_x = 0;                 // nodes per axis
    int n_t = 0;                 // time steps
    double T = 0.0;              // horizon

    int dim() const { return static_cast<int>(center.size()); }
    double h() const { return 2.0 * R_x / (n_x - 1); }
    double dt() const { return T / n_t; }
    double time_at(int layer) const { return layer * dt(); }
    int n_layers() const { return n_t + 1; }

    std::size_t n_nodes() const;

    /// Coordinate of axis node k on axis `axis`.
    double axis_coord(int axis, int k) const { return center[axis] - R_x + k * h(); }

    /// Decode a flat node index into per-axis indices (size d).
    void node_index(std::size_t flat, int* idx) const;

    /// Coordinates of a flat node index (size d).
    std::vector<double> node_coords(std::size_t flat) const;
    void node_coords(std::size_t flat, double* x) const;

    /// Flat index from per-axis indices.
    std::size_t flat_index(const int* idx) const;

    /// Stride of one step along `axis` in flat indexing.
    std::size_t stride(int axis) const;
};

/// Validated grid constructor.
/// Requires n_x >= 3 (central differences need interior nodes), n_t >= 1,
/// R_x > 0, T > 0 and finite center coordinates; throws std::invalid_argument.
Grid build_grid(std::vector<double> center, double R_x, int n_x, int n_t, double T);

/// Grid-sampled scalar field u(t, x): one value per (time layer, node).
struct ValueFunction {
    Grid grid;
    std::vector<double> values;  // layer-major: values[layer * n_nodes + node]

    ValueFunction() = default;
    explicit ValueFunction(const Grid& g)
        : grid(g), values(static_cast<std::size_t>(g.n_layers()) * g.n_nodes(), 0.0) {}

    double at(int layer, std::size_t node) const {
        return values[static_cast<std::size_t>(layer) * grid.n_nodes() + node];
    }
    double& at(int layer, std::size_t node) {
        return values[static_cast<std::size_t>(layer) * grid.n_nodes() + node];
    }
    const double* layer(int l) const { return values.data() + static_cast<std::size_t>(l) * grid.n_nodes(); }
    double* layer(int l) { return values.data() + static_cast<std::size_t>(l) * grid.n_nodes(); }
};

/// Finite-difference spatial gradient of one layer at one node:
/// central differences at interior nodes, one-sided at box-boundary nodes.
/// Exact on fields affine in x. `layer_values` must hold grid.n_nodes() values.
std::vector<double> gradient_of_layer(const Grid& grid, const double* layer_values,
                                      std::size_t node);

/// Gradient of a stored ValueFunction layer; throws std::out_of_range for a
/// bad layer or node index.
std::vector<double> gradient_at(const ValueFunction& u, int layer, std::size_t node);

/// Space-time interpolation: multilinear in space, linear in time.
/// Reproduces nodal values exactly and is exact on affine functions of (t, x).
/// Queries outside the space-time box throw std::domain_error naming the
/// violated bound (tiny roundoff overshoot, 1e-12 relative, is clamped).
double interpolate(const ValueFunction& u, double t, const std::vector<double>& x);

/// Serialize to CSV: header "t,x_1..x_d,u,grad_norm"; rows time-major then
/// lexicographic in the node multi-index; floats at 17 significant digits.
/// (n_t + 1) * n_x^d data rows: every stored layer, terminal included.
void write_value_csv(const ValueFunction& u, const std::string& path);

/// Read a ValueFunction back from the CSV schema written by write_value_csv.
/// The file must match `grid` exactly (column count, row count, node
/// coordinates to 1e-9 relative); any mismatch throws DataError.
/// The grad_norm column is ignored on read (it is derivable).
ValueFunction read_value_csv(const Grid& grid, const std::string& path);

/// Format one double with 17 significant digits (shortest round-trip form
/// used by every CSV writer in this project).
std::string format_float(double v);

}  // namespace hjb
