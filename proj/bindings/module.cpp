#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hjblab/cli.hpp"
#include "hjblab/cole_hopf.hpp"
#include "hjblab/config.hpp"
#include "hjblab/estimates.hpp"
#include "hjblab/matrix_lemmas.hpp"
#include "hjblab/mc_verify.hpp"
#include "hjblab/pde_solver.hpp"
#include "hjblab/problem.hpp"

namespace py = pybind11;

namespace {

hjb::ScalarMode scalar_mode(const std::string& name) {
    if (name == "affine") return hjb::ScalarMode::affine;
    if (name == "norm") return hjb::ScalarMode::norm;
    if (name == "abs_first") return hjb::ScalarMode::abs_first;
    throw std::invalid_argument("scalar mode must be affine, norm, or abs_first");
}

hjb::HJBProblem make_quadratic(int dimension, double horizon, double discount,
                               const std::vector<double>& b2_matrix,
                               const std::vector<double>& b2_offset, double b2_clamp,
                               double sigma_scale, const std::string& sigma_mode,
                               double sigma_clamp, const std::string& f2_mode,
                               double f2_slope, double f2_offset, double f2_clamp,
                               const std::string& g_mode, double g_slope, double g_offset,
                               double g_clamp) {
    hjb::AffineMapSpec b2;
    b2.matrix = b2_matrix;
    b2.offset = b2_offset;
    b2.clamp_radius = b2_clamp;
    hjb::SigmaSpec sigma;
    sigma.scale = sigma_scale;
    if (sigma_mode == "constant")
        sigma.mode = hjb::SigmaMode::constant;
    else if (sigma_mode == "sqrt_growth")
        sigma.mode = hjb::SigmaMode::sqrt_growth;
    else
        throw std::invalid_argument("sigma mode must be constant or sqrt_growth");
    sigma.clamp_radius = sigma_clamp;
    hjb::ScalarSpec f2;
    f2.mode = scalar_mode(f2_mode);
    f2.slope = f2_slope;
    f2.offset = f2_offset;
    f2.clamp_radius = f2_clamp;
    hjb::ScalarSpec g;
    g.mode = scalar_mode(g_mode);
    g.slope = g_slope;
    g.offset = g_offset;
    g.clamp_radius = g_clamp;
    return hjb::quadratic_problem(dimension, horizon, discount, b2, sigma, f2, g);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

PYBIND11_MODULE(hjblab, m) {
    m.doc() = "Finite-horizon HJB laboratory: monotone solver, certificates, "
              "stochastic and transform cross-checks";

    py::register_exception<hjb::ConfigError>(m, "ConfigError");
    py::register_exception<hjb::DataError>(m, "DataError");
    py::register_exception<hjb::SolverError>(m, "SolverError");
    py::register_exception<hjb::TransformError>(m, "TransformError");

    py::class_<hjb::Grid>(m, "Grid")
        .def_readonly("R_x", &hjb::Grid::R_x)
        .def_readonly("n_x", &hjb::Grid::n_x)
        .def_readonly("n_t", &hjb::Grid::n_t)
        .def_readonly("T", &hjb::Grid::T)
        .def_readonly("center", &hjb::Grid::center)
        .def("dim", &hjb::Grid::dim)
        .def("h", &hjb::Grid::h)
        .def("dt", &hjb::Grid::dt)
        .def("n_nodes", &hjb::Grid::n_nodes)
        .def("node_coords", [](const hjb::Grid& g, std::size_t node) {
            std::vector<double> x(g.dim());
            g.node_coords(node, x.data());
            return x;
        });
    m.def(
        "build_grid",
        [](std::vector<double> center, double R_x, int n_x, int n_t, double T) {
            return hjb::build_grid(std::move(center), R_x, n_x, n_t, T);
        },
        py::arg("center"), py::arg("R_x"), py::arg("n_x"), py::arg("n_t"), py::arg("T"));

    py::class_<hjb::ValueFunction>(m, "ValueFunction")
        .def_readonly("grid", &hjb::ValueFunction::grid)
        .def_readonly("values", &hjb::ValueFunction::values)
        .def("at", [](const hjb::ValueFunction& u, int layer, std::size_t node) {
            return u.at(layer, node);
        });
    py::class_<hjb::ControlField>(m, "ControlField")
        .def_readonly("grid", &hjb::ControlField::grid)
        .def_readonly("controls", &hjb::ControlField::controls);

    py::class_<hjb::HJBProblem>(m, "HJBProblem")
        .def_readonly("dimension", &hjb::HJBProblem::dimension)
        .def_readonly("horizon", &hjb::HJBProblem::horizon)
        .def_readonly("discount", &hjb::HJBProblem::discount)
        .def_readonly("quadratic", &hjb::HJBProblem::quadratic);
    m.def("quadratic_problem", &make_quadratic, py::arg("dimension"), py::arg("horizon"),
          py::arg("discount") = 0.0, py::arg("b2_matrix") = std::vector<double>{},
          py::arg("b2_offset") = std::vector<double>{}, py::arg("b2_clamp") = kInf,
          py::arg("sigma_scale") = 1.0, py::arg("sigma_mode") = "constant",
          py::arg("sigma_clamp") = kInf, py::arg("f2_mode") = "affine",
          py::arg("f2_slope") = 0.0, py::arg("f2_offset") = 0.0, py::arg("f2_clamp") = kInf,
          py::arg("g_mode") = "affine", py::arg("g_slope") = 0.0, py::arg("g_offset") = 0.0,
          py::arg("g_clamp") = kInf);

    py::enum_<hjb::TimeStepping>(m, "TimeStepping")
        .value("explicit_monotone", hjb::TimeStepping::explicit_monotone)
        .value("implicit_policy_iteration", hjb::TimeStepping::implicit_policy_iteration);
    py::class_<hjb::SchemeConfig>(m, "SchemeConfig")
        .def(py::init<>())
        .def_readwrite("mode", &hjb::SchemeConfig::mode)
        .def_readwrite("m_alpha", &hjb::SchemeConfig::m_alpha)
        .def_readwrite("tol_policy", &hjb::SchemeConfig::tol_policy)
        .def_readwrite("max_sweeps", &hjb::SchemeConfig::max_sweeps)
        .def_readwrite("tol_linear", &hjb::SchemeConfig::tol_linear)
        .def_readwrite("max_doublings", &hjb::SchemeConfig::max_doublings)
        .def_readwrite("core_fraction", &hjb::SchemeConfig::core_fraction);

    py::class_<hjb::TruncationStage>(m, "TruncationStage")
        .def_readonly("radius", &hjb::TruncationStage::radius)
        .def_readonly("sup_grad_core", &hjb::TruncationStage::sup_grad_core)
        .def_readonly("delta_sup", &hjb::TruncationStage::delta_sup);
    py::class_<hjb::TruncationTrace>(m, "TruncationTrace")
        .def_readonly("stages", &hjb::TruncationTrace::stages)
        .def_readonly("final_radius", &hjb::TruncationTrace::final_radius)
        .def_readonly("converged", &hjb::TruncationTrace::converged);
    py::class_<hjb::SolveResult>(m, "SolveResult")
        .def_readonly("value", &hjb::SolveResult::value)
        .def_readonly("control", &hjb::SolveResult::control);
    py::class_<hjb::EscalationResult>(m, "EscalationResult")
        .def_readonly("value", &hjb::EscalationResult::value)
        .def_readonly("control", &hjb::EscalationResult::control)
        .def_readonly("trace", &hjb::EscalationResult::trace);

    m.def("solve", &hjb::solve, py::arg("problem"), py::arg("grid"), py::arg("radius"),
          py::arg("config") = hjb::SchemeConfig{});
    m.def("solve_with_truncation_escalation", &hjb::solve_with_truncation_escalation,
          py::arg("problem"), py::arg("grid"), py::arg("R_0"), py::arg("tol"),
          py::arg("config") = hjb::SchemeConfig{});
    m.def("interpolate", &hjb::interpolate, py::arg("u"), py::arg("t"), py::arg("x"));

    m.def("sup_gradient", &hjb::sup_gradient, py::arg("u"), py::arg("core_fraction") = 0.6);
    m.def("lipschitz_quotient", &hjb::lipschitz_quotient, py::arg("u"),
          py::arg("n_pairs") = 4000, py::arg("seed") = 2024,
          py::arg("core_fraction") = 0.6);
    m.def("growth_envelope", &hjb::growth_envelope, py::arg("u"));
    m.def("control_norm_certificate", &hjb::control_norm_certificate, py::arg("field"),
          py::arg("u"), py::arg("L_A"));

    py::class_<hjb::CrossCheckReport>(m, "CrossCheckReport")
        .def_readonly("sup_discrepancy", &hjb::CrossCheckReport::sup_discrepancy)
        .def_readonly("mean_discrepancy", &hjb::CrossCheckReport::mean_discrepancy)
        .def_readonly("core_fraction", &hjb::CrossCheckReport::core_fraction)
        .def_readonly("truncation_radius", &hjb::CrossCheckReport::truncation_radius);
    m.def("cross_check", &hjb::cross_check, py::arg("problem"), py::arg("grid"),
          py::arg("config"), py::arg("R_0"), py::arg("tol"));

    py::class_<hjb::SimulationConfig>(m, "SimulationConfig")
        .def(py::init<>())
        .def_readwrite("n_paths", &hjb::SimulationConfig::n_paths)
        .def_readwrite("dt_sim", &hjb::SimulationConfig::dt_sim)
        .def_readwrite("seed", &hjb::SimulationConfig::seed)
        .def_readwrite("antithetic", &hjb::SimulationConfig::antithetic)
        .def_readwrite("allowance", &hjb::SimulationConfig::allowance)
        .def_readwrite("baselines", &hjb::SimulationConfig::baselines);
    py::class_<hjb::CostEstimate>(m, "CostEstimate")
        .def_readonly("mean", &hjb::CostEstimate::mean)
        .def_readonly("std_error", &hjb::CostEstimate::std_error)
        .def_readonly("n_paths", &hjb::CostEstimate::n_paths)
        .def_readonly("exit_fraction", &hjb::CostEstimate::exit_fraction);
    m.def(
        "simulate_cost_feedback",
        [](const hjb::HJBProblem& p, const hjb::ControlField& field, double t0,
           const std::vector<double>& x0, const hjb::SimulationConfig& cfg) {
            return hjb::simulate_cost(p, field, t0, x0, cfg);
        },
        py::arg("problem"), py::arg("policy"), py::arg("t0"), py::arg("x0"),
        py::arg("config"));
    m.def(
        "simulate_cost_constant",
        [](const hjb::HJBProblem& p, const std::vector<double>& alpha, double t0,
           const std::vector<double>& x0, const hjb::SimulationConfig& cfg) {
            return hjb::simulate_cost(p, alpha, t0, x0, cfg);
        },
        py::arg("problem"), py::arg("policy"), py::arg("t0"), py::arg("x0"),
        py::arg("config"));

    m.def(
        "trace_product_bound",
        [](int d, const std::vector<double>& a, const std::vector<double>& b, double m_low,
           double m_high) {
            const hjb::MatrixBoundResult r =
                hjb::trace_product_bound(hjb::SymmetricMatrix::from_rows(d, a),
                                         hjb::SymmetricMatrix::from_rows(d, b), m_low, m_high);
            return py::make_tuple(r.lhs, r.rhs, r.holds);
        },
        py::arg("d"), py::arg("a"), py::arg("b"), py::arg("m"), py::arg("M"),
        "Trace inequality on row-major symmetric matrices; returns (lhs, rhs, holds)");
    m.def(
        "doubling_matrix_bound",
        [](int d, const std::vector<double>& a, const std::vector<double>& x,
           const std::vector<double>& y, double c, double m_low) {
            const hjb::MatrixBoundResult r = hjb::doubling_matrix_bound(
                hjb::SymmetricMatrix::from_rows(d, a), hjb::SymmetricMatrix::from_rows(d, x),
                hjb::SymmetricMatrix::from_rows(d, y), c, m_low);
            return py::make_tuple(r.lhs, r.rhs, r.holds);
        },
        py::arg("d"), py::arg("a"), py::arg("x"), py::arg("y"), py::arg("c"), py::arg("m"),
        "Spectral doubling inequality; returns (lhs, rhs, holds)");

    m.def(
        "run",
        [](const std::string& command, const std::string& config_path,
           const std::string& out_dir, const std::string& u_csv, py::object seed,
           long long lemma_instances) {
            hjb::CliOptions opt;
            opt.command = command;
            opt.config_path = config_path;
            opt.out_dir = out_dir;
            opt.u_csv = u_csv;
            opt.quiet = true;
            opt.lemma_instances = lemma_instances;
            if (!seed.is_none()) {
                opt.has_seed = true;
                opt.seed = seed.cast<std::uint64_t>();
                opt.lemma_seed = opt.seed;
            }
            std::ostringstream log, err;
            const int code = hjb::run_cli(opt, log, err);
            return py::make_tuple(code, err.str());
        },
        py::arg("command"), py::arg("config_path") = "", py::arg("out_dir") = "",
        py::arg("u_csv") = "", py::arg("seed") = py::none(),
        py::arg("lemma_instances") = 10000,
        "Run one batch command; returns (exit_code, diagnostics)");
}
