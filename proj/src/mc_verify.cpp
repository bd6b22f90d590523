#include "hjblab/mc_verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "hjblab/errors.hpp"
#include "hjblab/rng.hpp"

namespace hjb {

namespace {

using PolicyFn = std::function<void(double t, const std::vector<double>& x, double* alpha)>;

void check_sim_config(const SimulationConfig& cfg, int d) {
    if (cfg.n_paths < 1)
        throw std::invalid_argument("simulate_cost: n_paths must be >= 1");
    if (!(cfg.dt_sim > 0.0) || !std::isfinite(cfg.dt_sim))
        throw std::invalid_argument("simulate_cost: dt_sim must be positive");
    if (cfg.antithetic && cfg.n_paths % 2 != 0)
        throw std::invalid_argument("simulate_cost: antithetic pairing needs an even n_paths");
    for (const std::vector<double>& b : cfg.baselines)
        if (static_cast<int>(b.size()) != d)
            throw std::invalid_argument(
                "simulate_cost: baseline control dimension does not match the problem");
}

struct PathAccumulator {
    double cost = 0.0;
    bool exited = false;
};

/// One Euler path (or half of an antithetic pair when negate=true, sharing
/// the caller's draws).
class PathState {
  public:
    PathState(int d, const std::vector<double>& x0) : x_(x0), b1_(d), b2_(d), alpha_(d),
                                                      sigma_(static_cast<std::size_t>(d) * d) {}

    std::vector<double> x_;
    std::vector<double> b1_, b2_, alpha_;
    std::vector<double> sigma_;
    PathAccumulator acc_;
};

struct SimProblem {
    const HJBProblem* p;
    const PolicyFn* policy;
    const Grid* box;  // null for constant policies
};

void euler_step(const SimProblem& sp, PathState& ps, double s, double dt, double discount,
                const double* xi, double sign, long long path_index, long long step) {
    const HJBProblem& p = *sp.p;
    const int d = p.dimension;
    (*sp.policy)(s, ps.x_, ps.alpha_.data());
    p.b1(s, ps.x_.data(), ps.alpha_.data(), ps.b1_.data());
    p.b2(s, ps.x_.data(), ps.b2_.data());
    p.sigma(s, ps.x_.data(), ps.sigma_.data());
    ps.acc_.cost +=
        discount * (p.f1(s, ps.x_.data(), ps.alpha_.data()) + p.f2(s, ps.x_.data())) * dt;
    const double sq = std::sqrt(dt);
    for (int i = 0; i < d; ++i) {
        double noise = 0.0;
        for (int j = 0; j < d; ++j) noise += ps.sigma_[i * d + j] * xi[j];
        ps.x_[i] += (ps.b1_[i] + ps.b2_[i]) * dt + sq * sign * noise;
        if (!std::isfinite(ps.x_[i])) {
            std::ostringstream os;
            os << "simulate_cost: state became nonfinite on path " << path_index << " at step "
               << step << " (s = " << s << ")";
            throw SolverError(os.str(), {});
        }
    }
    if (sp.box != nullptr && !ps.acc_.exited) {
        for (int i = 0; i < d; ++i) {
            if (std::fabs(ps.x_[i] - sp.box->center[i]) > sp.box->R_x) {
                ps.acc_.exited = true;
                break;
            }
        }
    }
}

CostEstimate run_simulation(const HJBProblem& p, const PolicyFn& policy, const Grid* box,
                            double t0, const std::vector<double>& x0,
                            const SimulationConfig& cfg) {
    const int d = p.dimension;
    if (static_cast<int>(x0.size()) != d)
        throw std::invalid_argument("simulate_cost: x0 dimension does not match the problem");
    check_sim_config(cfg, d);
    if (!(t0 >= 0.0) || t0 > p.horizon * (1.0 + 1e-12))
        throw std::invalid_argument("simulate_cost: t0 must lie in [0, horizon]");
    if (box != nullptr && cfg.dt_sim > box->dt() * (1.0 + 1e-12))
        throw std::invalid_argument(
            "simulate_cost: dt_sim must not be coarser than the grid time step");

    const double span = std::max(0.0, p.horizon - t0);
    const long long n_steps =
        span > 0.0 ? std::max<long long>(1, std::llround(span / cfg.dt_sim)) : 0;
    const double dt = n_steps > 0 ? span / static_cast<double>(n_steps) : 0.0;

    const long long n_samples = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
    std::vector<double> samples(static_cast<std::size_t>(n_samples));
    long long exit_count = 0;
    std::vector<double> xi(d);

    for (long long s_idx = 0; s_idx < n_samples; ++s_idx) {
        const long long path_index = cfg.antithetic ? 2 * s_idx : s_idx;
        SplitMix64 rng = SplitMix64::for_path(cfg.seed, static_cast<std::uint64_t>(path_index));
        PathState a(d, x0);
        PathState b(d, x0);
        SimProblem sp{&p, &policy, box};
        for (long long step = 0; step < n_steps; ++step) {
            const double s = t0 + static_cast<double>(step) * dt;
            const double discount = std::exp(p.discount * (s - t0));
            for (int i = 0; i < d; ++i) xi[i] = rng.next_normal();
            euler_step(sp, a, s, dt, discount, xi.data(), 1.0, path_index, step);
            if (cfg.antithetic)
                euler_step(sp, b, s, dt, discount, xi.data(), -1.0, path_index + 1, step);
        }
        a.acc_.cost += p.g(a.x_.data());
        if (a.acc_.exited) ++exit_count;
        double sample = a.acc_.cost;
        if (cfg.antithetic) {
            b.acc_.cost += p.g(b.x_.data());
            if (b.acc_.exited) ++exit_count;
            sample = 0.5 * (a.acc_.cost + b.acc_.cost);
        }
        if (!std::isfinite(sample)) {
            std::ostringstream os;
            os << "simulate_cost: cost became nonfinite on path " << path_index;
            throw SolverError(os.str(), {});
        }
        samples[static_cast<std::size_t>(s_idx)] = sample;
    }

    CostEstimate est;
    est.n_paths = cfg.n_paths;
    est.t0 = t0;
    est.x0 = x0;
    est.exit_fraction =
        static_cast<double>(exit_count) / static_cast<double>(cfg.n_paths);
    est.mean = pairwise_sum(samples) / static_cast<double>(n_samples);
    if (n_samples > 1) {
        std::vector<double> sq(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const double dev = samples[i] - est.mean;
            sq[i] = dev * dev;
        }
        const double var = pairwise_sum(sq) / static_cast<double>(n_samples - 1);
        est.std_error = std::sqrt(var / static_cast<double>(n_samples));
    }
    return est;
}

}  // namespace

CostEstimate simulate_cost(const HJBProblem& p, const ControlField& policy, double t0,
                           const std::vector<double>& x0, const SimulationConfig& cfg) {
    if (policy.grid.dim() != p.dimension)
        throw std::invalid_argument("simulate_cost: policy grid dimension mismatch");
    const int d = p.dimension;
    if (static_cast<int>(x0.size()) != d)
        throw std::invalid_argument("simulate_cost: x0 dimension does not match the problem");
    for (int i = 0; i < d; ++i)
        if (std::fabs(x0[i] - policy.grid.center[i]) > policy.grid.R_x * (1.0 + 1e-12))
            throw std::invalid_argument(
                "simulate_cost: x0 lies outside the policy interpolation box");
    PolicyFn fn = [&policy](double t, const std::vector<double>& x, double* alpha) {
        interpolate_control(policy, t, x, alpha);
    };
    return run_simulation(p, fn, &policy.grid, t0, x0, cfg);
}

CostEstimate simulate_cost(const HJBProblem& p, const std::vector<double>& constant_policy,
                           double t0, const std::vector<double>& x0,
                           const SimulationConfig& cfg) {
    if (static_cast<int>(constant_policy.size()) != p.dimension)
        throw std::invalid_argument("simulate_cost: constant policy dimension mismatch");
    PolicyFn fn = [&constant_policy](double, const std::vector<double>&, double* alpha) {
        std::copy(constant_policy.begin(), constant_policy.end(), alpha);
    };
    return run_simulation(p, fn, nullptr, t0, x0, cfg);
}

VerificationReport verify_value(const HJBProblem& p, const ValueFunction& u,
                                const ControlField& field,
                                const std::vector<VerifyPoint>& points,
                                const SimulationConfig& cfg) {
    VerificationReport rep;
    rep.all_pass = true;
    for (const VerifyPoint& q : points) {
        PointCheck pc;
        pc.t = q.t;
        pc.x = q.x;
        pc.u_pde = interpolate(u, q.t, q.x);
        const CostEstimate est = simulate_cost(p, field, q.t, q.x, cfg);
        pc.v_mc = est.mean;
        pc.std_error = est.std_error;
        pc.exit_fraction = est.exit_fraction;
        pc.value_match =
            std::fabs(pc.v_mc - pc.u_pde) <= 3.0 * pc.std_error + cfg.allowance;
        pc.pass = pc.value_match;
        for (const std::vector<double>& alpha : cfg.baselines) {
            const CostEstimate base = simulate_cost(p, alpha, q.t, q.x, cfg);
            BaselineCheck bc;
            bc.alpha = alpha;
            bc.mean = base.mean;
            bc.std_error = base.std_error;
            const double combined =
                std::sqrt(est.std_error * est.std_error + base.std_error * base.std_error);
            bc.pass = est.mean <= base.mean + 3.0 * combined;
            pc.pass = pc.pass && bc.pass;
            pc.baselines.push_back(std::move(bc));
        }
        rep.all_pass = rep.all_pass && pc.pass;
        rep.points.push_back(std::move(pc));
    }
    return rep;
}

void write_verification_csv(const VerificationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_verification_csv: cannot open " + path + " for writing");
    const int d = report.points.empty() ? 0 : static_cast<int>(report.points.front().x.size());
    out << "t";
    for (int i = 0; i < d; ++i) out << ",x_" << (i + 1);
    out << ",u_pde,v_mc,stderr,verdict\n";
    for (const PointCheck& pc : report.points) {
        out << format_float(pc.t);
        for (double c : pc.x) out << ',' << format_float(c);
        out << ',' << format_float(pc.u_pde) << ',' << format_float(pc.v_mc) << ','
            << format_float(pc.std_error) << ',' << (pc.pass ? "pass" : "fail") << '\n';
    }
    if (!out) throw DataError("write_verification_csv: write failure on " + path);
}

}  // namespace hjb
