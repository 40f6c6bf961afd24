#include "lobsim/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lobsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, std::span<const double> x) {
    const double v = f(x);
    return std::isfinite(v) ? v : kNegInf;
}

double step_for(double x) { return 1e-4 * std::max(1.0, std::abs(x)); }

}  // namespace

OptimizeResult nelder_mead_maximize(const Objective& f, std::vector<double> x0, const OptimizeOptions& options) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i)
        simplex[i + 1][i] += options.initial_step * std::max(1.0, std::abs(x0[i]));
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values[i] = safe_eval(f, simplex[i]);

    OptimizeResult result;
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    const auto point = [&](double t, std::vector<double>& out, std::size_t worst) {
        for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
        return safe_eval(f, out);
    };

    int it = 0;
    for (; it < options.max_iterations; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second_worst = order[n - 1];
        if (std::isfinite(values[worst]) &&
            values[best] - values[worst] <= options.f_tolerance * (1.0 + std::abs(values[best]))) {
            result.converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst)
                for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);

        const double fr = point(-1.0, trial, worst);
        if (fr > values[best]) {
            const double fe = point(-2.0, trial2, worst);
            if (fe > fr) {
                simplex[worst] = trial2;
                values[worst] = fe;
            } else {
                simplex[worst] = trial;
                values[worst] = fr;
            }
            continue;
        }
        if (fr > values[second_worst]) {
            simplex[worst] = trial;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr > values[worst];
        const double fc = point(outside ? -0.5 : 0.5, trial2, worst);
        if (fc > std::max(fr, values[worst]) || (!outside && fc > values[worst])) {
            simplex[worst] = trial2;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            values[i] = safe_eval(f, simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    result.iterations = it;
    if (!result.converged) result.message = "simplex iteration cap reached";
    return result;
}

Eigen::VectorXd numeric_gradient(const Objective& f, std::span<const double> x) {
    const std::size_t n = x.size();
    Eigen::VectorXd g(static_cast<Eigen::Index>(n));
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double h = step_for(x[i]);
        y[i] = x[i] + h;
        const double fp = f(y);
        y[i] = x[i] - h;
        const double fm = f(y);
        y[i] = x[i];
        g[static_cast<Eigen::Index>(i)] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, std::span<const double> x) {
    const std::size_t n = x.size();
    Eigen::MatrixXd h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> y(x.begin(), x.end());
    const double f0 = f(x);
    for (std::size_t i = 0; i < n; ++i) {
        const double hi = step_for(x[i]);
        y[i] = x[i] + hi;
        const double fp = f(y);
        y[i] = x[i] - hi;
        const double fm = f(y);
        y[i] = x[i];
        h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = (fp - 2.0 * f0 + fm) / (hi * hi);
        for (std::size_t j = 0; j < i; ++j) {
            const double hj = step_for(x[j]);
            double acc = 0.0;
            for (int si : {1, -1})
                for (int sj : {1, -1}) {
                    y[i] = x[i] + si * hi;
                    y[j] = x[j] + sj * hj;
                    acc += si * sj * f(y);
                }
            y[i] = x[i];
            y[j] = x[j];
            const double v = acc / (4.0 * hi * hj);
            h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    return h;
}

OptimizeResult newton_polish(const Objective& f, std::vector<double> x0, const OptimizeOptions& options) {
    OptimizeResult result;
    result.x = std::move(x0);
    result.value = safe_eval(f, result.x);
    const std::size_t n = result.x.size();
    int it = 0;
    for (; it < options.polish_iterations; ++it) {
        const Eigen::VectorXd g = numeric_gradient(f, result.x);
        const Eigen::MatrixXd h = numeric_hessian(f, result.x);
        Eigen::LDLT<Eigen::MatrixXd> ldlt((-h).eval());
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            step = ldlt.solve(g);
        } else {
            step = g * (1e-3 / std::max(1.0, g.norm()));
        }
        double t = 1.0;
        bool improved = false;
        std::vector<double> y(n);
        for (int k = 0; k < 30; ++k, t *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) y[i] = result.x[i] + t * step[static_cast<Eigen::Index>(i)];
            const double v = safe_eval(f, y);
            if (v > result.value) {
                improved = v - result.value > 1e-14 * (1.0 + std::abs(result.value));
                result.x = y;
                result.value = v;
                break;
            }
        }
        if (!improved) break;
    }
    result.iterations = it;
    result.converged = true;
    return result;
}

OptimizeResult maximize(const Objective& f, std::vector<double> x0, const OptimizeOptions& options) {
    OptimizeResult nm = nelder_mead_maximize(f, std::move(x0), options);
    if (!std::isfinite(nm.value)) return nm;
    OptimizeResult polished = newton_polish(f, nm.x, options);
    polished.iterations += nm.iterations;
    polished.converged = nm.converged;
    polished.message = nm.message;
    return polished;
}

std::vector<double> std_errors_from_hessian(const Eigen::MatrixXd& hessian) {
    const auto n = hessian.rows();
    std::vector<double> se(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    const Eigen::MatrixXd info = -hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return se;
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
    for (Eigen::Index i = 0; i < n; ++i)
        if (cov(i, i) > 0.0) se[static_cast<std::size_t>(i)] = std::sqrt(cov(i, i));
    return se;
}

}  // namespace lobsim
