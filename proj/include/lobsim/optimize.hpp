#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lobsim {

using Objective = std::function<double(std::span<const double>)>;

struct OptimizeOptions {
    int max_iterations = 4000;
    /// Simplex stops when the spread of objective values falls below this.
    double f_tolerance = 1e-11;
    double initial_step = 0.25;
    int polish_iterations = 40;
};

struct OptimizeResult {
    std::vector<double> x;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
    std::string message;
};

/// Derivative-free maximization. Non-finite objective values count as -inf.
OptimizeResult nelder_mead_maximize(const Objective& f, std::vector<double> x0, const OptimizeOptions& options = {});

/// Newton iterations on central-difference derivatives, accepting only steps
/// that increase f. Meant to sharpen a simplex result.
OptimizeResult newton_polish(const Objective& f, std::vector<double> x0, const OptimizeOptions& options = {});

/// Simplex search followed by newton_polish.
OptimizeResult maximize(const Objective& f, std::vector<double> x0, const OptimizeOptions& options = {});

Eigen::VectorXd numeric_gradient(const Objective& f, std::span<const double> x);
Eigen::MatrixXd numeric_hessian(const Objective& f, std::span<const double> x);

/// sqrt(diag((-H)^-1)); infinity for directions where -H is not positive definite.
std::vector<double> std_errors_from_hessian(const Eigen::MatrixXd& hessian);

}  // namespace lobsim
