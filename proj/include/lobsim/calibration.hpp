#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lobsim/book.hpp"
#include "lobsim/cancellation.hpp"
#include "lobsim/intensity.hpp"
#include "lobsim/placement.hpp"
#include "lobsim/types.hpp"

namespace lobsim {

class CalibrationError : public Error {
public:
    using Error::Error;
};

/// The covariates an intensity can depend on, held constant over one path interval.
struct PathState {
    /// Reference spread in ticks (see MarketState); kUndefinedSpread before
    /// both sides have ever been quoted.
    Tick spread = kUndefinedSpread;
    std::array<Volume, 2> q1{};
    std::array<Volume, 2> q10{};

    static PathState from(const MarketState& s);
    bool defined() const noexcept { return spread >= 1; }
    Volume volume(VolumeCovariate kind, Side side) const noexcept {
        return kind == VolumeCovariate::q1 ? q1[index_of(side)] : q10[index_of(side)];
    }
    bool operator==(const PathState&) const = default;
};

struct PathEvent {
    double time = 0.0;
    EventType type = EventType::limit;
    Side side = Side::bid;  ///< book side affected
    /// Interval holding the covariates just before the event (left limit).
    std::uint32_t interval = 0;
    bool operator==(const PathEvent&) const = default;
};

/// Piecewise-constant covariate path with the event times observed on it.
/// Interval k is [breakpoints[k], breakpoints[k+1]).
class CovariatePath {
public:
    CovariatePath() = default;
    CovariatePath(double t0, const PathState& initial);

    /// Records an event against the current interval, i.e. before any state
    /// change happening at the same timestamp.
    void record_event(double t, EventType type, Side side);
    /// Starts a new interval at t when the state differs from the current one.
    void advance(double t, const PathState& state);
    void close(double t_end);

    bool closed() const noexcept { return closed_; }
    std::size_t interval_count() const noexcept { return states_.size(); }
    double start() const noexcept { return breakpoints_.front(); }
    double end() const noexcept { return breakpoints_.back(); }
    double duration() const noexcept { return end() - start(); }
    double interval_start(std::size_t k) const { return breakpoints_[k]; }
    double interval_end(std::size_t k) const { return breakpoints_[k + 1]; }
    double interval_length(std::size_t k) const { return breakpoints_[k + 1] - breakpoints_[k]; }
    const PathState& state(std::size_t k) const { return states_[k]; }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<PathState>& states() const noexcept { return states_; }
    const std::vector<PathEvent>& events() const noexcept { return events_; }

    bool operator==(const CovariatePath&) const = default;

private:
    void require_open(double t) const;

    std::vector<double> breakpoints_;
    std::vector<PathState> states_;
    std::vector<PathEvent> events_;
    bool closed_ = false;
};

/// Which events form one intensity sample. Sides selected together share the
/// same parameters (bid and ask flows aggregated in one sample).
struct StreamSpec {
    EventType type = EventType::market;
    VolumeCovariate covariate = VolumeCovariate::q1;
    bool bid = true;
    bool ask = true;

    bool includes(Side s) const noexcept { return s == Side::bid ? bid : ask; }
};

/// Sufficient statistics of one (S, v) covariate cell.
struct IntensityCell {
    Tick spread = 1;
    Volume volume = 0;
    double exposure = 0.0;  ///< seconds spent in the cell, summed over sides
    double count = 0.0;     ///< events observed in the cell
};

/// Aggregates a path into cells. Intervals with an undefined spread are skipped.
std::vector<IntensityCell> intensity_cells(const CovariatePath& path, const StreamSpec& stream);

enum class CovariateAxis { spread, volume };

/// rate(c) = N(c) / T(c) for each covariate value c with T(c) > 0.
std::map<Tick, double> empirical_state_intensity(const CovariatePath& path, const StreamSpec& stream,
                                                 CovariateAxis axis);

/// Time-weighted distribution of one covariate over the selected sides.
std::map<Tick, double> covariate_distribution(const CovariatePath& path, const StreamSpec& stream, CovariateAxis axis);

/// sum over events of ln rate(t-) minus the integral of the rate, evaluated
/// interval by interval on the path.
double point_process_loglik(const IntensityParams& params, const CovariatePath& path, const StreamSpec& stream);

/// Same objective on aggregated cells, with analytic derivatives.
double cells_loglik(const Coefficients& beta, std::span<const IntensityCell> cells);
std::array<double, kIntensityDim> cells_loglik_gradient(const Coefficients& beta, std::span<const IntensityCell> cells);

/// Integral of the rate over the path, summed over selected sides.
double compensator(const IntensityParams& params, const CovariatePath& path, const StreamSpec& stream);

/// Compensator increments between consecutive events of one side; unit-rate
/// exponential under a correct model.
std::vector<double> rescaled_interarrivals(const IntensityParams& params, const CovariatePath& path,
                                           EventType type, Side side);

struct FitReport {
    std::vector<std::string> names;
    std::vector<double> estimates;
    std::vector<double> std_errors;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    std::size_t observations = 0;
    std::string message;
};

struct IntensityFitOptions {
    /// Parameters held at their initial value when false.
    std::array<bool, kIntensityDim> free{true, true, true, true, true, true};
    int max_iterations = 200;
    /// Stop once every gradient component is below tolerance * max(1, N).
    double gradient_tolerance = 1e-10;
};

struct IntensityFit {
    IntensityParams params;
    FitReport report;
};

/// Newton ascent with backtracking on the concave log-likelihood. Standard
/// errors come from the inverse observed information (analytic Hessian).
/// Without an initial value, starts from the homogeneous solution.
IntensityFit fit_state_intensity_mle(std::span<const IntensityCell> cells, VolumeCovariate covariate,
                                     const Coefficients* init = nullptr, const IntensityFitOptions& options = {});
IntensityFit fit_state_intensity_mle(const CovariatePath& path, const StreamSpec& stream,
                                     const Coefficients* init = nullptr, const IntensityFitOptions& options = {});

struct PoissonFit {
    double rate = 0.0;
    std::size_t events = 0;
    double duration = 0.0;
    bool degenerate = false;
    std::string message;
};

PoissonFit fit_poisson_rate(std::size_t events, double duration);

/// Averages the intensity over the distribution of the other covariate:
/// axis = spread gives rate(S) = sum_v rate(S, v) P(v), axis = volume the converse.
std::map<Tick, double> marginal_intensity(const IntensityParams& params, CovariateAxis axis,
                                          std::span<const Tick> values, const std::map<Tick, double>& other);

struct EmOptions {
    std::size_t components = 3;
    /// Stop when the mean log-likelihood per observation improves by less.
    double tolerance = 1e-8;
    int max_iterations = 5000;
    int max_restarts = 5;
    double collapse_sigma = 1e-4;
    std::uint64_t seed = 1;
};

struct MixtureFit {
    MixtureParams params;
    FitReport report;
    /// Log-likelihood after every iteration of the successful run.
    std::vector<double> loglik_trace;
    int restarts = 0;
};

MixtureFit fit_mixture_em(std::span<const double> sample, const EmOptions& options = {});

/// Integer placement offsets observed under an admissibility constraint:
/// the offset was drawn from the law conditioned on [lower_bound, upper_bound].
struct BinnedOffset {
    Tick offset = 0;
    Tick lower_bound = kPlacementMinOffset;
    double count = 1.0;
};

/// Grouped-and-truncated EM: cells are [n - 1/2, n + 1/2] and mass outside the
/// admissible range enters as expected unobserved counts.
MixtureFit fit_mixture_em_binned(std::span<const BinnedOffset> data, Tick upper_bound = kPlacementMaxOffset,
                                 const EmOptions& options = {});
double binned_mixture_loglik(const MixtureParams& params, std::span<const BinnedOffset> data,
                             Tick upper_bound = kPlacementMaxOffset);

struct StudentFit {
    StudentParams params;
    FitReport report;
};

inline constexpr double kStudentMinDof = 0.1;

double student_loglik(const StudentParams& params, std::span<const double> sample);
StudentFit fit_student(std::span<const double> sample);

double binned_student_loglik(const StudentParams& params, std::span<const BinnedOffset> data,
                             Tick upper_bound = kPlacementMaxOffset);
StudentFit fit_student_binned(std::span<const BinnedOffset> data, Tick upper_bound = kPlacementMaxOffset);

struct CancellationFit {
    double alpha = -1.0;
    double sigma = 1.0;
    FitReport report;
    /// sigma ran to zero: the sample is indistinguishable from uniform.
    bool boundary = false;
};

CancellationFit fit_cancellation_mle(std::span<const double> xi);

/// Range of drawn indices that would have selected some order at the cancelled
/// price level under the first-index-at-or-above rule.
struct PriorityInterval {
    double lower = 0.0;
    double upper = 1.0;
};

/// sum of ln(F(upper) - F(lower)).
double priority_interval_loglik(double alpha, double sigma, std::span<const PriorityInterval> data);

/// Interval-censored fit: consistent with how the simulator selects victims,
/// where point estimates of the index are biased.
CancellationFit fit_cancellation_interval_mle(std::span<const PriorityInterval> data);

}  // namespace lobsim
