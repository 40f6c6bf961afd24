#include "lobsim/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "lobsim/optimize.hpp"
#include "lobsim/random.hpp"

namespace lobsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxExponent = 700.0;

CovariateVector features(Tick spread, Volume volume) {
    return covariate_vector(static_cast<double>(spread), static_cast<double>(volume));
}

void require_closed(const CovariatePath& path) {
    if (!path.closed()) throw CalibrationError("covariate path must be closed before it is used for estimation");
}

}  // namespace

PathState PathState::from(const MarketState& s) {
    PathState p;
    p.spread = s.reference_spread;
    p.q1 = s.q1;
    p.q10 = s.q10;
    return p;
}

CovariatePath::CovariatePath(double t0, const PathState& initial) : breakpoints_{t0}, states_{initial} {}

void CovariatePath::require_open(double t) const {
    if (breakpoints_.empty()) throw CalibrationError("covariate path has no initial state");
    if (closed_) throw CalibrationError("covariate path is already closed");
    if (!(t >= breakpoints_.back())) {
        std::ostringstream msg;
        msg << "covariate path time " << t << " precedes the current interval start " << breakpoints_.back();
        throw CalibrationError(msg.str());
    }
}

void CovariatePath::record_event(double t, EventType type, Side side) {
    require_open(t);
    if (!events_.empty() && t < events_.back().time) throw CalibrationError("event times must be non-decreasing");
    events_.push_back({t, type, side, static_cast<std::uint32_t>(states_.size() - 1)});
}

void CovariatePath::advance(double t, const PathState& state) {
    require_open(t);
    if (state == states_.back()) return;
    const bool referenced = !events_.empty() && events_.back().interval + 1 == states_.size();
    if (t == breakpoints_.back() && !referenced) {
        // Zero-length interval that no event refers to: overwrite it.
        states_.back() = state;
        if (states_.size() > 1 && states_.back() == states_[states_.size() - 2]) {
            states_.pop_back();
            breakpoints_.pop_back();
        }
        return;
    }
    breakpoints_.push_back(t);
    states_.push_back(state);
}

void CovariatePath::close(double t_end) {
    require_open(t_end);
    if (!events_.empty() && t_end < events_.back().time) throw CalibrationError("path ends before its last event");
    breakpoints_.push_back(t_end);
    closed_ = true;
}

std::vector<IntensityCell> intensity_cells(const CovariatePath& path, const StreamSpec& stream) {
    require_closed(path);
    std::map<std::pair<Tick, Volume>, IntensityCell> cells;
    const auto cell = [&](Tick s, Volume v) -> IntensityCell& {
        auto [it, inserted] = cells.try_emplace({s, v});
        if (inserted) {
            it->second.spread = s;
            it->second.volume = v;
        }
        return it->second;
    };
    for (std::size_t k = 0; k < path.interval_count(); ++k) {
        const PathState& st = path.state(k);
        const double dt = path.interval_length(k);
        if (!st.defined() || dt <= 0.0) continue;
        for (Side s : {Side::bid, Side::ask})
            if (stream.includes(s)) cell(st.spread, st.volume(stream.covariate, s)).exposure += dt;
    }
    for (const PathEvent& e : path.events()) {
        if (e.type != stream.type || !stream.includes(e.side)) continue;
        const PathState& st = path.state(e.interval);
        if (!st.defined()) continue;
        cell(st.spread, st.volume(stream.covariate, e.side)).count += 1.0;
    }
    std::vector<IntensityCell> out;
    out.reserve(cells.size());
    for (auto& [key, c] : cells) out.push_back(c);
    return out;
}

std::map<Tick, double> empirical_state_intensity(const CovariatePath& path, const StreamSpec& stream,
                                                 CovariateAxis axis) {
    for (const PathEvent& e : path.events())
        if (e.interval >= path.interval_count()) throw CalibrationError("event lies outside the covariate path");
    std::map<Tick, std::pair<double, double>> acc;
    for (const IntensityCell& c : intensity_cells(path, stream)) {
        auto& [t, n] = acc[axis == CovariateAxis::spread ? c.spread : c.volume];
        t += c.exposure;
        n += c.count;
    }
    std::map<Tick, double> out;
    for (const auto& [value, tn] : acc)
        if (tn.first > 0.0) out[value] = tn.second / tn.first;
    return out;
}

std::map<Tick, double> covariate_distribution(const CovariatePath& path, const StreamSpec& stream, CovariateAxis axis) {
    std::map<Tick, double> out;
    double total = 0.0;
    for (const IntensityCell& c : intensity_cells(path, stream)) {
        out[axis == CovariateAxis::spread ? c.spread : c.volume] += c.exposure;
        total += c.exposure;
    }
    if (!(total > 0.0)) throw CalibrationError("covariate path has no time with a defined spread");
    for (auto& [v, p] : out) p /= total;
    return out;
}

namespace {

double checked_eta(const Coefficients& beta, const PathState& st, VolumeCovariate kind, Side side, std::size_t k) {
    const double eta = linear_predictor(beta, features(st.spread, st.volume(kind, side)));
    if (!std::isfinite(eta) || eta >= kMaxExponent) {
        std::ostringstream msg;
        msg << "log-likelihood term is not finite on interval " << k << " (S=" << st.spread
            << ", v=" << st.volume(kind, side) << ", exponent " << eta << ")";
        throw CalibrationError(msg.str());
    }
    return eta;
}

}  // namespace

double point_process_loglik(const IntensityParams& params, const CovariatePath& path, const StreamSpec& stream) {
    require_closed(path);
    double ll = 0.0;
    for (const PathEvent& e : path.events()) {
        if (e.type != stream.type || !stream.includes(e.side)) continue;
        const PathState& st = path.state(e.interval);
        if (!st.defined()) continue;
        ll += checked_eta(params.beta, st, params.covariate, e.side, e.interval);
    }
    return ll - compensator(params, path, stream);
}

double compensator(const IntensityParams& params, const CovariatePath& path, const StreamSpec& stream) {
    require_closed(path);
    double total = 0.0;
    for (std::size_t k = 0; k < path.interval_count(); ++k) {
        const PathState& st = path.state(k);
        if (!st.defined()) continue;
        for (Side s : {Side::bid, Side::ask})
            if (stream.includes(s)) total += std::exp(checked_eta(params.beta, st, params.covariate, s, k)) * path.interval_length(k);
    }
    return total;
}

std::vector<double> rescaled_interarrivals(const IntensityParams& params, const CovariatePath& path, EventType type,
                                           Side side) {
    require_closed(path);
    std::vector<double> cumulative(path.interval_count() + 1, 0.0);
    for (std::size_t k = 0; k < path.interval_count(); ++k) {
        const PathState& st = path.state(k);
        const double rate = st.defined() ? std::exp(checked_eta(params.beta, st, params.covariate, side, k)) : 0.0;
        cumulative[k + 1] = cumulative[k] + rate * path.interval_length(k);
    }
    std::vector<double> out;
    double last = -1.0;
    for (const PathEvent& e : path.events()) {
        if (e.type != type || e.side != side) continue;
        const PathState& st = path.state(e.interval);
        const double rate = st.defined() ? std::exp(linear_predictor(params.beta, features(st.spread, st.volume(params.covariate, side)))) : 0.0;
        const double lambda = cumulative[e.interval] + rate * (e.time - path.interval_start(e.interval));
        if (last >= 0.0) out.push_back(lambda - last);
        last = lambda;
    }
    return out;
}

double cells_loglik(const Coefficients& beta, std::span<const IntensityCell> cells) {
    double ll = 0.0;
    for (const IntensityCell& c : cells) {
        const double eta = linear_predictor(beta, features(c.spread, c.volume));
        if (eta >= kMaxExponent) return -kInf;
        ll += c.count * eta - c.exposure * std::exp(eta);
    }
    return ll;
}

std::array<double, kIntensityDim> cells_loglik_gradient(const Coefficients& beta, std::span<const IntensityCell> cells) {
    std::array<double, kIntensityDim> g{};
    for (const IntensityCell& c : cells) {
        const CovariateVector x = features(c.spread, c.volume);
        const double w = c.count - c.exposure * std::exp(linear_predictor(beta, x));
        for (std::size_t i = 0; i < kIntensityDim; ++i) g[i] += w * x[i];
    }
    return g;
}

namespace {

const std::vector<std::string>& intensity_names() {
    static const std::vector<std::string> names{"b0", "b1", "b11", "b2", "b22", "b12"};
    return names;
}

}  // namespace

IntensityFit fit_state_intensity_mle(std::span<const IntensityCell> cells, VolumeCovariate covariate,
                                     const Coefficients* init, const IntensityFitOptions& options) {
    double n_events = 0.0;
    double exposure = 0.0;
    for (const IntensityCell& c : cells) {
        n_events += c.count;
        exposure += c.exposure;
    }
    if (!(n_events >= 1.0)) throw CalibrationError("intensity fit needs at least one event");
    if (!(exposure > 0.0)) throw CalibrationError("intensity fit needs a path of positive duration");

    Coefficients beta{};
    if (init) {
        beta = *init;
    } else {
        beta[0] = std::log(n_events / exposure);
    }

    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < kIntensityDim; ++i)
        if (options.free[i]) free.push_back(i);
    const auto nf = static_cast<Eigen::Index>(free.size());

    Eigen::VectorXd grad(nf);
    Eigen::MatrixXd info(nf, nf);
    std::vector<bool> identified(free.size(), true);
    Eigen::MatrixXd covariance = Eigen::MatrixXd::Zero(nf, nf);
    bool rank_deficient = false;

    const auto derivatives = [&] {
        grad.setZero();
        info.setZero();
        for (const IntensityCell& c : cells) {
            const CovariateVector x = features(c.spread, c.volume);
            const double mu = c.exposure * std::exp(linear_predictor(beta, x));
            for (Eigen::Index a = 0; a < nf; ++a) {
                const double xa = x[free[static_cast<std::size_t>(a)]];
                grad[a] += (c.count - mu) * xa;
                for (Eigen::Index b = 0; b <= a; ++b) info(a, b) += mu * xa * x[free[static_cast<std::size_t>(b)]];
            }
        }
        for (Eigen::Index a = 0; a < nf; ++a)
            for (Eigen::Index b = 0; b < a; ++b) info(b, a) = info(a, b);
        // Pseudo-inverse of the scaled information; directions without
        // information are left where they started.
        Eigen::VectorXd d(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            identified[static_cast<std::size_t>(a)] = info(a, a) > 0.0;
            d[a] = identified[static_cast<std::size_t>(a)] ? 1.0 / std::sqrt(info(a, a)) : 0.0;
        }
        const Eigen::MatrixXd scaled = d.asDiagonal() * info * d.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
        const Eigen::VectorXd& ev = eig.eigenvalues();
        const double cutoff = 1e-12 * std::max(ev.size() ? ev.maxCoeff() : 0.0, 1e-300);
        Eigen::VectorXd inv_ev(nf);
        rank_deficient = false;
        for (Eigen::Index a = 0; a < nf; ++a) {
            inv_ev[a] = ev[a] > cutoff ? 1.0 / ev[a] : 0.0;
            if (ev[a] <= cutoff && identified[static_cast<std::size_t>(a)]) rank_deficient = true;
        }
        covariance = d.asDiagonal() * (eig.eigenvectors() * inv_ev.asDiagonal() * eig.eigenvectors().transpose()) *
                     d.asDiagonal();
    };

    const double grad_tol = options.gradient_tolerance * std::max(1.0, n_events);
    double ll = cells_loglik(beta, cells);
    if (!std::isfinite(ll)) throw CalibrationError("intensity fit: initial coefficients give a non-finite likelihood");
    bool converged = false;
    int it = 0;
    std::string message;
    for (; it < options.max_iterations; ++it) {
        derivatives();
        if (grad.cwiseAbs().maxCoeff() <= grad_tol) {
            converged = true;
            break;
        }
        const Eigen::VectorXd step = covariance * grad;
        double t = 1.0;
        bool moved = false;
        for (int k = 0; k < 60; ++k, t *= 0.5) {
            Coefficients trial = beta;
            for (Eigen::Index a = 0; a < nf; ++a) trial[free[static_cast<std::size_t>(a)]] += t * step[a];
            const double v = cells_loglik(trial, cells);
            if (std::isfinite(v) && v >= ll) {
                moved = v > ll || t == 1.0;
                beta = trial;
                ll = v;
                break;
            }
        }
        if (!moved) {
            derivatives();
            converged = grad.cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, n_events);
            if (!converged) message = "line search stalled before the gradient vanished";
            break;
        }
    }
    if (!converged && message.empty()) message = "iteration cap reached";
    if (rank_deficient) message += (message.empty() ? "" : "; ") + std::string("information matrix is rank deficient");

    IntensityFit fit;
    fit.params = {beta, covariate};
    fit.report.names = intensity_names();
    fit.report.estimates.assign(beta.begin(), beta.end());
    fit.report.std_errors.assign(kIntensityDim, kInf);
    if (converged)
        for (Eigen::Index a = 0; a < nf; ++a)
            if (identified[static_cast<std::size_t>(a)] && covariance(a, a) > 0.0)
                fit.report.std_errors[free[static_cast<std::size_t>(a)]] = std::sqrt(covariance(a, a));
    fit.report.loglik = ll;
    fit.report.converged = converged;
    fit.report.iterations = it;
    fit.report.observations = static_cast<std::size_t>(n_events);
    fit.report.message = message;
    return fit;
}

IntensityFit fit_state_intensity_mle(const CovariatePath& path, const StreamSpec& stream, const Coefficients* init,
                                     const IntensityFitOptions& options) {
    const std::vector<IntensityCell> cells = intensity_cells(path, stream);
    return fit_state_intensity_mle(cells, stream.covariate, init, options);
}

PoissonFit fit_poisson_rate(std::size_t events, double duration) {
    if (!(duration > 0.0)) throw CalibrationError("Poisson rate fit needs a positive duration");
    PoissonFit fit;
    fit.events = events;
    fit.duration = duration;
    fit.rate = static_cast<double>(events) / duration;
    if (events == 0) {
        fit.degenerate = true;
        fit.message = "no events observed: the fitted rate is zero";
    }
    return fit;
}

std::map<Tick, double> marginal_intensity(const IntensityParams& params, CovariateAxis axis,
                                          std::span<const Tick> values, const std::map<Tick, double>& other) {
    double total = 0.0;
    for (const auto& [v, p] : other) {
        if (!(p >= 0.0)) throw CalibrationError("marginal_intensity: negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw CalibrationError("marginal_intensity: distribution must sum to 1");
    std::map<Tick, double> out;
    for (Tick x : values) {
        double sum = 0.0;
        for (const auto& [y, p] : other) {
            const double s = static_cast<double>(axis == CovariateAxis::spread ? x : y);
            const double v = static_cast<double>(axis == CovariateAxis::spread ? y : x);
            sum += eval_state_intensity(params, s, v) * p;
        }
        out[x] = sum;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian mixtures

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - kLogSqrt2Pi - std::log(sigma);
}

double std_phi(double z) { return std::isinf(z) ? 0.0 : std::exp(-0.5 * z * z - kLogSqrt2Pi); }

// P(a < Z < b) for a standard normal, on the tail that keeps precision.
double std_mass(double a, double b) {
    if (a > 0.0) return 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
    return 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
}

double log_std_mass(double a, double b) {
    const double m = std_mass(a, b);
    if (m > 1e-290) return std::log(m);
    // Far tail: density at the nearest endpoint times an effective width.
    const double z = b < 0.0 ? b : a;
    const double width = b - a;
    return -0.5 * z * z - kLogSqrt2Pi - std::log(std::max(std::abs(z), 1.0 / width));
}

struct TruncatedMoments {
    double log_mass;
    double mean;
    double var;
};

// Mass, mean and variance of N(mu, sigma) restricted to (lo, hi).
TruncatedMoments truncated_moments(double lo, double hi, double mu, double sigma) {
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    const double z = std_mass(a, b);
    TruncatedMoments m{log_std_mass(a, b), 0.0, 0.0};
    if (z > 1e-290) {
        const double pa = std_phi(a);
        const double pb = std_phi(b);
        const double lambda = (pa - pb) / z;
        const double apa = std::isinf(a) ? 0.0 : a * pa;
        const double bpb = std::isinf(b) ? 0.0 : b * pb;
        m.mean = mu + sigma * lambda;
        m.var = std::max(0.0, sigma * sigma * (1.0 + (apa - bpb) / z - lambda * lambda));
    } else if (std::isfinite(lo) && std::isfinite(hi)) {
        m.mean = 0.5 * (lo + hi);
        m.var = (hi - lo) * (hi - lo) / 12.0;
    } else {
        m.mean = std::isfinite(lo) ? lo : hi;
        m.var = 0.0;
    }
    return m;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

MixtureParams initial_mixture(const std::vector<double>& sorted, std::size_t g, int restart, std::uint64_t seed) {
    MixtureParams p;
    const double n = static_cast<double>(sorted.size());
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    double var = 0.0;
    for (double x : sorted) var += (x - mean) * (x - mean);
    var = std::max(var / n, 1e-6);
    p.weights.assign(g, 1.0 / static_cast<double>(g));
    p.sigmas.assign(g, std::sqrt(var));
    if (restart == 0) {
        for (std::size_t i = 0; i < g; ++i) {
            const double q = g == 1 ? 0.5 : 0.1 + 0.8 * static_cast<double>(i) / static_cast<double>(g - 1);
            p.means.push_back(quantile_sorted(sorted, q));
        }
    } else {
        Rng rng(seed + static_cast<std::uint64_t>(restart));
        for (std::size_t i = 0; i < g; ++i) p.means.push_back(sorted[uniform_index(rng, sorted.size())]);
        std::sort(p.means.begin(), p.means.end());
    }
    return p;
}

void sort_components(MixtureParams& p) {
    std::vector<std::size_t> idx(p.components());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p.means[a] < p.means[b]; });
    MixtureParams s;
    for (std::size_t i : idx) {
        s.weights.push_back(p.weights[i]);
        s.means.push_back(p.means[i]);
        s.sigmas.push_back(p.sigmas[i]);
    }
    p = std::move(s);
}

bool collapsed(const MixtureParams& p, double floor) {
    for (std::size_t i = 0; i < p.components(); ++i)
        if (!(p.sigmas[i] >= floor) || !(p.weights[i] > 0.0) || !std::isfinite(p.means[i])) return true;
    return false;
}

// Packs (w_1..w_{G-1}, mu, sigma) for standard errors; w_G is implied.
std::vector<double> pack_mixture(const MixtureParams& p) {
    std::vector<double> v(p.weights.begin(), p.weights.end() - 1);
    v.insert(v.end(), p.means.begin(), p.means.end());
    v.insert(v.end(), p.sigmas.begin(), p.sigmas.end());
    return v;
}

MixtureParams unpack_mixture(std::span<const double> v, std::size_t g) {
    MixtureParams p;
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < g; ++i) {
        p.weights.push_back(v[i]);
        rest -= v[i];
    }
    p.weights.push_back(rest);
    p.means.assign(v.begin() + static_cast<std::ptrdiff_t>(g - 1), v.begin() + static_cast<std::ptrdiff_t>(2 * g - 1));
    p.sigmas.assign(v.begin() + static_cast<std::ptrdiff_t>(2 * g - 1), v.begin() + static_cast<std::ptrdiff_t>(3 * g - 1));
    return p;
}

template <class LogLik>
void mixture_report(MixtureFit& fit, LogLik&& loglik, std::size_t observations, int iterations, bool converged) {
    const std::size_t g = fit.params.components();
    FitReport& r = fit.report;
    r.names.clear();
    for (const char* prefix : {"weight", "mean", "sigma"})
        for (std::size_t i = 0; i < g; ++i) r.names.push_back(std::string(prefix) + std::to_string(i + 1));
    r.estimates.clear();
    r.estimates.insert(r.estimates.end(), fit.params.weights.begin(), fit.params.weights.end());
    r.estimates.insert(r.estimates.end(), fit.params.means.begin(), fit.params.means.end());
    r.estimates.insert(r.estimates.end(), fit.params.sigmas.begin(), fit.params.sigmas.end());
    r.std_errors.assign(3 * g, kInf);
    r.observations = observations;
    r.iterations = iterations;
    r.converged = converged;
    r.loglik = loglik(fit.params);
    if (!converged) return;

    const Objective f = [&](std::span<const double> v) {
        const MixtureParams p = unpack_mixture(v, g);
        for (std::size_t i = 0; i < g; ++i)
            if (!(p.sigmas[i] > 0.0) || !(p.weights[i] > 0.0)) return -kInf;
        return loglik(p);
    };
    const std::vector<double> x = pack_mixture(fit.params);
    const Eigen::MatrixXd h = numeric_hessian(f, x);
    Eigen::LDLT<Eigen::MatrixXd> ldlt((-h).eval());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
    const auto n = static_cast<Eigen::Index>(x.size());
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
    double var_last = 0.0;
    for (std::size_t i = 0; i + 1 < g; ++i) {
        r.std_errors[i] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
        for (std::size_t j = 0; j + 1 < g; ++j) var_last += cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    r.std_errors[g - 1] = std::sqrt(std::max(0.0, var_last));
    for (std::size_t i = g - 1; i < x.size(); ++i)
        r.std_errors[i + 1] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
}

}  // namespace

MixtureFit fit_mixture_em(std::span<const double> sample, const EmOptions& options) {
    const std::size_t g = options.components;
    if (g == 0) throw CalibrationError("mixture needs at least one component");
    if (sample.size() < 10 * g) throw CalibrationError("mixture fit needs at least 10 observations per component");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sample.size();
    const double nd = static_cast<double>(n);

    std::vector<double> resp(n * g);
    std::vector<double> logp(g);
    for (int restart = 0; restart <= options.max_restarts; ++restart) {
        MixtureParams p = initial_mixture(sorted, g, restart, options.seed);
        std::vector<double> trace;
        bool collapse = false;
        bool converged = false;
        int it = 0;
        for (; it < options.max_iterations; ++it) {
            double ll = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                double mx = -kInf;
                for (std::size_t i = 0; i < g; ++i) {
                    logp[i] = std::log(p.weights[i]) + log_normal_pdf(sample[k], p.means[i], p.sigmas[i]);
                    mx = std::max(mx, logp[i]);
                }
                double s = 0.0;
                for (std::size_t i = 0; i < g; ++i) s += std::exp(logp[i] - mx);
                ll += mx + std::log(s);
                for (std::size_t i = 0; i < g; ++i) resp[k * g + i] = std::exp(logp[i] - mx) / s;
            }
            trace.push_back(ll);
            if (trace.size() >= 2 && trace.back() - trace[trace.size() - 2] < options.tolerance * nd) {
                converged = true;
                break;
            }
            MixtureParams next = p;
            for (std::size_t i = 0; i < g; ++i) {
                double nk = 0.0;
                double sx = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    nk += resp[k * g + i];
                    sx += resp[k * g + i] * sample[k];
                }
                const double mu = sx / nk;
                double ss = 0.0;
                for (std::size_t k = 0; k < n; ++k) ss += resp[k * g + i] * (sample[k] - mu) * (sample[k] - mu);
                next.weights[i] = nk / nd;
                next.means[i] = mu;
                next.sigmas[i] = std::sqrt(ss / nk);
            }
            if (collapsed(next, options.collapse_sigma)) {
                collapse = true;
                break;
            }
            p = std::move(next);
        }
        if (collapse) continue;

        MixtureFit fit;
        fit.loglik_trace = std::move(trace);
        fit.restarts = restart;
        fit.params = p;
        sort_components(fit.params);
        const auto loglik = [&](const MixtureParams& q) {
            double ll = 0.0;
            for (double x : sample) ll += std::log(mixture_pdf(q, x));
            return ll;
        };
        mixture_report(fit, loglik, n, it, converged);
        if (!converged) fit.report.message = "EM iteration cap reached";
        if (restart > 0) fit.report.message += (fit.report.message.empty() ? "" : "; ") + std::to_string(restart) + " restart(s) after component collapse";
        return fit;
    }
    throw CalibrationError("mixture EM: a component collapsed in every one of " +
                           std::to_string(options.max_restarts + 1) + " runs");
}

namespace {

struct OffsetTable {
    std::map<Tick, double> by_offset;              // observed counts per cell
    std::map<Tick, double> by_bound;               // observations per lower bound
    std::map<std::pair<Tick, Tick>, double> cells;  // (bound, offset) -> count
    double total = 0.0;
};

OffsetTable tabulate(std::span<const BinnedOffset> data, Tick upper) {
    OffsetTable t;
    for (const BinnedOffset& d : data) {
        if (!(d.count > 0.0)) continue;
        if (d.offset < d.lower_bound || d.offset > upper)
            throw CalibrationError("placement offset " + std::to_string(d.offset) + " lies outside its admissible range");
        t.by_offset[d.offset] += d.count;
        t.by_bound[d.lower_bound] += d.count;
        t.cells[{d.lower_bound, d.offset}] += d.count;
        t.total += d.count;
    }
    if (t.total <= 0.0) throw CalibrationError("no placement observations");
    return t;
}

double mixture_interval_mass(const MixtureParams& p, double lo, double hi) {
    double m = 0.0;
    for (std::size_t i = 0; i < p.components(); ++i)
        m += p.weights[i] * std_mass((lo - p.means[i]) / p.sigmas[i], (hi - p.means[i]) / p.sigmas[i]);
    return m;
}

double mixture_log_interval_mass(const MixtureParams& p, double lo, double hi) {
    double mx = -kInf;
    std::vector<double> l(p.components());
    for (std::size_t i = 0; i < p.components(); ++i) {
        l[i] = std::log(p.weights[i]) + log_std_mass((lo - p.means[i]) / p.sigmas[i], (hi - p.means[i]) / p.sigmas[i]);
        mx = std::max(mx, l[i]);
    }
    double s = 0.0;
    for (double v : l) s += std::exp(v - mx);
    return mx + std::log(s);
}

double binned_loglik(const MixtureParams& p, const OffsetTable& t, Tick upper) {
    double ll = 0.0;
    for (const auto& [n, c] : t.by_offset) ll += c * mixture_log_interval_mass(p, n - 0.5, n + 0.5);
    for (const auto& [b, c] : t.by_bound) ll -= c * std::log(mixture_interval_mass(p, b - 0.5, upper + 0.5));
    return ll;
}

}  // namespace

double binned_mixture_loglik(const MixtureParams& params, std::span<const BinnedOffset> data, Tick upper_bound) {
    params.validate();
    return binned_loglik(params, tabulate(data, upper_bound), upper_bound);
}

MixtureFit fit_mixture_em_binned(std::span<const BinnedOffset> data, Tick upper_bound, const EmOptions& options) {
    const std::size_t g = options.components;
    if (g == 0) throw CalibrationError("mixture needs at least one component");
    const OffsetTable table = tabulate(data, upper_bound);
    if (table.total < 10.0 * static_cast<double>(g))
        throw CalibrationError("mixture fit needs at least 10 observations per component");

    std::vector<double> expanded;
    for (const auto& [n, c] : table.by_offset)
        expanded.insert(expanded.end(), static_cast<std::size_t>(std::max(1.0, std::round(c))), static_cast<double>(n));

    struct Item {
        double lo, hi, w;
    };
    const double hi_edge = static_cast<double>(upper_bound) + 0.5;
    std::vector<TruncatedMoments> mom(g);
    std::vector<double> lw(g);

    for (int restart = 0; restart <= options.max_restarts; ++restart) {
        MixtureParams p = initial_mixture(expanded, g, restart, options.seed);
        for (double& s : p.sigmas) s = std::sqrt(s * s + 1.0 / 12.0);
        std::vector<double> trace;
        bool collapse = false;
        bool converged = false;
        int it = 0;
        std::vector<Item> items;
        for (; it < options.max_iterations; ++it) {
            trace.push_back(binned_loglik(p, table, upper_bound));
            if (trace.size() >= 2 && trace.back() - trace[trace.size() - 2] < options.tolerance * table.total) {
                converged = true;
                break;
            }
            // Observed cells plus the expected mass that truncation hid.
            items.clear();
            for (const auto& [n, c] : table.by_offset) items.push_back({n - 0.5, n + 0.5, c});
            double upper_phantom = 0.0;
            for (const auto& [b, c] : table.by_bound) {
                const double lo_edge = static_cast<double>(b) - 0.5;
                const double admissible = mixture_interval_mass(p, lo_edge, hi_edge);
                items.push_back({-kInf, lo_edge, c * mixture_interval_mass(p, -kInf, lo_edge) / admissible});
                upper_phantom += c * mixture_interval_mass(p, hi_edge, kInf) / admissible;
            }
            items.push_back({hi_edge, kInf, upper_phantom});

            std::vector<double> sw(g, 0.0), sx(g, 0.0), sxx(g, 0.0);
            for (const Item& item : items) {
                if (!(item.w > 0.0)) continue;
                double mx = -kInf;
                for (std::size_t i = 0; i < g; ++i) {
                    mom[i] = truncated_moments(item.lo, item.hi, p.means[i], p.sigmas[i]);
                    lw[i] = std::log(p.weights[i]) + mom[i].log_mass;
                    mx = std::max(mx, lw[i]);
                }
                double s = 0.0;
                for (std::size_t i = 0; i < g; ++i) s += std::exp(lw[i] - mx);
                for (std::size_t i = 0; i < g; ++i) {
                    const double r = item.w * std::exp(lw[i] - mx) / s;
                    sw[i] += r;
                    sx[i] += r * mom[i].mean;
                    sxx[i] += r * (mom[i].var + mom[i].mean * mom[i].mean);
                }
            }
            const double total_w = std::accumulate(sw.begin(), sw.end(), 0.0);
            MixtureParams next = p;
            for (std::size_t i = 0; i < g; ++i) {
                next.weights[i] = sw[i] / total_w;
                next.means[i] = sx[i] / sw[i];
                next.sigmas[i] = std::sqrt(std::max(0.0, sxx[i] / sw[i] - next.means[i] * next.means[i]));
            }
            if (collapsed(next, options.collapse_sigma)) {
                collapse = true;
                break;
            }
            p = std::move(next);
        }
        if (collapse) continue;

        MixtureFit fit;
        fit.loglik_trace = std::move(trace);
        fit.restarts = restart;
        fit.params = p;
        sort_components(fit.params);
        const auto loglik = [&](const MixtureParams& q) { return binned_loglik(q, table, upper_bound); };
        mixture_report(fit, loglik, static_cast<std::size_t>(table.total), it, converged);
        if (!converged) fit.report.message = "EM iteration cap reached";
        if (restart > 0) fit.report.message += (fit.report.message.empty() ? "" : "; ") + std::to_string(restart) + " restart(s) after component collapse";
        return fit;
    }
    throw CalibrationError("binned mixture EM: a component collapsed in every one of " +
                           std::to_string(options.max_restarts + 1) + " runs");
}

// ---------------------------------------------------------------------------
// Student placement

namespace {

StudentParams student_from(std::span<const double> y) {
    return {y[0], std::exp(y[1]), kStudentMinDof + std::exp(y[2])};
}

void fill_report(FitReport& r, std::vector<std::string> names, std::vector<double> estimates, const Objective& natural,
                 const OptimizeResult& opt, std::size_t n) {
    r.names = std::move(names);
    r.estimates = std::move(estimates);
    r.loglik = natural(r.estimates);
    r.converged = opt.converged;
    r.iterations = opt.iterations;
    r.observations = n;
    r.message = opt.message;
    r.std_errors.assign(r.estimates.size(), kInf);
    if (opt.converged) r.std_errors = std_errors_from_hessian(numeric_hessian(natural, r.estimates));
}

double t_cdf_upper(const boost::math::students_t_distribution<double>& t, double z) {
    if (std::isinf(z)) return z > 0 ? 0.0 : 1.0;
    return boost::math::cdf(boost::math::complement(t, z));
}

}  // namespace

double student_loglik(const StudentParams& params, std::span<const double> sample) {
    const double log_norm = std::lgamma(0.5 * (params.nu + 1.0)) - std::lgamma(0.5 * params.nu) -
                            0.5 * std::log(M_PI * params.nu) - std::log(params.sigma);
    double ll = 0.0;
    for (double x : sample) {
        const double z = (x - params.mu) / params.sigma;
        ll += log_norm - 0.5 * (params.nu + 1.0) * std::log1p(z * z / params.nu);
    }
    return ll;
}

StudentFit fit_student(std::span<const double> sample) {
    if (sample.size() < 10) throw CalibrationError("Student fit needs at least 10 observations");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double med = quantile_sorted(sorted, 0.5);
    double scale = 0.5 * (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25));
    if (!(scale > 0.0)) scale = 1.0;

    const Objective transformed = [&](std::span<const double> y) {
        if (y[2] > 14.0 || y[1] < -30.0) return -kInf;
        return student_loglik(student_from(y), sample);
    };
    const Objective natural = [&](std::span<const double> x) {
        if (!(x[1] > 0.0) || !(x[2] > kStudentMinDof)) return -kInf;
        return student_loglik({x[0], x[1], x[2]}, sample);
    };
    const OptimizeResult opt = maximize(transformed, {med, std::log(scale), std::log(2.0 - kStudentMinDof)});
    StudentFit fit;
    fit.params = student_from(opt.x);
    fill_report(fit.report, {"mu", "sigma", "nu"}, {fit.params.mu, fit.params.sigma, fit.params.nu}, natural, opt,
                sample.size());
    return fit;
}

double binned_student_loglik(const StudentParams& params, std::span<const BinnedOffset> data, Tick upper_bound) {
    params.validate();
    const OffsetTable t = tabulate(data, upper_bound);
    const boost::math::students_t_distribution<double> dist(params.nu);
    const auto upper_tail = [&](double x) { return t_cdf_upper(dist, (x - params.mu) / params.sigma); };
    const auto mass = [&](double lo, double hi) {
        const double zl = (lo - params.mu) / params.sigma;
        if (zl > 0.0) return upper_tail(lo) - upper_tail(hi);
        const double zh = (hi - params.mu) / params.sigma;
        const double lower_hi = std::isinf(zh) ? 1.0 : boost::math::cdf(dist, zh);
        const double lower_lo = std::isinf(zl) ? 0.0 : boost::math::cdf(dist, zl);
        return lower_hi - lower_lo;
    };
    double ll = 0.0;
    for (const auto& [n, c] : t.by_offset) {
        const double m = mass(n - 0.5, n + 0.5);
        if (!(m > 0.0)) return -kInf;
        ll += c * std::log(m);
    }
    for (const auto& [b, c] : t.by_bound) ll -= c * std::log(mass(b - 0.5, upper_bound + 0.5));
    return ll;
}

StudentFit fit_student_binned(std::span<const BinnedOffset> data, Tick upper_bound) {
    const OffsetTable table = tabulate(data, upper_bound);
    if (table.total < 10.0) throw CalibrationError("Student fit needs at least 10 observations");
    std::vector<BinnedOffset> rows;
    for (const auto& [key, c] : table.cells) rows.push_back({key.second, key.first, c});

    std::vector<double> expanded;
    for (const auto& [n, c] : table.by_offset)
        expanded.insert(expanded.end(), static_cast<std::size_t>(std::max(1.0, std::round(c))), static_cast<double>(n));
    const double med = quantile_sorted(expanded, 0.5);
    double scale = 0.5 * (quantile_sorted(expanded, 0.75) - quantile_sorted(expanded, 0.25));
    if (!(scale > 0.0)) scale = 1.0;

    const Objective transformed = [&](std::span<const double> y) {
        if (y[2] > 14.0 || y[1] < -30.0 || y[1] > 30.0) return -kInf;
        return binned_student_loglik(student_from(y), rows, upper_bound);
    };
    const Objective natural = [&](std::span<const double> x) {
        if (!(x[1] > 0.0) || !(x[2] > kStudentMinDof)) return -kInf;
        return binned_student_loglik({x[0], x[1], x[2]}, rows, upper_bound);
    };
    const OptimizeResult opt = maximize(transformed, {med, std::log(scale), std::log(2.0 - kStudentMinDof)});
    StudentFit fit;
    fit.params = student_from(opt.x);
    fill_report(fit.report, {"mu", "sigma", "nu"}, {fit.params.mu, fit.params.sigma, fit.params.nu}, natural, opt,
                static_cast<std::size_t>(table.total));
    return fit;
}

// ---------------------------------------------------------------------------
// Cancellation priority law

namespace {

CancellationFit fit_priority_law(const std::function<double(double, double)>& loglik, std::size_t n) {
    const Objective transformed = [&](std::span<const double> y) {
        if (y[1] < -30.0 || y[1] > 30.0 || std::abs(y[0]) > 1e3) return -kInf;
        return loglik(y[0], std::exp(y[1]));
    };
    const Objective natural = [&](std::span<const double> x) {
        if (!(x[1] > 0.0)) return -kInf;
        return loglik(x[0], x[1]);
    };

    // Coarse start: the best of a few shapes, then simplex plus polish.
    std::vector<double> start{-1.0, std::log(5.0)};
    double best = -kInf;
    for (double a : {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5})
        for (double s : {0.5, 2.0, 8.0, 32.0}) {
            const std::vector<double> y{a, std::log(s)};
            const double v = transformed(y);
            if (v > best) {
                best = v;
                start = y;
            }
        }
    const OptimizeResult opt = maximize(transformed, start);
    CancellationFit fit;
    fit.alpha = opt.x[0];
    fit.sigma = std::exp(opt.x[1]);
    fit.boundary = fit.sigma < 1e-6;
    fill_report(fit.report, {"alpha", "sigma"}, {fit.alpha, fit.sigma}, natural, opt, n);
    if (fit.boundary) fit.report.message += (fit.report.message.empty() ? "" : "; ") + std::string("sigma at its lower boundary: sample is close to uniform");
    return fit;
}

}  // namespace

CancellationFit fit_cancellation_mle(std::span<const double> xi) {
    if (xi.empty()) throw CalibrationError("cancellation fit needs at least one observation");
    for (double x : xi)
        if (!(x >= 0.0 && x <= 1.0)) throw CalibrationError("priority indices must lie in [0, 1]");
    return fit_priority_law([&](double a, double s) { return priority_loglik(a, s, xi); }, xi.size());
}

double priority_interval_loglik(double alpha, double sigma, std::span<const PriorityInterval> data) {
    if (data.empty()) throw CalibrationError("empty priority-interval sample");
    double sum = 0.0;
    for (const PriorityInterval& iv : data) {
        const double p = priority_cdf(alpha, sigma, iv.upper) - priority_cdf(alpha, sigma, iv.lower);
        if (!(p > 0.0)) return -kInf;
        sum += std::log(p);
    }
    return sum;
}

CancellationFit fit_cancellation_interval_mle(std::span<const PriorityInterval> data) {
    if (data.empty()) throw CalibrationError("cancellation fit needs at least one observation");
    for (const PriorityInterval& iv : data)
        if (!(iv.lower >= 0.0 && iv.lower < iv.upper && iv.upper <= 1.0))
            throw CalibrationError("priority intervals must satisfy 0 <= lower < upper <= 1");
    return fit_priority_law([&](double a, double s) { return priority_interval_loglik(a, s, data); }, data.size());
}

}  // namespace lobsim
