#include "lobsim/bundle.hpp"

#include <algorithm>
#include <cmath>

#include "lobsim/flow.hpp"

namespace lobsim {

namespace {

nlohmann::ordered_json number(double v) {
    // JSON has no infinities: non-finite values are written as null.
    if (!std::isfinite(v)) return nullptr;
    return v;
}

nlohmann::ordered_json numbers(const std::vector<double>& v) {
    auto out = nlohmann::ordered_json::array();
    for (double x : v) out.push_back(number(x));
    return out;
}

nlohmann::ordered_json intensity_json(const IntensityParams& p) {
    return {{"covariate", to_string(p.covariate)}, {"beta", std::vector<double>(p.beta.begin(), p.beta.end())}};
}

IntensityParams intensity_from(const nlohmann::json& j) {
    IntensityParams p;
    p.covariate = volume_covariate_from_string(j.at("covariate").get<std::string>());
    const auto beta = j.at("beta").get<std::vector<double>>();
    if (beta.size() != kIntensityDim) throw BundleError("intensity beta must have 6 coefficients");
    std::copy(beta.begin(), beta.end(), p.beta.begin());
    return p;
}

double median(std::vector<double> v) {
    if (v.empty()) throw CalibrationError("no order sizes to take a median from");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw CalibrationError("no order sizes to take a mean from");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<BinnedOffset> aggregate(const std::vector<BinnedOffset>& data) {
    std::map<std::pair<Tick, Tick>, double> cells;
    for (const BinnedOffset& b : data) cells[{b.offset, b.lower_bound}] += b.count;
    std::vector<BinnedOffset> out;
    out.reserve(cells.size());
    for (const auto& [key, count] : cells) out.push_back({key.first, key.second, count});
    return out;
}

// Published weights are rounded to a few decimals and need not sum to 1 exactly.
void normalize_rounded_weights(std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (std::abs(total - 1.0) <= kWeightRoundingTolerance)
        for (double& x : w) x /= total;
}

}  // namespace

nlohmann::ordered_json to_json(const FitReport& r) {
    nlohmann::ordered_json j;
    j["names"] = r.names;
    j["estimates"] = numbers(r.estimates);
    j["std_errors"] = numbers(r.std_errors);
    j["loglik"] = number(r.loglik);
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["observations"] = r.observations;
    j["message"] = r.message;
    return j;
}

nlohmann::ordered_json to_json(const ModelBundle& b) {
    nlohmann::ordered_json j;
    j["ticksize"] = b.ticksize;
    j["median_trade_size"] = b.median_trade_size;
    j["sizes"] = {{"limit", b.limit_size}, {"market", b.market_size}};
    j["intensity"] = {{"limit", intensity_json(b.limit_intensity)}, {"market", intensity_json(b.market_intensity)}};
    j["poisson"] = {{"limit_rate", b.limit_rate}, {"market_rate", b.market_rate}};
    j["placement"] = {
        {"mixture", {{"weights", b.mixture.weights}, {"means", b.mixture.means}, {"sigmas", b.mixture.sigmas}}},
        {"student", {{"mu", b.student.mu}, {"sigma", b.student.sigma}, {"nu", b.student.nu}}}};
    j["cancellation"] = {
        {"alpha", b.cancellation.alpha}, {"sigma", b.cancellation.sigma}, {"theta", b.cancellation.theta}};
    return j;
}

ModelBundle bundle_from_json(const nlohmann::json& j) {
    try {
        ModelBundle b;
        b.ticksize = j.at("ticksize").get<double>();
        b.median_trade_size = j.at("median_trade_size").get<double>();
        b.limit_size = j.at("sizes").at("limit").get<double>();
        b.market_size = j.at("sizes").at("market").get<double>();
        b.limit_intensity = intensity_from(j.at("intensity").at("limit"));
        b.market_intensity = intensity_from(j.at("intensity").at("market"));
        b.limit_rate = j.at("poisson").at("limit_rate").get<double>();
        b.market_rate = j.at("poisson").at("market_rate").get<double>();
        const auto& m = j.at("placement").at("mixture");
        b.mixture.weights = m.at("weights").get<std::vector<double>>();
        b.mixture.means = m.at("means").get<std::vector<double>>();
        b.mixture.sigmas = m.at("sigmas").get<std::vector<double>>();
        normalize_rounded_weights(b.mixture.weights);
        const auto& s = j.at("placement").at("student");
        b.student = {s.at("mu").get<double>(), s.at("sigma").get<double>(), s.at("nu").get<double>()};
        const auto& c = j.at("cancellation");
        b.cancellation.alpha = c.at("alpha").get<double>();
        b.cancellation.sigma = c.at("sigma").get<double>();
        b.cancellation.theta = c.at("theta").get<double>();
        b.validate();
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw BundleError(std::string("malformed model bundle: ") + e.what());
    }
}

ModelBundle load_bundle(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw BundleError(path + ": " + e.what());
    }
    return bundle_from_json(j.contains("bundle") ? j.at("bundle") : j);
}

std::string to_string(CancelEstimator e) {
    return e == CancelEstimator::selection_interval ? "selection_interval" : "half_queue";
}

CancelEstimator cancel_estimator_from_string(const std::string& s) {
    if (s == "selection_interval") return CancelEstimator::selection_interval;
    if (s == "half_queue") return CancelEstimator::half_queue;
    throw Error("unknown cancellation estimator '" + s + "'");
}

BundleFit fit_bundle(const ReplayResult& replay, double ticksize, double median_trade_size,
                     CancelEstimator cancel_estimator) {
    BundleFit out;
    ModelBundle& b = out.bundle;
    b.ticksize = ticksize;
    b.median_trade_size = median_trade_size;
    out.quality = replay.quality;
    const CovariatePath& path = replay.path;
    out.duration = path.duration();
    if (!(out.duration > 0.0)) throw CalibrationError("order flow spans no time");

    const IntensityFit limit = fit_state_intensity_mle(path, StreamSpec{EventType::limit, VolumeCovariate::q10});
    const IntensityFit market = fit_state_intensity_mle(path, StreamSpec{EventType::market, VolumeCovariate::q1});
    b.limit_intensity = limit.params;
    b.market_intensity = market.params;
    out.reports["limit_intensity"] = limit.report;
    out.reports["market_intensity"] = market.report;

    const auto per_side = [&](EventType t) {
        return replay.events[stream_index(t, Side::bid)] + replay.events[stream_index(t, Side::ask)];
    };
    const PoissonFit limit_rate = fit_poisson_rate(per_side(EventType::limit), 2.0 * out.duration);
    const PoissonFit market_rate = fit_poisson_rate(per_side(EventType::market), 2.0 * out.duration);
    b.limit_rate = limit_rate.rate;
    b.market_rate = market_rate.rate;

    const std::vector<BinnedOffset> offsets = aggregate(replay.offsets);
    const MixtureFit mixture = fit_mixture_em_binned(offsets);
    b.mixture = mixture.params;
    out.reports["placement_mixture"] = mixture.report;
    const StudentFit student = fit_student_binned(offsets);
    b.student = student.params;
    out.reports["placement_student"] = student.report;

    b.limit_size = median(replay.limit_sizes);
    b.market_size = median(replay.market_sizes);
    out.limit_size_mean = mean(replay.limit_sizes);
    out.market_size_mean = mean(replay.market_sizes);

    const CancellationFit half = fit_cancellation_mle(replay.cancel_priority);
    const CancellationFit interval = fit_cancellation_interval_mle(replay.cancel_intervals);
    out.reports["cancellation_priority_half_queue"] = half.report;
    out.reports["cancellation_priority_interval"] = interval.report;
    const CancellationFit& cancel = cancel_estimator == CancelEstimator::half_queue ? half : interval;
    out.cancel_estimator = cancel_estimator;
    b.cancellation.alpha = cancel.alpha;
    b.cancellation.sigma = cancel.sigma;
    out.cancellation_boundary = cancel.boundary;

    out.depth_target = replay.distributions.mean_side_volume;
    const DepthModelInputs inputs =
        perturb_unit_ratio({b.limit_rate, b.market_rate, out.limit_size_mean, out.market_size_mean});
    b.cancellation.theta = calibrate_theta(inputs, out.depth_target);

    b.validate();
    return out;
}

nlohmann::ordered_json to_json(const BundleFit& fit) {
    nlohmann::ordered_json j;
    j["bundle"] = to_json(fit.bundle);
    nlohmann::ordered_json reports;
    for (const auto& [name, r] : fit.reports) reports[name] = to_json(r);
    j["fit_reports"] = reports;
    j["calibration"] = {{"duration_s", fit.duration},
                        {"depth_target", fit.depth_target},
                        {"limit_size_mean", fit.limit_size_mean},
                        {"market_size_mean", fit.market_size_mean},
                        {"cancel_estimator", to_string(fit.cancel_estimator)},
                        {"cancellation_boundary", fit.cancellation_boundary}};
    const ReplayQuality& q = fit.quality;
    j["quality"] = {{"crossing_limits", q.crossing_limits},
                    {"missing_cancels", q.missing_cancels},
                    {"empty_markets", q.empty_markets},
                    {"partial_markets", q.partial_markets},
                    {"state_mismatches", q.state_mismatches},
                    {"offsets_out_of_range", q.offsets_out_of_range},
                    {"offsets_without_reference", q.offsets_without_reference}};
    return j;
}

}  // namespace lobsim
