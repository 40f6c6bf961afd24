#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "lobsim/calibration.hpp"
#include "lobsim/replay.hpp"
#include "lobsim/simulator.hpp"

namespace lobsim {

class BundleError : public Error {
public:
    using Error::Error;
};

/// Mixture weights read from a bundle are rescaled to sum to 1 when they miss by at most this much.
inline constexpr double kWeightRoundingTolerance = 5e-3;

nlohmann::ordered_json to_json(const FitReport& report);
nlohmann::ordered_json to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const nlohmann::json& j);

ModelBundle load_bundle(const std::string& path);

/// How the cancellation priority law is estimated from an anonymous flow.
enum class CancelEstimator {
    /// Interval likelihood matching the simulator's victim selection.
    selection_interval,
    /// Point likelihood on indices taken in the middle of the price queue.
    half_queue,
};

std::string to_string(CancelEstimator e);
CancelEstimator cancel_estimator_from_string(const std::string& s);

struct BundleFit {
    ModelBundle bundle;
    std::map<std::string, FitReport> reports;
    /// Time-averaged per-side volume the cancellation rate was calibrated to.
    double depth_target = 0.0;
    /// Mean sizes fed to the depth formula.
    double limit_size_mean = 0.0;
    double market_size_mean = 0.0;
    double duration = 0.0;
    ReplayQuality quality;
    bool cancellation_boundary = false;
    CancelEstimator cancel_estimator = CancelEstimator::selection_interval;
};

/// Runs every calibration on a replayed flow: both intensity MLEs (bid and ask
/// pooled), the Poisson reference rates, the placement laws, the order sizes,
/// the cancellation priority law and the cancellation rate.
BundleFit fit_bundle(const ReplayResult& replay, double ticksize, double median_trade_size,
                     CancelEstimator cancel_estimator = CancelEstimator::selection_interval);

nlohmann::ordered_json to_json(const BundleFit& fit);

}  // namespace lobsim
