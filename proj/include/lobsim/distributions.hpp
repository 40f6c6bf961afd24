#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "lobsim/book.hpp"
#include "lobsim/calibration.hpp"
#include "lobsim/simulator.hpp"

namespace lobsim {

/// Probability mass on integer support.
using Distribution = std::map<Tick, double>;

inline constexpr std::size_t kDefaultShapeTicks = 30;

/// Time-weighted distributions of the book state.
struct DistributionReport {
    Distribution spread;
    /// Both sides pooled with equal weight.
    Distribution q1;
    Distribution q10;
    /// Time-weighted mean volume at k ticks from the same-side best, averaged over sides.
    std::vector<double> shape;
    double duration = 0.0;
    /// Time-weighted mean of the per-side total volume.
    double mean_side_volume = 0.0;
};

/// Accumulates piecewise-constant book states with their holding times.
class DistributionAccumulator {
public:
    explicit DistributionAccumulator(std::size_t shape_ticks = kDefaultShapeTicks) : shape_(shape_ticks, 0.0) {}

    std::size_t shape_ticks() const noexcept { return shape_.size(); }
    /// The state must carry a depth profile of at least shape_ticks() entries
    /// for the shape to be updated.
    void add(const MarketState& state, double weight);
    void add(const PathState& state, double weight);

    DistributionReport report() const;

private:
    void add_volumes(Tick spread, const std::array<Volume, 2>& q1, const std::array<Volume, 2>& q10,
                     const std::array<Volume, 2>& total, double weight);

    std::map<Tick, double> spread_, q1_, q10_;
    std::vector<double> shape_;
    double weight_ = 0.0;
    double spread_weight_ = 0.0;
    double shape_weight_ = 0.0;
    double total_volume_ = 0.0;
};

/// Samples taken on a regular grid each count one sample interval.
DistributionReport compute_distributions(std::span<const StateSample> samples, std::size_t shape_ticks = kDefaultShapeTicks);
/// From a covariate path; the path carries no depth profile so shape stays empty.
DistributionReport compute_distributions(const CovariatePath& path);

struct DistributionDistance {
    double total_variation = 0.0;
    double ks = 0.0;
};

double total_variation(const Distribution& a, const Distribution& b);
double ks_statistic(const Distribution& a, const Distribution& b);
Distribution shape_as_distribution(std::span<const double> shape);

/// Metrics keyed "spread", "q1", "q10", "shape".
std::map<std::string, DistributionDistance> compare_distributions(const DistributionReport& empirical,
                                                                  const DistributionReport& simulated);

/// Drops the upper tail beyond the given quantile and renormalizes.
Distribution truncate_at_quantile(const Distribution& d, double quantile);

}  // namespace lobsim
