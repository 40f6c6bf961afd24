#include "lobsim/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lobsim {

namespace {

Distribution normalized(const std::map<Tick, double>& raw, double total) {
    Distribution out;
    if (!(total > 0.0)) return out;
    for (const auto& [k, w] : raw)
        if (w > 0.0) out[k] = w / total;
    return out;
}

}  // namespace

void DistributionAccumulator::add_volumes(Tick spread, const std::array<Volume, 2>& q1, const std::array<Volume, 2>& q10,
                                          const std::array<Volume, 2>& total, double weight) {
    weight_ += weight;
    if (spread != kUndefinedSpread) {
        spread_[spread] += weight;
        spread_weight_ += weight;
    }
    for (int i = 0; i < 2; ++i) {
        q1_[q1[i]] += 0.5 * weight;
        q10_[q10[i]] += 0.5 * weight;
        total_volume_ += 0.5 * weight * static_cast<double>(total[i]);
    }
}

void DistributionAccumulator::add(const MarketState& s, double weight) {
    if (!(weight > 0.0)) return;
    add_volumes(s.spread, s.q1, s.q10, s.total, weight);
    if (shape_.empty()) return;
    if (s.depth_profile[0].size() < shape_.size() || s.depth_profile[1].size() < shape_.size()) return;
    shape_weight_ += weight;
    for (std::size_t k = 0; k < shape_.size(); ++k)
        shape_[k] += 0.5 * weight * static_cast<double>(s.depth_profile[0][k] + s.depth_profile[1][k]);
}

void DistributionAccumulator::add(const PathState& s, double weight) {
    if (!(weight > 0.0)) return;
    // A path only knows the reference spread and has no totals.
    add_volumes(s.spread, s.q1, s.q10, {0, 0}, weight);
}

DistributionReport DistributionAccumulator::report() const {
    DistributionReport r;
    r.spread = normalized(spread_, spread_weight_);
    r.q1 = normalized(q1_, weight_);
    r.q10 = normalized(q10_, weight_);
    if (shape_weight_ > 0.0) {
        r.shape.resize(shape_.size());
        for (std::size_t k = 0; k < shape_.size(); ++k) r.shape[k] = shape_[k] / shape_weight_;
    }
    r.duration = weight_;
    r.mean_side_volume = weight_ > 0.0 ? total_volume_ / weight_ : 0.0;
    return r;
}

DistributionReport compute_distributions(std::span<const StateSample> samples, std::size_t shape_ticks) {
    DistributionAccumulator acc(shape_ticks);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double w = i + 1 < samples.size() ? samples[i + 1].time - samples[i].time
                                                : (i > 0 ? samples[i].time - samples[i - 1].time : 1.0);
        acc.add(samples[i].state, w);
    }
    return acc.report();
}

DistributionReport compute_distributions(const CovariatePath& path) {
    DistributionAccumulator acc(0);
    for (std::size_t k = 0; k < path.interval_count(); ++k) acc.add(path.state(k), path.interval_length(k));
    DistributionReport r = acc.report();
    r.mean_side_volume = 0.0;
    return r;
}

double total_variation(const Distribution& a, const Distribution& b) {
    std::set<Tick> support;
    for (const auto& [k, p] : a) support.insert(k);
    for (const auto& [k, p] : b) support.insert(k);
    double sum = 0.0;
    for (Tick k : support) {
        const auto ia = a.find(k);
        const auto ib = b.find(k);
        sum += std::abs((ia == a.end() ? 0.0 : ia->second) - (ib == b.end() ? 0.0 : ib->second));
    }
    return 0.5 * sum;
}

double ks_statistic(const Distribution& a, const Distribution& b) {
    std::set<Tick> support;
    for (const auto& [k, p] : a) support.insert(k);
    for (const auto& [k, p] : b) support.insert(k);
    double fa = 0.0, fb = 0.0, d = 0.0;
    for (Tick k : support) {
        if (auto it = a.find(k); it != a.end()) fa += it->second;
        if (auto it = b.find(k); it != b.end()) fb += it->second;
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

Distribution shape_as_distribution(std::span<const double> shape) {
    double total = 0.0;
    for (double v : shape) total += v;
    Distribution out;
    if (!(total > 0.0)) return out;
    for (std::size_t k = 0; k < shape.size(); ++k)
        if (shape[k] > 0.0) out[static_cast<Tick>(k)] = shape[k] / total;
    return out;
}

std::map<std::string, DistributionDistance> compare_distributions(const DistributionReport& e,
                                                                  const DistributionReport& s) {
    std::map<std::string, DistributionDistance> out;
    const auto put = [&](const std::string& name, const Distribution& a, const Distribution& b) {
        out[name] = {total_variation(a, b), ks_statistic(a, b)};
    };
    put("spread", e.spread, s.spread);
    put("q1", e.q1, s.q1);
    put("q10", e.q10, s.q10);
    put("shape", shape_as_distribution(e.shape), shape_as_distribution(s.shape));
    return out;
}

Distribution truncate_at_quantile(const Distribution& d, double quantile) {
    if (quantile >= 1.0) return d;
    if (!(quantile > 0.0)) throw Error("truncation quantile must lie in (0, 1]");
    Distribution out;
    double run = 0.0;
    for (const auto& [k, p] : d) {
        out[k] = p;
        run += p;
        if (run >= quantile - 1e-12) break;
    }
    double total = 0.0;
    for (const auto& [k, p] : out) total += p;
    for (auto& [k, p] : out) p /= total;
    return out;
}

}  // namespace lobsim
