#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "lobsim/random.hpp"
#include "lobsim/types.hpp"

namespace lobsim {

/// Location-scale Student placement law, in ticks from the same-side best quote.
struct StudentParams {
    double mu = 0.0;
    double sigma = 1.0;
    double nu = 1.0;

    void validate() const;
};

/// Gaussian mixture placement law. Components are kept sorted by mean.
struct MixtureParams {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> sigmas;

    std::size_t components() const noexcept { return weights.size(); }
    void validate() const;
};

using PlacementParams = std::variant<MixtureParams, StudentParams>;

class PlacementError : public Error {
public:
    using Error::Error;
};

double student_pdf(const StudentParams& params, double p);
double student_cdf(const StudentParams& params, double p);
double mixture_pdf(const MixtureParams& params, double p);
double mixture_cdf(const MixtureParams& params, double p);

/// Cell probabilities P(n) = integral of the density over [n - 1/2, n + 1/2].
struct TickPmf {
    Tick n_min = 0;
    Tick n_max = -1;
    std::vector<double> probabilities;
    double lower_tail = 0.0;  ///< mass below n_min - 1/2
    double upper_tail = 0.0;  ///< mass above n_max + 1/2

    double at(Tick n) const noexcept;
    double covered_mass() const noexcept;
    double truncated_mass() const noexcept { return lower_tail + upper_tail; }
};

/// Adaptive Gauss-Kronrod integration of an arbitrary density over each cell
/// (and over both tails).
TickPmf discretize_to_ticks(const std::function<double(double)>& density, Tick n_min, Tick n_max);
/// Closed-form CDF differences.
TickPmf discretize_to_ticks(const MixtureParams& params, Tick n_min, Tick n_max);
TickPmf discretize_to_ticks(const StudentParams& params, Tick n_min, Tick n_max);

inline constexpr Tick kPlacementMinOffset = -20;
inline constexpr Tick kPlacementMaxOffset = 200;

/// Draws integer offsets from a placement law discretized on
/// [kPlacementMinOffset, kPlacementMaxOffset], with the tails renormalized away.
/// Positive offsets point deeper into the book, negative ones into the spread.
class PlacementSampler {
public:
    explicit PlacementSampler(const PlacementParams& params, Tick n_min = kPlacementMinOffset,
                              Tick n_max = kPlacementMaxOffset);
    explicit PlacementSampler(TickPmf pmf);

    Tick sample(Rng& rng) const;
    /// Renormalized probability of offset n.
    double probability(Tick n) const noexcept;
    /// Renormalized mass on offsets >= n.
    double mass_at_or_above(Tick n) const noexcept;
    Tick min_offset() const noexcept { return n_min_; }
    Tick max_offset() const noexcept { return n_min_ + static_cast<Tick>(cdf_.size()) - 1; }

private:
    Tick n_min_ = 0;
    std::vector<double> cdf_;
};

}  // namespace lobsim
