#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bbmvote/bbm.hpp"
#include "bbmvote/models.hpp"

namespace bbmvote {

// Initial datum g(x), evaluated on the first coordinate.
class InitialDatum {
  public:
    // Indicator of x < 0.
    static InitialDatum step();
    // Indicator of a <= x <= b.
    static InitialDatum interval(double a, double b);
    // height * exp(-(x-center)^2 / (2 width^2)), clipped to [0,1].
    static InitialDatum bump(double center, double width, double height = 1.0);
    // Piecewise-linear interpolation of (x, v) samples; clamped outside.
    static InitialDatum tabulated(std::vector<double> x, std::vector<double> v);

    double operator()(double x) const;
    double operator()(std::span<const double> x) const { return (*this)(x[0]); }

    // Exact mean over [lo, hi]; the PDE solver initializes with cell
    // averages so that indicator data keep the scheme second order.
    double average(double lo, double hi) const;

    // 1 - g, for the u = 1 - v change of variables.
    InitialDatum complement() const;

    // Whether the range is contained in [0,1] (required by voting models).
    bool in_unit_range() const;

    std::string describe() const;

  private:
    enum class Kind { step, interval, bump, tabulated };
    InitialDatum(Kind k) : kind_(k) {}

    Kind kind_;
    bool complemented_ = false;
    double a_ = 0.0, b_ = 0.0, height_ = 1.0;
    std::vector<double> xs_, vs_;
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n_replicates = 0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::string warning;  // empty unless a diagnostic fired
};

// P(exactly k of n independent Bernoulli(q_i) are 1), k = 0..n.
struct CountDistribution {
    std::vector<double> probs;
};

CountDistribution poisson_binomial(std::span<const double> q);

enum class VoteMode { sampled, conditional };
enum class ThresholdMode { direct, via_outcome };
enum class CiKind { normal, wilson };

struct EstimatorOptions {
    std::uint64_t master_seed = 0;
    std::int64_t n_replicates = 10000;
    int workers = 1;
    CiKind ci = CiKind::normal;
    FoldLimits limits;
};

// --- estimators ------------------------------------------------------------

Estimate estimate_voting(const RandomOutcomeModel& model, const InitialDatum& g, double t,
                         std::span<const double> x0, const EstimatorOptions& opt,
                         VoteMode mode = VoteMode::conditional);

Estimate estimate_voting(const CompositeLabelModel& model, const InitialDatum& g, double t,
                         std::span<const double> x0, const EstimatorOptions& opt,
                         VoteMode mode = VoteMode::conditional);

Estimate estimate_threshold(const RandomThresholdModel& model, const InitialDatum& g, double t,
                            std::span<const double> x0, const EstimatorOptions& opt,
                            ThresholdMode mode = ThresholdMode::via_outcome);

Estimate estimate_recursive(const RecursiveModel& model, const InitialDatum& g, double t,
                            std::span<const double> x0, const EstimatorOptions& opt);

Estimate estimate_mckean_product(const GenealogyParams& params, const InitialDatum& g, double t,
                                 std::span<const double> x0, const EstimatorOptions& opt);

// P(max leaf position > x) for every x in xs, sharing replicates; d = 1,
// start at the origin.
std::vector<Estimate> estimate_max_cdf(const GenealogyParams& params, double t,
                                       std::span<const double> xs, const EstimatorOptions& opt);

// --- single-replicate values (paired-seed comparisons, tests) ---------------

double voting_replicate(const RandomOutcomeModel& model, const InitialDatum& g, double t,
                        std::span<const double> x0, NodeRng root, VoteMode mode,
                        const FoldLimits& limits = {});

double voting_replicate(const CompositeLabelModel& model, const InitialDatum& g, double t,
                        std::span<const double> x0, NodeRng root, VoteMode mode,
                        const FoldLimits& limits = {});

double threshold_replicate(const RandomThresholdModel& model, const InitialDatum& g, double t,
                           std::span<const double> x0, NodeRng root, ThresholdMode mode,
                           const FoldLimits& limits = {});

double recursive_replicate(const RecursiveModel& model, const InitialDatum& g, double t,
                           std::span<const double> x0, NodeRng root,
                           const FoldLimits& limits = {});

double product_replicate(const GenealogyParams& params, const InitialDatum& g, double t,
                         std::span<const double> x0, NodeRng root, const FoldLimits& limits = {});

double max_position_replicate(const GenealogyParams& params, double t, NodeRng root,
                              const FoldLimits& limits = {});

// --- generic deterministic replicate runner ---------------------------------
//
// fn(replicate_index, out) fills `width` components for one replicate.
// Accumulation is chunked with compensated summation, so the result is
// bit-identical for any worker count.
std::vector<Estimate> run_replicates(
    const EstimatorOptions& opt, std::size_t width,
    const std::function<void(std::int64_t, std::span<double>)>& fn);

Estimate run_scalar_replicates(const EstimatorOptions& opt,
                               const std::function<double(std::int64_t)>& fn);

}  // namespace bbmvote
