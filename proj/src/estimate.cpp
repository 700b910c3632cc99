#include "bbmvote/estimate.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "bbmvote/errors.hpp"

namespace bbmvote {

namespace {

constexpr double kZ95 = 1.959963984540054;  // two-sided 95% normal quantile

}  // namespace

// --- InitialDatum ------------------------------------------------------------

InitialDatum InitialDatum::step() { return InitialDatum(Kind::step); }

InitialDatum InitialDatum::interval(double a, double b) {
    if (!(a <= b)) throw ValidationError("interval datum requires a <= b");
    InitialDatum g(Kind::interval);
    g.a_ = a;
    g.b_ = b;
    return g;
}

InitialDatum InitialDatum::bump(double center, double width, double height) {
    if (!(width > 0.0)) throw ValidationError("bump datum requires width > 0");
    InitialDatum g(Kind::bump);
    g.a_ = center;
    g.b_ = width;
    g.height_ = height;
    return g;
}

InitialDatum InitialDatum::tabulated(std::vector<double> x, std::vector<double> v) {
    if (x.size() != v.size() || x.size() < 2)
        throw ValidationError("tabulated datum needs >= 2 matching samples");
    for (size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw ValidationError("tabulated datum abscissae must increase");
    InitialDatum g(Kind::tabulated);
    g.xs_ = std::move(x);
    g.vs_ = std::move(v);
    return g;
}

double InitialDatum::operator()(double x) const {
    double v = 0.0;
    switch (kind_) {
        case Kind::step:
            v = x < 0.0 ? 1.0 : 0.0;
            break;
        case Kind::interval:
            v = (x >= a_ && x <= b_) ? 1.0 : 0.0;
            break;
        case Kind::bump: {
            double z = (x - a_) / b_;
            v = height_ * std::exp(-0.5 * z * z);
            v = std::clamp(v, 0.0, 1.0);
            break;
        }
        case Kind::tabulated: {
            if (x <= xs_.front()) {
                v = vs_.front();
            } else if (x >= xs_.back()) {
                v = vs_.back();
            } else {
                auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
                size_t i = static_cast<size_t>(it - xs_.begin());
                double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
                v = vs_[i - 1] + w * (vs_[i] - vs_[i - 1]);
            }
            break;
        }
    }
    return complemented_ ? 1.0 - v : v;
}

double InitialDatum::average(double lo, double hi) const {
    if (!(lo < hi)) throw ValidationError("average requires lo < hi");
    const double len = hi - lo;
    double v = 0.0;
    switch (kind_) {
        case Kind::step:
            v = std::clamp(0.0 - lo, 0.0, len) / len;
            break;
        case Kind::interval:
            v = std::max(0.0, std::min(hi, b_) - std::max(lo, a_)) / len;
            break;
        case Kind::bump: {
            if (height_ <= 1.0) {
                // integral of h exp(-z^2/2) dz over the scaled window
                double za = (lo - a_) / b_;
                double zb = (hi - a_) / b_;
                double integral = height_ * b_ * std::sqrt(std::numbers::pi_v<double> / 2.0) *
                                  (std::erf(zb / std::numbers::sqrt2_v<double>) -
                                   std::erf(za / std::numbers::sqrt2_v<double>));
                v = integral / len;
            } else {
                // Clipping makes the closed form messy; composite Simpson.
                const int panels = 16;
                double h = len / panels;
                double s = 0.0;
                InitialDatum plain = *this;
                plain.complemented_ = false;
                for (int i = 0; i < panels; ++i) {
                    double x0 = lo + i * h;
                    s += (plain(x0) + 4.0 * plain(x0 + 0.5 * h) + plain(x0 + h)) / 6.0;
                }
                v = s / panels;
            }
            break;
        }
        case Kind::tabulated: {
            // Exact integral of the clamped piecewise-linear interpolant.
            InitialDatum plain = *this;
            plain.complemented_ = false;
            std::vector<double> knots{lo, hi};
            for (double x : xs_)
                if (x > lo && x < hi) knots.push_back(x);
            std::sort(knots.begin(), knots.end());
            double integral = 0.0;
            for (size_t i = 0; i + 1 < knots.size(); ++i)
                integral +=
                    0.5 * (plain(knots[i]) + plain(knots[i + 1])) * (knots[i + 1] - knots[i]);
            v = integral / len;
            break;
        }
    }
    return complemented_ ? 1.0 - v : v;
}

InitialDatum InitialDatum::complement() const {
    InitialDatum g = *this;
    g.complemented_ = !g.complemented_;
    return g;
}

bool InitialDatum::in_unit_range() const {
    switch (kind_) {
        case Kind::step:
        case Kind::interval:
            return true;
        case Kind::bump:
            return height_ >= 0.0 && height_ <= 1.0;
        case Kind::tabulated: {
            auto [lo, hi] = std::minmax_element(vs_.begin(), vs_.end());
            return *lo >= -1e-12 && *hi <= 1.0 + 1e-12;
        }
    }
    return false;
}

std::string InitialDatum::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::step:
            os << "step";
            break;
        case Kind::interval:
            os << "interval:" << a_ << "," << b_;
            break;
        case Kind::bump:
            os << "bump:" << a_ << "," << b_ << "," << height_;
            break;
        case Kind::tabulated:
            os << "tabulated[" << xs_.size() << "]";
            break;
    }
    if (complemented_) os << " (complemented)";
    return os.str();
}

// --- Poisson-binomial ---------------------------------------------------------

CountDistribution poisson_binomial(std::span<const double> q) {
    for (double p : q)
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("poisson_binomial probabilities must lie in [0,1]");
    CountDistribution d;
    d.probs.assign(q.size() + 1, 0.0);
    d.probs[0] = 1.0;
    // DP convolution: fold in one trial at a time.
    for (size_t i = 0; i < q.size(); ++i) {
        for (size_t k = i + 1; k-- > 0;) {
            d.probs[k + 1] += d.probs[k] * q[i];
            d.probs[k] *= 1.0 - q[i];
        }
    }
    return d;
}

// --- deterministic replicate runner --------------------------------------------

namespace {

constexpr std::int64_t kChunk = 4096;

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        double y = v - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

struct Moments {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    std::int64_t n = 0;
};

// Runs fn for every replicate and accumulates the first four power sums per
// component.  Chunks are filled in any order by the workers, but combined in
// index order, so the totals do not depend on the worker count.
std::vector<Moments> run_moments(const EstimatorOptions& opt, std::size_t width,
                                 const std::function<void(std::int64_t, std::span<double>)>& fn) {
    if (opt.n_replicates < 1) throw ValidationError("n_replicates must be >= 1");
    const std::int64_t n = opt.n_replicates;
    const std::int64_t n_chunks = (n + kChunk - 1) / kChunk;
    struct ChunkSums {
        std::vector<std::array<double, 4>> comp;
    };
    std::vector<ChunkSums> chunks(static_cast<size_t>(n_chunks));

    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&]() {
        std::vector<double> out(width);
        std::vector<std::array<KahanSum, 4>> acc(width);
        try {
            std::int64_t c;
            while ((c = next.fetch_add(1)) < n_chunks) {
                if (failed.load(std::memory_order_relaxed)) return;
                for (auto& a : acc) a = {};
                const std::int64_t lo = c * kChunk;
                const std::int64_t hi = std::min(n, lo + kChunk);
                for (std::int64_t i = lo; i < hi; ++i) {
                    fn(i, out);
                    for (size_t w = 0; w < width; ++w) {
                        double v = out[w];
                        double v2 = v * v;
                        acc[w][0].add(v);
                        acc[w][1].add(v2);
                        acc[w][2].add(v2 * v);
                        acc[w][3].add(v2 * v2);
                    }
                }
                auto& sums = chunks[static_cast<size_t>(c)].comp;
                sums.resize(width);
                for (size_t w = 0; w < width; ++w)
                    sums[w] = {acc[w][0].sum, acc[w][1].sum, acc[w][2].sum, acc[w][3].sum};
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            failed.store(true, std::memory_order_relaxed);
        }
    };

    int workers = std::max(1, opt.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    std::vector<Moments> totals(width);
    std::vector<std::array<KahanSum, 4>> acc(width);
    for (auto& chunk : chunks)
        for (size_t w = 0; w < width; ++w)
            for (int j = 0; j < 4; ++j) acc[w][static_cast<size_t>(j)].add(chunk.comp[w][static_cast<size_t>(j)]);
    for (size_t w = 0; w < width; ++w) {
        totals[w] = {acc[w][0].sum, acc[w][1].sum, acc[w][2].sum, acc[w][3].sum, n};
    }
    return totals;
}

Estimate to_estimate(const Moments& m, CiKind ci) {
    Estimate e;
    e.n_replicates = m.n;
    const double n = static_cast<double>(m.n);
    e.mean = m.s1 / n;
    double var = 0.0;
    if (m.n > 1) var = std::max(0.0, (m.s2 - n * e.mean * e.mean) / (n - 1.0));
    e.std_error = std::sqrt(var / n);
    if (ci == CiKind::wilson) {
        // Wilson score interval on the mean treated as a proportion.
        double p = std::clamp(e.mean, 0.0, 1.0);
        double z2 = kZ95 * kZ95;
        double denom = 1.0 + z2 / n;
        double center = (p + z2 / (2.0 * n)) / denom;
        double half = kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        e.ci_low = center - half;
        e.ci_high = center + half;
    } else {
        e.ci_low = e.mean - kZ95 * e.std_error;
        e.ci_high = e.mean + kZ95 * e.std_error;
    }
    return e;
}

double excess_free_kurtosis(const Moments& m) {
    const double n = static_cast<double>(m.n);
    double mean = m.s1 / n;
    double m2 = m.s2 / n - mean * mean;
    if (m2 <= 0.0) return 0.0;
    double m4 = m.s4 / n - 4.0 * mean * m.s3 / n + 6.0 * mean * mean * m.s2 / n -
                3.0 * mean * mean * mean * mean;
    return m4 / (m2 * m2);
}

void require_model_valid(const Model& m, const char* who) {
    ModelDiagnostics d = validate(m);
    if (!d.valid) {
        std::string msg = std::string(who) + ": model fails validation:";
        for (auto& issue : d.issues) msg += "\n  - " + issue;
        throw ValidationError(msg);
    }
}

void require_voting_inputs(const InitialDatum& g, double t, const char* who) {
    if (!g.in_unit_range())
        throw ValidationError(std::string(who) + ": datum range must lie in [0,1]");
    if (t < 0.0) throw ValidationError(std::string(who) + ": t must be >= 0");
}

// u(0, x) = g(x) with no randomness left to average over.
Estimate exact_datum_estimate(const InitialDatum& g, std::span<const double> x0,
                              const EstimatorOptions& opt) {
    Estimate e;
    e.mean = g(x0);
    e.std_error = 0.0;
    e.n_replicates = opt.n_replicates;
    e.ci_low = e.ci_high = e.mean;
    return e;
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

int count_ones(std::span<const double> votes) {
    int k = 0;
    for (double v : votes) k += v > 0.5 ? 1 : 0;
    return k;
}

}  // namespace

std::vector<Estimate> run_replicates(
    const EstimatorOptions& opt, std::size_t width,
    const std::function<void(std::int64_t, std::span<double>)>& fn) {
    auto moments = run_moments(opt, width, fn);
    std::vector<Estimate> out;
    out.reserve(width);
    for (auto& m : moments) out.push_back(to_estimate(m, opt.ci));
    return out;
}

Estimate run_scalar_replicates(const EstimatorOptions& opt,
                               const std::function<double(std::int64_t)>& fn) {
    auto wrapped = [&fn](std::int64_t i, std::span<double> out) { out[0] = fn(i); };
    return run_replicates(opt, 1, wrapped)[0];
}

// --- single-replicate fold values ------------------------------------------------

double voting_replicate(const RandomOutcomeModel& model, const InitialDatum& g, double t,
                        std::span<const double> x0, NodeRng root, VoteMode mode,
                        const FoldLimits& limits) {
    GenealogyParams params{model.rate, model.offspring, static_cast<int>(x0.size())};
    if (mode == VoteMode::sampled) {
        auto leaf = [&](const LeafRecord& rec, NodeRng& rng) {
            return rng.next_unit() <= g(rec.position) ? 1.0 : 0.0;
        };
        auto combine = [&](const BranchRecord& br, std::span<double> votes, NodeRng& rng) {
            double a = model.alpha.at(br.arity)[static_cast<size_t>(count_ones(votes))];
            return rng.next_unit() <= a ? 1.0 : 0.0;
        };
        return fold_tree(params, t, x0, root, leaf, combine, limits);
    }
    auto leaf = [&](const LeafRecord& rec, NodeRng&) { return g(rec.position); };
    auto combine = [&](const BranchRecord& br, std::span<double> qs, NodeRng&) {
        CountDistribution counts = poisson_binomial(qs);
        const auto& row = model.alpha.at(br.arity);
        double q = 0.0;
        for (size_t k = 0; k < counts.probs.size(); ++k) q += counts.probs[k] * row[k];
        return clamp_unit(q);
    };
    return fold_tree(params, t, x0, root, leaf, combine, limits);
}

double voting_replicate(const CompositeLabelModel& model, const InitialDatum& g, double t,
                        std::span<const double> x0, NodeRng root, VoteMode mode,
                        const FoldLimits& limits) {
    GenealogyParams params{model.rate, OffspringDistribution::pure(model.arity),
                           static_cast<int>(x0.size())};
    if (mode == VoteMode::sampled) {
        auto leaf = [&](const LeafRecord& rec, NodeRng& rng) {
            return rng.next_unit() <= g(rec.position) ? 1.0 : 0.0;
        };
        auto combine = [&](const BranchRecord&, std::span<double> votes, NodeRng& rng) {
            // Draw the label first, then vote by that label's table.
            double u = rng.next_unit_co();
            double acc = 0.0;
            const LabeledTable* chosen = &model.labels.back();
            for (const auto& lab : model.labels) {
                acc += lab.prob;
                if (u < acc) {
                    chosen = &lab;
                    break;
                }
            }
            double a = chosen->alpha[static_cast<size_t>(count_ones(votes))];
            return rng.next_unit() <= a ? 1.0 : 0.0;
        };
        return fold_tree(params, t, x0, root, leaf, combine, limits);
    }
    // Conditional mode mixes the label tables analytically.
    const std::vector<double> mixed = model.mixed_alpha();
    auto leaf = [&](const LeafRecord& rec, NodeRng&) { return g(rec.position); };
    auto combine = [&](const BranchRecord&, std::span<double> qs, NodeRng&) {
        CountDistribution counts = poisson_binomial(qs);
        double q = 0.0;
        for (size_t k = 0; k < counts.probs.size(); ++k) q += counts.probs[k] * mixed[k];
        return clamp_unit(q);
    };
    return fold_tree(params, t, x0, root, leaf, combine, limits);
}

double threshold_replicate(const RandomThresholdModel& model, const InitialDatum& g, double t,
                           std::span<const double> x0, NodeRng root, ThresholdMode mode,
                           const FoldLimits& limits) {
    if (mode == ThresholdMode::via_outcome)
        return voting_replicate(to_outcome(model), g, t, x0, root, VoteMode::conditional, limits);
    GenealogyParams params{model.rate, OffspringDistribution::pure(model.arity),
                           static_cast<int>(x0.size())};
    auto leaf = [&](const LeafRecord& rec, NodeRng& rng) {
        return rng.next_unit() <= g(rec.position) ? 1.0 : 0.0;
    };
    auto combine = [&](const BranchRecord&, std::span<double> votes, NodeRng& rng) {
        double u = rng.next_unit_co();
        double acc = 0.0;
        int threshold = model.arity;
        for (size_t j = 0; j < model.zeta.size(); ++j) {
            acc += model.zeta[j];
            if (u < acc) {
                threshold = static_cast<int>(j);
                break;
            }
        }
        return count_ones(votes) >= threshold ? 1.0 : 0.0;
    };
    return fold_tree(params, t, x0, root, leaf, combine, limits);
}

double recursive_replicate(const RecursiveModel& model, const InitialDatum& g, double t,
                           std::span<const double> x0, NodeRng root, const FoldLimits& limits) {
    GenealogyParams params{RecursiveModel::rate, OffspringDistribution::pure(model.arity),
                           static_cast<int>(x0.size())};
    auto leaf = [&](const LeafRecord& rec, NodeRng&) { return g(rec.position); };
    auto combine = [&](const BranchRecord& br, std::span<double> values, NodeRng&) {
        double v = model.combine(values);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "recursive propagation produced a non-finite value at depth " << br.depth
               << " (t = " << br.time << "); the run was aborted";
            throw NumericsError(os.str());
        }
        return v;
    };
    return fold_tree(params, t, x0, root, leaf, combine, limits);
}

double product_replicate(const GenealogyParams& params, const InitialDatum& g, double t,
                         std::span<const double> x0, NodeRng root, const FoldLimits& limits) {
    auto leaf = [&](const LeafRecord& rec, NodeRng&) { return g(rec.position); };
    auto combine = [&](const BranchRecord&, std::span<double> values, NodeRng&) {
        double prod = 1.0;
        for (double v : values) prod *= v;
        return prod;
    };
    return fold_tree(params, t, x0, root, leaf, combine, limits);
}

double max_position_replicate(const GenealogyParams& params, double t, NodeRng root,
                              const FoldLimits& limits) {
    const double origin[1] = {0.0};
    auto leaf = [](const LeafRecord& rec, NodeRng&) { return rec.position[0]; };
    auto combine = [](const BranchRecord&, std::span<double> values, NodeRng&) {
        return *std::max_element(values.begin(), values.end());
    };
    return fold_tree(params, t, std::span<const double>(origin), root, leaf, combine, limits);
}

// --- estimators -----------------------------------------------------------------

Estimate estimate_voting(const RandomOutcomeModel& model, const InitialDatum& g, double t,
                         std::span<const double> x0, const EstimatorOptions& opt, VoteMode mode) {
    require_model_valid(model, "estimate_voting");
    require_voting_inputs(g, t, "estimate_voting");
    if (t == 0.0) return exact_datum_estimate(g, x0, opt);
    SeedScheme seeds{opt.master_seed};
    return run_scalar_replicates(opt, [&](std::int64_t i) {
        return voting_replicate(model, g, t, x0, seeds.replicate_root(i), mode, opt.limits);
    });
}

Estimate estimate_voting(const CompositeLabelModel& model, const InitialDatum& g, double t,
                         std::span<const double> x0, const EstimatorOptions& opt, VoteMode mode) {
    require_model_valid(model, "estimate_voting");
    require_voting_inputs(g, t, "estimate_voting");
    if (t == 0.0) return exact_datum_estimate(g, x0, opt);
    SeedScheme seeds{opt.master_seed};
    return run_scalar_replicates(opt, [&](std::int64_t i) {
        return voting_replicate(model, g, t, x0, seeds.replicate_root(i), mode, opt.limits);
    });
}

Estimate estimate_threshold(const RandomThresholdModel& model, const InitialDatum& g, double t,
                            std::span<const double> x0, const EstimatorOptions& opt,
                            ThresholdMode mode) {
    require_model_valid(model, "estimate_threshold");
    require_voting_inputs(g, t, "estimate_threshold");
    if (t == 0.0) return exact_datum_estimate(g, x0, opt);
    SeedScheme seeds{opt.master_seed};
    if (mode == ThresholdMode::via_outcome) {
        RandomOutcomeModel outcome = to_outcome(model);
        return run_scalar_replicates(opt, [&](std::int64_t i) {
            return voting_replicate(outcome, g, t, x0, seeds.replicate_root(i),
                                    VoteMode::conditional, opt.limits);
        });
    }
    return run_scalar_replicates(opt, [&](std::int64_t i) {
        return threshold_replicate(model, g, t, x0, seeds.replicate_root(i), mode, opt.limits);
    });
}

Estimate estimate_recursive(const RecursiveModel& model, const InitialDatum& g, double t,
                            std::span<const double> x0, const EstimatorOptions& opt) {
    require_model_valid(model, "estimate_recursive");
    if (t < 0.0) throw ValidationError("estimate_recursive: t must be >= 0");
    if (model.arity < 2)
        throw ValidationError("estimate_recursive: arity must be >= 2 (branching needs "
                              "at least two children); recompile with an explicit arity");
    SeedScheme seeds{opt.master_seed};
    auto fn = [&](std::int64_t i, std::span<double> out) {
        out[0] = recursive_replicate(model, g, t, x0, seeds.replicate_root(i), opt.limits);
    };
    auto moments = run_moments(opt, 1, fn);
    Estimate e = to_estimate(moments[0], opt.ci);
    double kurt = excess_free_kurtosis(moments[0]);
    if (kurt > 10.0) {
        std::ostringstream os;
        os << "replicate values are heavy-tailed (kurtosis " << kurt
           << " > 10); the reported standard error may be unreliable";
        e.warning = os.str();
    }
    return e;
}

Estimate estimate_mckean_product(const GenealogyParams& params, const InitialDatum& g, double t,
                                 std::span<const double> x0, const EstimatorOptions& opt) {
    if (t < 0.0) throw ValidationError("estimate_mckean_product: t must be >= 0");
    SeedScheme seeds{opt.master_seed};
    return run_scalar_replicates(opt, [&](std::int64_t i) {
        return product_replicate(params, g, t, x0, seeds.replicate_root(i), opt.limits);
    });
}

std::vector<Estimate> estimate_max_cdf(const GenealogyParams& params, double t,
                                       std::span<const double> xs, const EstimatorOptions& opt) {
    if (params.dimension != 1)
        throw ValidationError("estimate_max_cdf requires dimension 1");
    if (t < 0.0) throw ValidationError("estimate_max_cdf: t must be >= 0");
    if (xs.empty()) throw ValidationError("estimate_max_cdf: empty threshold list");
    SeedScheme seeds{opt.master_seed};
    auto fn = [&](std::int64_t i, std::span<double> out) {
        double m = max_position_replicate(params, t, seeds.replicate_root(i), opt.limits);
        for (size_t j = 0; j < xs.size(); ++j) out[j] = m > xs[j] ? 1.0 : 0.0;
    };
    return run_replicates(opt, xs.size(), fn);
}

}  // namespace bbmvote
