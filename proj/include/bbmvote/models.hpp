#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bbmvote/poly.hpp"

namespace bbmvote {

// Offspring law of the branching motion: p_k for k >= 2 children, finitely
// many nonzero, summing to one.
class OffspringDistribution {
  public:
    explicit OffspringDistribution(std::map<int, double> probs);
    static OffspringDistribution pure(int n);

    const std::map<int, double>& probs() const { return probs_; }
    int max_children() const { return max_children_; }
    // First moment m1 = sum k p_k.
    double mean_children() const;
    // Is the whole mass on a single arity?
    std::optional<int> pure_arity() const;
    // Inverse-CDF draw from a uniform in [0,1).
    int sample(double u01) const;

    bool operator==(const OffspringDistribution&) const = default;

  private:
    std::map<int, double> probs_;
    int max_children_ = 0;
};

// Voting model where a parent with n children, k of which voted 1, votes 1
// with probability alpha[n][k].  alpha_{0n} = 0 and alpha_{nn} = 1 always.
struct RandomOutcomeModel {
    double rate = 1.0;
    OffspringDistribution offspring;
    std::map<int, std::vector<double>> alpha;  // alpha[n] has n+1 entries
};

// Voting model on pure N-ary branching where each vertex draws a threshold
// L ~ zeta and votes 1 iff at least L children voted 1.
struct RandomThresholdModel {
    double rate = 1.0;
    int arity = 2;
    std::vector<double> zeta;  // zeta_0..zeta_N, sums to one
};

// Value-propagation model: leaves carry g(X), parents combine children via
// the symmetric polynomial plus the children's mean.  Branch rate is 1.
struct RecursiveModel {
    int arity = 2;
    Polynomial f;
    std::vector<double> symmetric_coeffs;  // s_j = f_j / C(N,j)
    static constexpr double rate = 1.0;

    // S_N(u_1..u_N): symmetric combination over elementary symmetric sums.
    double symmetric_value(std::span<const double> children) const;
    // Parent rule S_N(u_1..u_N) + mean(u_1..u_N).
    double combine(std::span<const double> children) const;
};

// One labeled alpha-table of a composite model.
struct LabeledTable {
    std::string name;
    double prob = 0.0;
    std::vector<double> alpha;  // arity+1 entries
};

// Mixture model: each parent independently draws a label, then applies that
// label's outcome table.  Pure N-ary branching.
struct CompositeLabelModel {
    double rate = 1.0;
    int arity = 2;
    std::vector<LabeledTable> labels;

    // Probability-weighted average of the label tables.
    std::vector<double> mixed_alpha() const;
};

using Model =
    std::variant<RandomOutcomeModel, RandomThresholdModel, RecursiveModel, CompositeLabelModel>;

// McKean form f(u) = beta (1 - u - sum_k p_k (1-u)^k) with lambda = f'(0).
struct McKeanDecomposition {
    double rate = 1.0;
    OffspringDistribution offspring;
    double lambda = 0.0;
};

// Why a polynomial fails to be of McKean form.
enum class McKeanViolation {
    boundary,            // f(0) or f(1) nonzero
    nonpositive_rate,    // coefficient of (1-u) is not positive
    positive_high_term,  // some (1-u)^j coefficient, j >= 2, is positive
    mass_mismatch,       // implied offspring probabilities do not sum to 1
};

struct NotMcKean {
    McKeanViolation violation;
    int index = -1;  // offending power of (1-u), when applicable
    std::string detail;
};

using McKeanResult = std::variant<McKeanDecomposition, NotMcKean>;

// --- compilers -------------------------------------------------------------

// Random outcome representation of f (requires f(0)=f(1)=0): pure N-ary
// branching, alpha_kN = k/N + b_k[f]/beta.  The default rate is the bound
// N*max|b_k|, floored at 1.
RandomOutcomeModel compile_outcome(const Polynomial& f,
                                   std::optional<double> rate_override = std::nullopt);

// Random threshold representation of f: the stronger default rate
// 2N*max|b_k| makes alpha nondecreasing, so its differences are a law.
RandomThresholdModel compile_threshold(const Polynomial& f,
                                       std::optional<double> rate_override = std::nullopt);

// Recursive propagation representation of f; arity defaults to deg(f) and
// must be supplied explicitly for constant polynomials.
RecursiveModel compile_recursive(const Polynomial& f,
                                 std::optional<int> arity = std::nullopt);

// --- forward maps ----------------------------------------------------------

Polynomial forward_nonlinearity(const RandomOutcomeModel& m);
Polynomial forward_nonlinearity(const RandomThresholdModel& m);
Polynomial forward_nonlinearity(const RecursiveModel& m);
Polynomial forward_nonlinearity(const CompositeLabelModel& m);
Polynomial forward_nonlinearity(const McKeanDecomposition& m);
Polynomial forward_nonlinearity(const Model& m);

// --- conversions -----------------------------------------------------------

// Cumulative sums of zeta give an outcome table with the same nonlinearity.
RandomOutcomeModel to_outcome(const RandomThresholdModel& m);

// Differences of a nondecreasing outcome table give a threshold law.
// Requires pure arity and monotone alpha.
RandomThresholdModel to_threshold(const RandomOutcomeModel& m);

// --- analysis --------------------------------------------------------------

McKeanResult mckean_decompose(const Polynomial& f);

struct ModelDiagnostics {
    bool valid = true;
    bool alpha_monotone = true;        // alpha nondecreasing in k for every n
    bool threshold_convertible = true; // pure arity and monotone
    std::vector<std::string> issues;   // human-readable violations
};

ModelDiagnostics validate(const Model& m);

// --- catalog ---------------------------------------------------------------

struct CatalogParams {
    std::optional<OffspringDistribution> offspring;  // heat, mckean, uniform_bias, group
    std::optional<double> beta;                      // branch rate
    std::optional<double> gamma;                     // bias strength
    std::optional<int> m;                            // group size
    std::optional<int> n;                            // evs half-arity parameter
    std::optional<double> chi;                       // evs pulled/pushed parameter
};

// Named models: heat, efp_allen_cahn, mckean, uniform_bias, group, evs.
Model catalog(const std::string& name, const CatalogParams& params);

std::vector<std::string> catalog_names();

}  // namespace bbmvote
