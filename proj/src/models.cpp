#include "bbmvote/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bbmvote/errors.hpp"

namespace bbmvote {

namespace {

constexpr double kProbTol = 1e-12;

// Clamps values that are within tolerance of [0,1]; throws via the caller
// for anything further out.
bool clamp01(double& x, double tol = kProbTol) {
    if (x < 0.0) {
        if (x < -tol) return false;
        x = 0.0;
    } else if (x > 1.0) {
        if (x > 1.0 + tol) return false;
        x = 1.0;
    }
    return true;
}

void require_boundary_roots(const Polynomial& f, const char* who) {
    if (std::abs(f.eval(0.0)) > kProbTol || std::abs(f.eval(1.0)) > kProbTol)
        throw ValidationError(std::string(who) + " requires f(0) = f(1) = 0, got f(0) = " +
                              std::to_string(f.eval(0.0)) + ", f(1) = " +
                              std::to_string(f.eval(1.0)));
}

// Shared core of the two compilers: alpha_k = k/N + b_k/beta.
std::vector<double> alpha_from_bernstein(const BernsteinVector& b, double beta) {
    const int n = b.order;
    std::vector<double> alpha(static_cast<size_t>(n) + 1);
    alpha[0] = 0.0;
    alpha[static_cast<size_t>(n)] = 1.0;
    for (int k = 1; k < n; ++k) {
        double a = static_cast<double>(k) / n + b.b[static_cast<size_t>(k)] / beta;
        if (!clamp01(a))
            throw RateTooSmallError(
                "rate " + std::to_string(beta) + " is too small: alpha_" + std::to_string(k) +
                    " = " + std::to_string(a) + " falls outside [0,1]",
                k);
        alpha[static_cast<size_t>(k)] = a;
    }
    return alpha;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

// --- OffspringDistribution ---------------------------------------------------

OffspringDistribution::OffspringDistribution(std::map<int, double> probs) {
    double sum = 0.0;
    for (auto& [k, p] : probs) {
        if (k < 2) throw ValidationError("offspring counts must be >= 2, got " + std::to_string(k));
        if (!std::isfinite(p) || !clamp01(p))
            throw ValidationError("offspring probability p_" + std::to_string(k) +
                                  " = " + std::to_string(p) + " is not in [0,1]");
        sum += p;
        if (p > 0.0) {
            probs_[k] = p;
            max_children_ = std::max(max_children_, k);
        }
    }
    if (probs_.empty() || std::abs(sum - 1.0) > kProbTol)
        throw ValidationError("offspring probabilities must sum to 1, got " + std::to_string(sum));
}

OffspringDistribution OffspringDistribution::pure(int n) {
    return OffspringDistribution({{n, 1.0}});
}

double OffspringDistribution::mean_children() const {
    double m = 0.0;
    for (auto& [k, p] : probs_) m += k * p;
    return m;
}

std::optional<int> OffspringDistribution::pure_arity() const {
    if (probs_.size() == 1) return probs_.begin()->first;
    return std::nullopt;
}

int OffspringDistribution::sample(double u01) const {
    double acc = 0.0;
    for (auto& [k, p] : probs_) {
        acc += p;
        if (u01 < acc) return k;
    }
    return max_children_;
}

// --- RecursiveModel ----------------------------------------------------------

double RecursiveModel::symmetric_value(std::span<const double> children) const {
    // Elementary symmetric sums e_0..e_N by incremental products.
    const size_t n = children.size();
    std::vector<double> e(n + 1, 0.0);
    e[0] = 1.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = std::min(i + 1, n); j >= 1; --j) e[j] += children[i] * e[j - 1];
    double s = 0.0;
    for (size_t j = 0; j <= n && j < symmetric_coeffs.size(); ++j)
        s += symmetric_coeffs[j] * e[j];
    return s;
}

double RecursiveModel::combine(std::span<const double> children) const {
    double mean = 0.0;
    for (double v : children) mean += v;
    mean /= static_cast<double>(children.size());
    return symmetric_value(children) + mean;
}

// --- CompositeLabelModel -----------------------------------------------------

std::vector<double> CompositeLabelModel::mixed_alpha() const {
    std::vector<double> mixed(static_cast<size_t>(arity) + 1, 0.0);
    for (const auto& lab : labels)
        for (size_t k = 0; k < mixed.size(); ++k) mixed[k] += lab.prob * lab.alpha[k];
    return mixed;
}

// --- compilers -----------------------------------------------------------------

RandomOutcomeModel compile_outcome(const Polynomial& f, std::optional<double> rate_override) {
    require_boundary_roots(f, "compile_outcome");
    const int n = std::max(f.degree(), 2);
    BernsteinVector b = to_bernstein(f, n);
    double beta = rate_override.value_or(std::max(n * max_abs(b.b), 1.0));
    if (!(beta > 0.0)) throw ValidationError("branch rate must be positive");
    RandomOutcomeModel m{beta, OffspringDistribution::pure(n), {}};
    m.alpha[n] = alpha_from_bernstein(b, beta);
    return m;
}

RandomThresholdModel compile_threshold(const Polynomial& f, std::optional<double> rate_override) {
    require_boundary_roots(f, "compile_threshold");
    const int n = std::max(f.degree(), 2);
    BernsteinVector b = to_bernstein(f, n);
    double beta = rate_override.value_or(std::max(2.0 * n * max_abs(b.b), 1.0));
    if (!(beta > 0.0)) throw ValidationError("branch rate must be positive");
    std::vector<double> alpha = alpha_from_bernstein(b, beta);
    RandomThresholdModel m{beta, n, std::vector<double>(static_cast<size_t>(n) + 1, 0.0)};
    for (int k = 1; k <= n; ++k) {
        double z = alpha[static_cast<size_t>(k)] - alpha[static_cast<size_t>(k - 1)];
        if (!clamp01(z))
            throw RateTooSmallError("rate " + std::to_string(beta) +
                                        " breaks monotonicity: zeta_" + std::to_string(k) +
                                        " = " + std::to_string(z) + " is negative",
                                    k);
        m.zeta[static_cast<size_t>(k)] = z;
    }
    return m;
}

RecursiveModel compile_recursive(const Polynomial& f, std::optional<int> arity) {
    int n = arity.value_or(f.degree());
    if (n < 1) {
        if (f.degree() < 1)
            throw ValidationError(
                "compile_recursive: no arity is derivable from a constant polynomial; "
                "pass an explicit arity >= 1");
        throw ValidationError("compile_recursive: arity must be >= 1");
    }
    if (n < f.degree())
        throw ValidationError("compile_recursive: arity " + std::to_string(n) +
                              " is below the polynomial degree " + std::to_string(f.degree()));
    RecursiveModel m{n, f, std::vector<double>(static_cast<size_t>(n) + 1, 0.0)};
    for (int j = 0; j <= n; ++j)
        m.symmetric_coeffs[static_cast<size_t>(j)] = f[j] / static_cast<double>(binomial(n, j));
    return m;
}

// --- forward maps ----------------------------------------------------------------

namespace {

// sum_k C(n,k) alpha_k u^k (1-u)^(n-k) - u, expanded to the power basis.
Polynomial outcome_row_nonlinearity(const std::vector<double>& alpha, int n) {
    BernsteinVector bv{n, alpha};
    return from_bernstein(bv) - Polynomial::monomial(1);
}

}  // namespace

Polynomial forward_nonlinearity(const RandomOutcomeModel& m) {
    Polynomial f;
    for (auto& [n, p] : m.offspring.probs()) {
        auto it = m.alpha.find(n);
        if (it == m.alpha.end() || static_cast<int>(it->second.size()) != n + 1)
            throw ValidationError("outcome model lacks an alpha table for arity " +
                                  std::to_string(n));
        f = f + outcome_row_nonlinearity(it->second, n) * p;
    }
    return f * m.rate;
}

Polynomial forward_nonlinearity(const RandomThresholdModel& m) {
    // Inner cumulative sums turn the threshold law into an outcome table.
    std::vector<double> alpha(m.zeta.size());
    double acc = 0.0;
    for (size_t k = 0; k < m.zeta.size(); ++k) {
        acc += m.zeta[k];
        alpha[k] = acc;
    }
    return outcome_row_nonlinearity(alpha, m.arity) * m.rate;
}

Polynomial forward_nonlinearity(const RecursiveModel& m) { return m.f; }

Polynomial forward_nonlinearity(const CompositeLabelModel& m) {
    return outcome_row_nonlinearity(m.mixed_alpha(), m.arity) * m.rate;
}

Polynomial forward_nonlinearity(const McKeanDecomposition& m) {
    // beta (v - sum_k p_k v^k) with v = 1-u.
    std::vector<double> q(static_cast<size_t>(m.offspring.max_children()) + 1, 0.0);
    q[1] = 1.0;
    for (auto& [k, p] : m.offspring.probs()) q[static_cast<size_t>(k)] -= p;
    return (Polynomial(std::move(q)) * m.rate).composed_with_one_minus_u();
}

Polynomial forward_nonlinearity(const Model& m) {
    return std::visit([](const auto& x) { return forward_nonlinearity(x); }, m);
}

// --- conversions -------------------------------------------------------------------

RandomOutcomeModel to_outcome(const RandomThresholdModel& m) {
    if (static_cast<int>(m.zeta.size()) != m.arity + 1)
        throw ValidationError("threshold model must carry arity+1 zeta entries");
    if (std::abs(m.zeta[0]) > kProbTol)
        throw ValidationError("threshold model with zeta_0 > 0 has no outcome equivalent");
    std::vector<double> alpha(m.zeta.size(), 0.0);
    double acc = 0.0;
    for (size_t k = 0; k < m.zeta.size(); ++k) {
        acc += m.zeta[k];
        alpha[k] = acc;
        if (!clamp01(alpha[k]))
            throw ValidationError("threshold cumulative sum leaves [0,1] at k = " +
                                  std::to_string(k));
    }
    alpha[0] = 0.0;
    alpha.back() = 1.0;
    return RandomOutcomeModel{m.rate, OffspringDistribution::pure(m.arity), {{m.arity, alpha}}};
}

RandomThresholdModel to_threshold(const RandomOutcomeModel& m) {
    auto arity = m.offspring.pure_arity();
    if (!arity)
        throw ValidationError("only pure N-ary outcome models convert to threshold form");
    const auto& alpha = m.alpha.at(*arity);
    RandomThresholdModel t{m.rate, *arity,
                           std::vector<double>(static_cast<size_t>(*arity) + 1, 0.0)};
    t.zeta[0] = alpha[0];
    for (int k = 1; k <= *arity; ++k) {
        double z = alpha[static_cast<size_t>(k)] - alpha[static_cast<size_t>(k - 1)];
        if (!clamp01(z))
            throw ValidationError("alpha table is not nondecreasing at k = " + std::to_string(k) +
                                  "; the model is not threshold-convertible");
        t.zeta[static_cast<size_t>(k)] = z;
    }
    return t;
}

// --- McKean decomposition -------------------------------------------------------------

McKeanResult mckean_decompose(const Polynomial& f) {
    require_boundary_roots(f, "mckean_decompose");
    // Coefficients of f on powers of v = 1-u.
    Polynomial g = f.composed_with_one_minus_u();
    const auto& c = g.coeffs();
    double tol = 1e-9 * std::max(1.0, max_abs(c));

    double beta = g[1];
    if (beta <= tol)
        return NotMcKean{McKeanViolation::nonpositive_rate, 1,
                         "coefficient of (1-u) is " + std::to_string(beta) +
                             "; a McKean form needs a positive branch rate"};
    double tail = 0.0;
    for (int j = 2; j <= g.degree(); ++j) {
        double cj = g[j];
        if (cj > tol)
            return NotMcKean{McKeanViolation::positive_high_term, j,
                             "coefficient of (1-u)^" + std::to_string(j) + " is " +
                                 std::to_string(cj) + " > 0"};
        tail += cj;
    }
    if (std::abs(-tail - beta) > 1e-9 * std::max(1.0, beta))
        return NotMcKean{McKeanViolation::mass_mismatch, -1,
                         "implied offspring probabilities sum to " + std::to_string(-tail / beta)};

    std::map<int, double> probs;
    double sum = 0.0;
    for (int j = 2; j <= g.degree(); ++j) {
        double p = std::max(0.0, -g[j] / beta);
        if (p > 0.0) {
            probs[j] = p;
            sum += p;
        }
    }
    for (auto& [k, p] : probs) p /= sum;  // renormalize the 1e-9 slack away
    McKeanDecomposition d{beta, OffspringDistribution(std::move(probs)), 0.0};
    d.lambda = beta * (d.offspring.mean_children() - 1.0);
    return d;
}

// --- validate ----------------------------------------------------------------------------

namespace {

void check_alpha_row(const std::vector<double>& alpha, int n, const std::string& who,
                     ModelDiagnostics& d) {
    if (static_cast<int>(alpha.size()) != n + 1) {
        d.valid = false;
        d.issues.push_back(who + ": expected " + std::to_string(n + 1) + " entries, found " +
                           std::to_string(alpha.size()));
        return;
    }
    if (std::abs(alpha.front()) > kProbTol || std::abs(alpha.back() - 1.0) > kProbTol) {
        d.valid = false;
        d.issues.push_back(who + ": endpoints must be alpha_0 = 0 and alpha_n = 1");
    }
    for (int k = 0; k <= n; ++k) {
        double a = alpha[static_cast<size_t>(k)];
        if (a < -kProbTol || a > 1.0 + kProbTol) {
            d.valid = false;
            d.issues.push_back(who + ": alpha_" + std::to_string(k) + " = " + std::to_string(a) +
                               " outside [0,1]");
        }
        if (k > 0 && a < alpha[static_cast<size_t>(k - 1)] - kProbTol) d.alpha_monotone = false;
    }
}

}  // namespace

ModelDiagnostics validate(const Model& model) {
    ModelDiagnostics d;
    if (const auto* m = std::get_if<RandomOutcomeModel>(&model)) {
        if (!(m->rate > 0.0)) {
            d.valid = false;
            d.issues.push_back("rate must be positive");
        }
        for (auto& [n, p] : m->offspring.probs()) {
            auto it = m->alpha.find(n);
            if (it == m->alpha.end()) {
                d.valid = false;
                d.issues.push_back("missing alpha table for arity " + std::to_string(n));
                continue;
            }
            check_alpha_row(it->second, n, "alpha[" + std::to_string(n) + "]", d);
        }
        d.threshold_convertible =
            d.valid && d.alpha_monotone && m->offspring.pure_arity().has_value();
    } else if (const auto* m = std::get_if<RandomThresholdModel>(&model)) {
        double sum = 0.0;
        for (size_t k = 0; k < m->zeta.size(); ++k) {
            double z = m->zeta[k];
            sum += z;
            if (z < -kProbTol || z > 1.0 + kProbTol) {
                d.valid = false;
                d.issues.push_back("zeta_" + std::to_string(k) + " = " + std::to_string(z) +
                                   " outside [0,1]");
            }
        }
        if (static_cast<int>(m->zeta.size()) != m->arity + 1) {
            d.valid = false;
            d.issues.push_back("zeta must carry arity+1 entries");
        }
        if (std::abs(sum - 1.0) > kProbTol) {
            d.valid = false;
            std::ostringstream os;
            os << "zeta sums to " << sum << " (deficit " << 1.0 - sum << ")";
            d.issues.push_back(os.str());
        }
        if (!(m->rate > 0.0)) {
            d.valid = false;
            d.issues.push_back("rate must be positive");
        }
    } else if (const auto* m = std::get_if<RecursiveModel>(&model)) {
        // s_j must reconstruct f coefficient-wise.
        for (int j = 0; j <= m->arity; ++j) {
            double back = (j < static_cast<int>(m->symmetric_coeffs.size()))
                              ? m->symmetric_coeffs[static_cast<size_t>(j)] *
                                    static_cast<double>(binomial(m->arity, j))
                              : 0.0;
            if (std::abs(back - m->f[j]) > 1e-9 * std::max(1.0, std::abs(m->f[j]))) {
                d.valid = false;
                d.issues.push_back("symmetric_coeffs do not reconstruct f at degree " +
                                   std::to_string(j));
            }
        }
        d.threshold_convertible = false;
    } else if (const auto* m = std::get_if<CompositeLabelModel>(&model)) {
        double sum = 0.0;
        for (const auto& lab : m->labels) {
            sum += lab.prob;
            if (lab.prob < -kProbTol || lab.prob > 1.0 + kProbTol) {
                d.valid = false;
                d.issues.push_back("label '" + lab.name + "' probability outside [0,1]");
            }
            check_alpha_row(lab.alpha, m->arity, "label '" + lab.name + "'", d);
        }
        if (std::abs(sum - 1.0) > kProbTol) {
            d.valid = false;
            d.issues.push_back("label probabilities sum to " + std::to_string(sum));
        }
        if (!(m->rate > 0.0)) {
            d.valid = false;
            d.issues.push_back("rate must be positive");
        }
        // Convertibility is judged on the analytically mixed table.
        std::vector<double> mixed = m->mixed_alpha();
        for (size_t k = 1; k < mixed.size(); ++k)
            if (mixed[k] < mixed[k - 1] - kProbTol) d.alpha_monotone = false;
        d.threshold_convertible = d.valid && d.alpha_monotone;
    }
    return d;
}

// --- catalog ----------------------------------------------------------------------------

namespace {

std::vector<double> unbiased_row(int n) {
    std::vector<double> a(static_cast<size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) a[static_cast<size_t>(k)] = static_cast<double>(k) / n;
    return a;
}

std::vector<double> uniform_bias_row(int n, double gamma) {
    std::vector<double> a(static_cast<size_t>(n) + 1);
    for (int k = 0; k < n; ++k) {
        double v = (1.0 + gamma) * static_cast<double>(k) / n;
        if (!clamp01(v))
            throw ValidationError("uniform bias gamma = " + std::to_string(gamma) +
                                  " violates gamma <= 1/(n-1) for arity " + std::to_string(n));
        a[static_cast<size_t>(k)] = v;
    }
    a[static_cast<size_t>(n)] = 1.0;
    return a;
}

std::vector<double> group_row(int n, int m, double gamma) {
    std::vector<double> a(static_cast<size_t>(n) + 1);
    for (int k = 0; k < n; ++k) {
        double v = static_cast<double>(k) / n;
        if (k >= m)
            v += gamma * static_cast<double>(binomial(k, m)) /
                 static_cast<double>(binomial(n, m));
        if (!clamp01(v))
            throw ValidationError(
                "group bias violates k/n + gamma*C(k,m)/C(n,m) <= 1 at k = " + std::to_string(k) +
                ", n = " + std::to_string(n));
        a[static_cast<size_t>(k)] = v;
    }
    a[static_cast<size_t>(n)] = 1.0;
    return a;
}

}  // namespace

std::vector<std::string> catalog_names() {
    return {"heat", "efp_allen_cahn", "mckean", "uniform_bias", "group", "evs"};
}

Model catalog(const std::string& name, const CatalogParams& params) {
    const double beta = params.beta.value_or(1.0);
    if (!(beta > 0.0)) throw ValidationError("catalog: beta must be positive");
    OffspringDistribution offspring =
        params.offspring.value_or(OffspringDistribution::pure(2));

    if (name == "heat") {
        RandomOutcomeModel m{beta, offspring, {}};
        for (auto& [n, p] : offspring.probs()) m.alpha[n] = unbiased_row(n);
        return m;
    }
    if (name == "efp_allen_cahn") {
        return RandomOutcomeModel{beta, OffspringDistribution::pure(3),
                                  {{3, {0.0, 0.0, 1.0, 1.0}}}};
    }
    if (name == "mckean") {
        RandomOutcomeModel m{beta, offspring, {}};
        for (auto& [n, p] : offspring.probs()) {
            std::vector<double> a(static_cast<size_t>(n) + 1, 1.0);
            a[0] = 0.0;
            m.alpha[n] = a;
        }
        return m;
    }
    if (name == "uniform_bias") {
        if (!params.gamma) throw ValidationError("uniform_bias requires gamma");
        double gamma = *params.gamma;
        if (gamma < 0.0) throw ValidationError("uniform_bias requires gamma >= 0");
        RandomOutcomeModel m{beta, offspring, {}};
        for (auto& [n, p] : offspring.probs()) m.alpha[n] = uniform_bias_row(n, gamma);
        return m;
    }
    if (name == "group") {
        if (!params.gamma || !params.m)
            throw ValidationError("group requires gamma and the group size m");
        int m_size = *params.m;
        double gamma = *params.gamma;
        if (m_size < 1) throw ValidationError("group size m must be >= 1");
        if (gamma < 0.0) throw ValidationError("group requires gamma >= 0");
        for (auto& [n, p] : offspring.probs())
            if (n <= m_size)
                throw ValidationError("group model requires p_k = 0 for k <= m; found p_" +
                                      std::to_string(n) + " > 0 with m = " +
                                      std::to_string(m_size));
        RandomOutcomeModel m{beta, offspring, {}};
        for (auto& [n, p] : offspring.probs()) m.alpha[n] = group_row(n, m_size, gamma);
        return m;
    }
    if (name == "evs") {
        if (!params.n || !params.chi)
            throw ValidationError("evs requires n and chi");
        int n = *params.n;
        double chi = *params.chi;
        if (n < 2) throw ValidationError("evs requires n >= 2");
        double odds = n * chi - 1.0;  // mixing weight beta' = n*chi - 1
        if (odds < 0.0)
            throw ValidationError("evs requires n*chi - 1 >= 0; chi = " + std::to_string(chi) +
                                  " is below 1/n");
        const int arity = 2 * n - 1;
        double gamma = params.gamma.value_or(1.0 / (2.0 * n - 2.0));
        if (!(gamma > 0.0) || gamma > 1.0 / (2.0 * n - 2.0) + kProbTol)
            throw ValidationError("evs requires 0 < gamma <= 1/(2n-2) to keep the pulled table "
                                  "inside [0,1]; got gamma = " + std::to_string(gamma));
        CompositeLabelModel m{1.0, arity, {}};
        m.labels.push_back({"I", 1.0 / (1.0 + odds), uniform_bias_row(arity, gamma)});
        m.labels.push_back({"G", odds / (1.0 + odds), group_row(arity, n, gamma)});
        return m;
    }
    throw ValidationError("unknown catalog model '" + name +
                          "'; known names: heat, efp_allen_cahn, mckean, uniform_bias, group, evs");
}

}  // namespace bbmvote
