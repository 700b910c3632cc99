#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bbmvote {

// Real-coefficient polynomial in the power basis, kept in canonical form:
// the leading coefficient is nonzero unless the polynomial is identically
// zero, which is stored as the single coefficient [0].
class Polynomial {
  public:
    Polynomial() : coeffs_{0.0} {}
    explicit Polynomial(std::vector<double> coeffs);

    static Polynomial zero() { return Polynomial(); }
    // c * u^k
    static Polynomial monomial(int k, double c = 1.0);

    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_zero() const { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }
    const std::vector<double>& coeffs() const { return coeffs_; }

    // Coefficient of u^k; zero beyond the degree.
    double operator[](int k) const {
        return (k >= 0 && k < static_cast<int>(coeffs_.size())) ? coeffs_[k] : 0.0;
    }

    // Horner evaluation.
    double eval(double u) const;

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double s) const;
    Polynomial operator-() const { return *this * -1.0; }

    // p(1 - u) expanded back into the power basis.
    Polynomial composed_with_one_minus_u() const;

    // Text form "c0 + c1*u + c2*u^2 + ...".
    std::string to_string() const;
    // Accepts the text form above or a bare coefficient list "[c0, c1, ...]".
    static Polynomial parse(const std::string& text);

    bool operator==(const Polynomial& o) const { return coeffs_ == o.coeffs_; }

  private:
    std::vector<double> coeffs_;  // coeffs_[k] multiplies u^k
};

// Coefficients b_0..b_N on the Bernstein basis of the stated order.
struct BernsteinVector {
    int order = 0;
    std::vector<double> b;
};

// Exact C(n, k) for 0 <= k <= n <= 64; throws ValidationError outside.
std::int64_t binomial(int n, int k);

// Bernstein basis polynomial B_{k,N}(u) = C(N,k) u^k (1-u)^(N-k).
double bernstein_basis(int k, int order, double u);

// Bernstein coefficients of p at the given order (>= degree, >= 1).
// b_0 and b_order reproduce p(0) and p(1) exactly.
BernsteinVector to_bernstein(const Polynomial& p, int order);

// Expansion of sum_k b_k B_{k,N} into the power basis.
Polynomial from_bernstein(const BernsteinVector& bv);

}  // namespace bbmvote
