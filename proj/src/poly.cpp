#include "bbmvote/poly.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "bbmvote/errors.hpp"

namespace bbmvote {

namespace {

constexpr int kMaxBinomialN = 64;
constexpr int kMaxParseDegree = 256;

void require_finite(const std::vector<double>& c) {
    for (double v : c)
        if (!std::isfinite(v)) throw ValidationError("polynomial coefficient is not finite");
}

}  // namespace

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
    require_finite(coeffs_);
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
}

Polynomial Polynomial::monomial(int k, double c) {
    if (k < 0) throw ValidationError("monomial exponent must be nonnegative");
    std::vector<double> v(static_cast<size_t>(k) + 1, 0.0);
    v[static_cast<size_t>(k)] = c;
    return Polynomial(std::move(v));
}

double Polynomial::eval(double u) const {
    double s = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) s = s * u + *it;
    return s;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    std::vector<double> r(std::max(coeffs_.size(), o.coeffs_.size()), 0.0);
    for (size_t i = 0; i < r.size(); ++i) r[i] = (*this)[static_cast<int>(i)] + o[static_cast<int>(i)];
    return Polynomial(std::move(r));
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + (o * -1.0); }

Polynomial Polynomial::operator*(const Polynomial& o) const {
    if (is_zero() || o.is_zero()) return Polynomial();
    std::vector<double> r(coeffs_.size() + o.coeffs_.size() - 1, 0.0);
    for (size_t i = 0; i < coeffs_.size(); ++i)
        for (size_t j = 0; j < o.coeffs_.size(); ++j) r[i + j] += coeffs_[i] * o.coeffs_[j];
    return Polynomial(std::move(r));
}

Polynomial Polynomial::operator*(double s) const {
    std::vector<double> r = coeffs_;
    for (double& v : r) v *= s;
    return Polynomial(std::move(r));
}

Polynomial Polynomial::composed_with_one_minus_u() const {
    const int n = degree();
    if (n > kMaxBinomialN)
        throw ValidationError("degree above 64 is not supported");
    // (1-u)^k expands with alternating binomials.
    std::vector<double> r(coeffs_.size(), 0.0);
    for (int j = 0; j <= n; ++j) {
        double s = 0.0;
        for (int k = j; k <= n; ++k)
            s += coeffs_[static_cast<size_t>(k)] * static_cast<double>(binomial(k, j));
        r[static_cast<size_t>(j)] = (j % 2 == 0) ? s : -s;
    }
    return Polynomial(std::move(r));
}

std::string Polynomial::to_string() const {
    if (is_zero()) return "0";
    std::ostringstream out;
    bool first = true;
    char buf[64];
    for (int k = 0; k <= degree(); ++k) {
        double c = coeffs_[static_cast<size_t>(k)];
        if (c == 0.0) continue;
        double mag = std::abs(c);
        if (first) {
            if (c < 0) out << "-";
            first = false;
        } else {
            out << (c < 0 ? " - " : " + ");
        }
        bool unit = (mag == 1.0) && k > 0;
        if (!unit) {
            std::snprintf(buf, sizeof buf, "%.12g", mag);
            out << buf;
        }
        if (k >= 1) {
            if (!unit) out << "*";
            out << "u";
            if (k >= 2) out << "^" << k;
        }
    }
    return out.str();
}

namespace {

Polynomial parse_coeff_list(const std::string& text) {
    std::vector<double> c;
    size_t i = text.find('[') + 1;
    size_t end = text.rfind(']');
    if (end == std::string::npos) throw ValidationError("unterminated coefficient list: " + text);
    std::string inner = text.substr(i, end - i);
    for (char& ch : inner)
        if (ch == ',') ch = ' ';
    std::istringstream in(inner);
    double v;
    while (in >> v) c.push_back(v);
    if (!in.eof()) throw ValidationError("bad coefficient list: " + text);
    if (c.empty()) throw ValidationError("empty coefficient list: " + text);
    return Polynomial(std::move(c));
}

// One term of the power-basis text form: [number]['*']['u'['^'k]].
void parse_term(const std::string& term, double sign, std::vector<double>& acc) {
    if (term.empty()) throw ValidationError("empty term in polynomial text");
    const char* s = term.c_str();
    char* after = nullptr;
    double coef = std::strtod(s, &after);
    if (after == s) coef = 1.0;  // bare "u" or "u^k"
    std::string rest(after);
    int power = 0;
    if (!rest.empty()) {
        size_t p = 0;
        if (rest[p] == '*') ++p;
        if (p >= rest.size() || rest[p] != 'u')
            throw ValidationError("cannot parse polynomial term '" + term + "'");
        ++p;
        if (p == rest.size()) {
            power = 1;
        } else {
            if (rest[p] != '^') throw ValidationError("cannot parse polynomial term '" + term + "'");
            ++p;
            char* end2 = nullptr;
            long k = std::strtol(rest.c_str() + p, &end2, 10);
            if (end2 == rest.c_str() + p || *end2 != '\0' || k < 0 || k > kMaxParseDegree)
                throw ValidationError("bad exponent in polynomial term '" + term + "'");
            power = static_cast<int>(k);
        }
    }
    if (static_cast<int>(acc.size()) <= power) acc.resize(static_cast<size_t>(power) + 1, 0.0);
    acc[static_cast<size_t>(power)] += sign * coef;
}

}  // namespace

Polynomial Polynomial::parse(const std::string& text) {
    std::string t;
    t.reserve(text.size());
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
    if (t.empty()) throw ValidationError("empty polynomial text");
    if (t.front() == '[') return parse_coeff_list(t);

    std::vector<double> acc{0.0};
    std::string term;
    double sign = 1.0;
    for (char c : t) {
        if (c == '+' || c == '-') {
            if (term.empty()) {
                // Leading sign of the next term; folds if repeated.
                if (c == '-') sign = -sign;
                continue;
            }
            char last = term.back();
            if (last == 'e' || last == 'E' || last == '^') {
                term.push_back(c);  // exponent sign, e.g. "1e-3"
                continue;
            }
            parse_term(term, sign, acc);
            term.clear();
            sign = (c == '-') ? -1.0 : 1.0;
        } else {
            term.push_back(c);
        }
    }
    parse_term(term, sign, acc);
    return Polynomial(std::move(acc));
}

std::int64_t binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n || n > kMaxBinomialN)
        throw ValidationError("binomial(n,k) requires 0 <= k <= n <= 64");
    // Pascal's triangle; every entry fits in 63 bits for n <= 64.
    static const auto table = [] {
        std::array<std::array<std::int64_t, kMaxBinomialN + 1>, kMaxBinomialN + 1> t{};
        for (int i = 0; i <= kMaxBinomialN; ++i) {
            t[static_cast<size_t>(i)][0] = 1;
            for (int j = 1; j <= i; ++j)
                t[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    t[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)] +
                    (j <= i - 1 ? t[static_cast<size_t>(i - 1)][static_cast<size_t>(j)] : 0);
        }
        return t;
    }();
    return table[static_cast<size_t>(n)][static_cast<size_t>(k)];
}

double bernstein_basis(int k, int order, double u) {
    if (k < 0 || k > order) return 0.0;
    return static_cast<double>(binomial(order, k)) * std::pow(u, k) * std::pow(1.0 - u, order - k);
}

BernsteinVector to_bernstein(const Polynomial& p, int order) {
    if (order < 1) throw ValidationError("Bernstein order must be >= 1");
    if (order > kMaxBinomialN) throw ValidationError("Bernstein order above 64 is not supported");
    if (order < p.degree())
        throw ValidationError("Bernstein order " + std::to_string(order) +
                              " is below the polynomial degree " + std::to_string(p.degree()));
    BernsteinVector bv;
    bv.order = order;
    bv.b.assign(static_cast<size_t>(order) + 1, 0.0);
    const int deg = p.degree();
    for (int k = 0; k < order; ++k) {
        double s = 0.0;
        for (int j = 0; j <= std::min(k, deg); ++j)
            s += static_cast<double>(binomial(k, j)) / static_cast<double>(binomial(order, j)) *
                 p[j];
        bv.b[static_cast<size_t>(k)] = s;
    }
    // Summed high-to-low so that b_N matches Horner's p(1) bit for bit.
    double top = 0.0;
    for (int j = deg; j >= 0; --j) top += p[j];
    bv.b[static_cast<size_t>(order)] = top;
    return bv;
}

Polynomial from_bernstein(const BernsteinVector& bv) {
    const int n = bv.order;
    if (n < 1 || static_cast<int>(bv.b.size()) != n + 1)
        throw ValidationError("Bernstein vector must hold order+1 entries");
    if (n > kMaxBinomialN) throw ValidationError("Bernstein order above 64 is not supported");
    std::vector<double> f(static_cast<size_t>(n) + 1, 0.0);
    for (int j = 0; j <= n; ++j) {
        double s = 0.0;
        for (int k = 0; k <= j; ++k) {
            double term = static_cast<double>(binomial(j, k)) * bv.b[static_cast<size_t>(k)];
            s += ((j - k) % 2 == 0) ? term : -term;
        }
        f[static_cast<size_t>(j)] = static_cast<double>(binomial(n, j)) * s;
    }
    return Polynomial(std::move(f));
}

}  // namespace bbmvote
