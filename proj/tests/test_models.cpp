#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "bbmvote/errors.hpp"
#include "bbmvote/model_io.hpp"
#include "bbmvote/models.hpp"
#include "bbmvote/poly.hpp"
#include "oracles.hpp"

using namespace bbmvote;

namespace {

Polynomial fkpp() { return Polynomial({0.0, 1.0, -1.0}); }
Polynomial allen_cahn() { return Polynomial({0.0, -1.0, 3.0, -2.0}); }

void check_poly_close(const Polynomial& got, const Polynomial& want, double tol) {
    int deg = std::max(got.degree(), want.degree());
    for (int k = 0; k <= deg; ++k)
        CHECK(got[k] == doctest::Approx(want[k]).epsilon(tol).scale(1.0));
}

// Random polynomial of exact degree n with f(0) = f(1) = 0, coefficients in
// [-5, 5].
Polynomial random_boundary_poly(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> coeff(-5.0, 5.0);
    while (true) {
        std::vector<double> c(static_cast<size_t>(n) + 1, 0.0);
        double sum = 0.0;
        for (int j = 1; j < n; ++j) {
            c[static_cast<size_t>(j)] = coeff(rng);
            sum += c[static_cast<size_t>(j)];
        }
        c[static_cast<size_t>(n)] = -sum;
        if (std::abs(sum) >= 0.01 && std::abs(sum) <= 5.0) return Polynomial(std::move(c));
    }
}

}  // namespace

TEST_CASE("offspring distribution invariants") {
    OffspringDistribution d({{2, 0.5}, {3, 0.5}});
    CHECK(d.max_children() == 3);
    CHECK(d.mean_children() == doctest::Approx(2.5));
    CHECK(!d.pure_arity());
    CHECK(*OffspringDistribution::pure(4).pure_arity() == 4);
    CHECK(d.sample(0.0) == 2);
    CHECK(d.sample(0.499) == 2);
    CHECK(d.sample(0.501) == 3);
    CHECK(d.sample(0.999999) == 3);
    CHECK_THROWS_AS(OffspringDistribution({{1, 1.0}}), ValidationError);
    CHECK_THROWS_AS(OffspringDistribution({{2, 0.7}}), ValidationError);
    CHECK_THROWS_AS(OffspringDistribution({{2, 1.4}, {3, -0.4}}), ValidationError);
}

TEST_CASE("compile_outcome on the heat case") {
    RandomOutcomeModel m = compile_outcome(Polynomial::zero());
    CHECK(m.rate == doctest::Approx(1.0));
    CHECK(*m.offspring.pure_arity() == 2);
    REQUIRE(m.alpha.at(2).size() == 3);
    CHECK(m.alpha.at(2)[0] == 0.0);
    CHECK(m.alpha.at(2)[1] == doctest::Approx(0.5));
    CHECK(m.alpha.at(2)[2] == 1.0);
    CHECK(forward_nonlinearity(m).is_zero());
}

TEST_CASE("compile_outcome recovers the ternary majority model from Allen-Cahn") {
    // b = (0, -1/3, 1/3, 0), so the default rate bound is exactly 1 and the
    // compiled table collapses onto majority voting.
    RandomOutcomeModel m = compile_outcome(allen_cahn());
    CHECK(m.rate == doctest::Approx(1.0));
    REQUIRE(*m.offspring.pure_arity() == 3);
    CHECK(m.alpha.at(3)[0] == 0.0);
    CHECK(m.alpha.at(3)[1] == doctest::Approx(0.0).scale(1.0));
    CHECK(m.alpha.at(3)[2] == doctest::Approx(1.0));
    CHECK(m.alpha.at(3)[3] == 1.0);
    check_poly_close(forward_nonlinearity(m), allen_cahn(), 1e-12);

    RandomOutcomeModel m2 = compile_outcome(allen_cahn(), 2.0);
    CHECK(m2.alpha.at(3)[1] == doctest::Approx(1.0 / 6.0));
    CHECK(m2.alpha.at(3)[2] == doctest::Approx(5.0 / 6.0));
    check_poly_close(forward_nonlinearity(m2), allen_cahn(), 1e-12);
}

TEST_CASE("compile_outcome with a rate override") {
    RandomOutcomeModel m = compile_outcome(fkpp(), 10.0);
    CHECK(m.alpha.at(2)[1] == doctest::Approx(0.55));
    check_poly_close(forward_nonlinearity(m), fkpp(), 1e-12);

    CHECK_THROWS_AS(compile_outcome(Polynomial({0.0, 1.0})), ValidationError);
    try {
        compile_outcome(fkpp(), 0.4);  // alpha_1 = 1/2 + 0.5/0.4 > 1
        FAIL("expected RateTooSmallError");
    } catch (const RateTooSmallError& e) {
        CHECK(e.index == 1);
    }
}

TEST_CASE("compile_threshold known tables") {
    RandomThresholdModel heat = compile_threshold(Polynomial::zero());
    CHECK(heat.rate == doctest::Approx(1.0));
    CHECK(heat.arity == 2);
    CHECK(heat.zeta[0] == 0.0);
    CHECK(heat.zeta[1] == doctest::Approx(0.5));
    CHECK(heat.zeta[2] == doctest::Approx(0.5));

    RandomThresholdModel m = compile_threshold(fkpp());
    CHECK(m.rate == doctest::Approx(2.0));
    CHECK(m.zeta[0] == 0.0);
    CHECK(m.zeta[1] == doctest::Approx(0.75));
    CHECK(m.zeta[2] == doctest::Approx(0.25));
    check_poly_close(forward_nonlinearity(m), fkpp(), 1e-12);

    // u(1-u)(1-2u) has b = (0, 1/3, -1/3, 0): the outcome-grade rate gives a
    // non-monotone table, the threshold-grade default repairs it.
    Polynomial mirrored({0.0, 1.0, -3.0, 2.0});
    RandomThresholdModel fixed = compile_threshold(mirrored);
    CHECK(fixed.rate == doctest::Approx(2.0));
    check_poly_close(forward_nonlinearity(fixed), mirrored, 1e-12);
    try {
        compile_threshold(mirrored, 1.0);
        FAIL("expected RateTooSmallError");
    } catch (const RateTooSmallError& e) {
        CHECK(e.index == 2);
    }
}

TEST_CASE("EFP majority model converts to the majority threshold") {
    Model efp = catalog("efp_allen_cahn", {});
    RandomThresholdModel t = to_threshold(std::get<RandomOutcomeModel>(efp));
    REQUIRE(t.zeta.size() == 4);
    CHECK(t.zeta[0] == 0.0);
    CHECK(t.zeta[1] == 0.0);
    CHECK(t.zeta[2] == doctest::Approx(1.0));
    CHECK(t.zeta[3] == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("compile_recursive") {
    RecursiveModel m = compile_recursive(fkpp());
    CHECK(m.arity == 2);
    REQUIRE(m.symmetric_coeffs.size() == 3);
    CHECK(m.symmetric_coeffs[0] == 0.0);
    CHECK(m.symmetric_coeffs[1] == doctest::Approx(0.5));
    CHECK(m.symmetric_coeffs[2] == doctest::Approx(-1.0));
    // u_parent = (u1 + u2) - u1 u2
    std::vector<double> kids{0.3, 0.8};
    CHECK(m.combine(kids) == doctest::Approx(0.3 + 0.8 - 0.24).epsilon(1e-14));

    RecursiveModel cubic = compile_recursive(Polynomial::monomial(3));
    CHECK(cubic.arity == 3);
    CHECK(cubic.symmetric_coeffs == std::vector<double>{0.0, 0.0, 0.0, 1.0});

    CHECK_THROWS_AS(compile_recursive(Polynomial::zero()), ValidationError);
    RecursiveModel heat = compile_recursive(Polynomial::zero(), 2);
    CHECK(heat.combine(kids) == doctest::Approx(0.55));

    CHECK_THROWS_AS(compile_recursive(allen_cahn(), 2), ValidationError);
}

TEST_CASE("recursive diagonal identity S_N(u,...,u) = f(u)") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> deg(1, 6);
    std::uniform_real_distribution<double> coeff(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        int n = deg(rng);
        std::vector<double> c(static_cast<size_t>(n) + 1);
        for (double& v : c) v = coeff(rng);
        if (c.back() == 0.0) c.back() = 1.0;
        Polynomial f(c);
        RecursiveModel m = compile_recursive(f);
        for (int i = 0; i < 100; ++i) {
            double u = unif(rng);
            std::vector<double> same(static_cast<size_t>(m.arity), u);
            CHECK(m.symmetric_value(same) == doctest::Approx(f.eval(u)).epsilon(1e-11));
        }
    }
}

TEST_CASE("forward_nonlinearity closed forms") {
    // EFP: u(1-u)(2u-1)
    check_poly_close(forward_nonlinearity(catalog("efp_allen_cahn", {})), allen_cahn(), 1e-12);

    // Unbiased voting gives the heat equation for any offspring law.
    CatalogParams heat_params;
    heat_params.offspring = OffspringDistribution({{2, 0.3}, {3, 0.5}, {5, 0.2}});
    Polynomial f = forward_nonlinearity(catalog("heat", heat_params));
    for (int k = 0; k <= f.degree(); ++k) CHECK(std::abs(f[k]) < 1e-12);

    // McKean rule: beta (1 - u - sum p_k (1-u)^k).
    CatalogParams mk;
    mk.offspring = OffspringDistribution({{2, 0.4}, {3, 0.6}});
    mk.beta = 1.7;
    Polynomial fm = forward_nonlinearity(catalog("mckean", mk));
    for (int i = 0; i <= 50; ++i) {
        double u = i / 50.0;
        double v = 1.0 - u;
        double want = 1.7 * (1.0 - u - 0.4 * v * v - 0.6 * v * v * v);
        CHECK(fm.eval(u) == doctest::Approx(want).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("mckean_decompose") {
    auto r = mckean_decompose(fkpp());
    const auto* d = std::get_if<McKeanDecomposition>(&r);
    REQUIRE(d);
    CHECK(d->rate == doctest::Approx(1.0));
    CHECK(d->offspring.probs().at(2) == doctest::Approx(1.0));
    CHECK(d->lambda == doctest::Approx(1.0));
    check_poly_close(forward_nonlinearity(*d), fkpp(), 1e-12);

    // u(1-u)^2: the (1-u) coefficient vanishes.
    auto r2 = mckean_decompose(Polynomial({0.0, 1.0, -2.0, 1.0}));
    const auto* n2 = std::get_if<NotMcKean>(&r2);
    REQUIRE(n2);
    CHECK(n2->violation == McKeanViolation::nonpositive_rate);

    // u - u^3: the (1-u)^3 coefficient is positive.
    auto r3 = mckean_decompose(Polynomial({0.0, 1.0, 0.0, -1.0}));
    const auto* n3 = std::get_if<NotMcKean>(&r3);
    REQUIRE(n3);
    CHECK(n3->violation == McKeanViolation::positive_high_term);
    CHECK(n3->index == 3);

    CHECK_THROWS_AS(mckean_decompose(Polynomial({0.5, 1.0})), ValidationError);
}

TEST_CASE("mckean_decompose inverts the forward map on random McKean forms") {
    std::mt19937_64 rng(321);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        double beta = 0.2 + 3.0 * unif(rng);
        double p2 = unif(rng);
        double p3 = (1.0 - p2) * unif(rng);
        double p4 = 1.0 - p2 - p3;
        std::map<int, double> probs;
        if (p2 > 1e-3) probs[2] = p2;
        if (p3 > 1e-3) probs[3] = p3;
        if (p4 > 1e-3) probs[4] = p4;
        if (probs.empty()) continue;
        double total = 0.0;
        for (auto& [k, p] : probs) total += p;
        for (auto& [k, p] : probs) p /= total;
        McKeanDecomposition given{beta, OffspringDistribution(probs), 0.0};
        auto r = mckean_decompose(forward_nonlinearity(given));
        const auto* back = std::get_if<McKeanDecomposition>(&r);
        REQUIRE(back);
        CHECK(back->rate == doctest::Approx(beta).epsilon(1e-9));
        for (auto& [k, p] : given.offspring.probs())
            CHECK(back->offspring.probs().at(k) == doctest::Approx(p).epsilon(1e-8));
    }
}

TEST_CASE("compiler round trip over random nonlinearities") {
    std::mt19937_64 rng(20240812);
    std::uniform_int_distribution<int> deg(2, 8);
    for (int trial = 0; trial < 200; ++trial) {
        Polynomial f = random_boundary_poly(rng, deg(rng));
        RandomOutcomeModel mo = compile_outcome(f);
        check_poly_close(forward_nonlinearity(mo), f, 1e-9);
        CHECK(validate(Model(mo)).valid);

        RandomThresholdModel mt = compile_threshold(f);
        check_poly_close(forward_nonlinearity(mt), f, 1e-9);
        CHECK(validate(Model(mt)).valid);

        // Default rates honor the stated bounds.
        auto b = to_bernstein(f, f.degree());
        double maxb = 0.0;
        for (double v : b.b) maxb = std::max(maxb, std::abs(v));
        CHECK(mo.rate >= f.degree() * maxb - 1e-12);
        CHECK(mt.rate >= 2.0 * f.degree() * maxb - 1e-12);
    }
}

TEST_CASE("threshold/outcome conversions are inverse and preserve the nonlinearity") {
    std::mt19937_64 rng(5150);
    std::uniform_int_distribution<int> deg(2, 8);
    for (int trial = 0; trial < 50; ++trial) {
        Polynomial f = random_boundary_poly(rng, deg(rng));
        RandomThresholdModel t = compile_threshold(f);
        RandomOutcomeModel o = to_outcome(t);
        RandomThresholdModel t2 = to_threshold(o);
        REQUIRE(t2.zeta.size() == t.zeta.size());
        for (size_t k = 0; k < t.zeta.size(); ++k)
            CHECK(t2.zeta[k] == doctest::Approx(t.zeta[k]).epsilon(1e-12).scale(1.0));
        check_poly_close(forward_nonlinearity(o), forward_nonlinearity(t), 1e-10);
    }
    // Non-monotone tables do not convert.
    RandomOutcomeModel bad{1.0, OffspringDistribution::pure(3),
                           {{3, {0.0, 0.9, 0.2, 1.0}}}};
    CHECK_THROWS_AS(to_threshold(bad), ValidationError);
}

TEST_CASE("unbiased identity sum_k C(n,k) (k/n) u^k (1-u)^(n-k) = u") {
    for (int n = 1; n <= 12; ++n) {
        for (int i = 0; i < 1000; ++i) {
            double u = i / 999.0;
            double s = 0.0;
            for (int k = 0; k <= n; ++k)
                s += bernstein_basis(k, n, u) * static_cast<double>(k) / n;
            CHECK(s == doctest::Approx(u).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("uniform bias catalog matches its closed form") {
    CatalogParams p;
    p.gamma = 1.0;
    p.beta = 1.0;
    Polynomial f = forward_nonlinearity(catalog("uniform_bias", p));
    check_poly_close(f, fkpp(), 1e-12);

    // Mixed arity: f = beta gamma sum p_n (u - u^n).
    CatalogParams q;
    q.offspring = OffspringDistribution({{2, 0.25}, {4, 0.75}});
    q.gamma = 0.2;
    q.beta = 1.3;
    Polynomial g = forward_nonlinearity(catalog("uniform_bias", q));
    Polynomial want =
        (Polynomial::monomial(1, 0.25) - Polynomial::monomial(2, 0.25) +
         Polynomial::monomial(1, 0.75) - Polynomial::monomial(4, 0.75)) *
        (1.3 * 0.2);
    check_poly_close(g, want, 1e-12);

    // gamma above 1/(N-1) is rejected.
    CatalogParams bad;
    bad.offspring = OffspringDistribution::pure(4);
    bad.gamma = 0.5;
    CHECK_THROWS_AS(catalog("uniform_bias", bad), ValidationError);
}

TEST_CASE("group catalog matches the closed form over random draws") {
    // Fixed example first: m = 2, p_3 = 1, gamma = 1/3, beta = 1.
    CatalogParams p;
    p.m = 2;
    p.offspring = OffspringDistribution::pure(3);
    p.gamma = 1.0 / 3.0;
    p.beta = 1.0;
    Model m = catalog("group", p);
    const auto& row = std::get<RandomOutcomeModel>(m).alpha.at(3);
    CHECK(row[1] == doctest::Approx(1.0 / 3.0));
    CHECK(row[2] == doctest::Approx(2.0 / 3.0 + 1.0 / 9.0));
    Polynomial want = (Polynomial::monomial(2) - Polynomial::monomial(3)) * (1.0 / 3.0);
    check_poly_close(forward_nonlinearity(m), want, 1e-12);

    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        int group_size = 2 + static_cast<int>(unif(rng) * 2);  // 2 or 3
        int n_max = group_size + 1 + static_cast<int>(unif(rng) * 3);
        std::map<int, double> probs;
        double total = 0.0;
        for (int n = group_size + 1; n <= n_max; ++n) {
            double w = unif(rng) + 0.05;
            probs[n] = w;
            total += w;
        }
        for (auto& [k, v] : probs) v /= total;
        double gamma = unif(rng) / (n_max - group_size);  // within the binding bound
        if (gamma <= 0.0) continue;
        double beta = 0.2 + 2.0 * unif(rng);
        CatalogParams cp;
        cp.m = group_size;
        cp.offspring = OffspringDistribution(probs);
        cp.gamma = gamma;
        cp.beta = beta;
        Polynomial got = forward_nonlinearity(catalog("group", cp));
        Polynomial expect;
        for (auto& [n, pn] : probs)
            expect = expect + (Polynomial::monomial(group_size, pn) - Polynomial::monomial(n, pn));
        expect = expect * (beta * gamma);
        check_poly_close(got, expect, 1e-9);
    }

    CatalogParams bad;
    bad.m = 2;
    bad.offspring = OffspringDistribution::pure(2);  // p_k > 0 with k <= m
    bad.gamma = 0.1;
    CHECK_THROWS_AS(catalog("group", bad), ValidationError);
}

TEST_CASE("EvS composite catalog") {
    CatalogParams p;
    p.n = 2;
    p.chi = 1.0;
    Model m = catalog("evs", p);
    const auto& c = std::get<CompositeLabelModel>(m);
    CHECK(c.arity == 3);
    CHECK(c.rate == doctest::Approx(1.0));
    REQUIRE(c.labels.size() == 2);
    CHECK(c.labels[0].prob == doctest::Approx(0.5));  // p_I = 1/n at chi = 1
    CHECK(c.labels[1].prob == doctest::Approx(0.5));

    // Forward map is a positive multiple of (u - u^2)(1 + 2u).
    Polynomial f = forward_nonlinearity(m);
    Polynomial target = (Polynomial::monomial(1) - Polynomial::monomial(2)) *
                        (Polynomial::monomial(0) + Polynomial::monomial(1, 2.0));
    double scale = f[1] / target[1];
    CHECK(scale > 0.0);
    check_poly_close(f, target * scale, 1e-9);

    // chi = 2 leans pushed: p_G/p_I = n chi - 1 = 3.
    CatalogParams p2;
    p2.n = 2;
    p2.chi = 2.0;
    p2.gamma = 0.3;
    Model m2 = catalog("evs", p2);
    const auto& c2 = std::get<CompositeLabelModel>(m2);
    CHECK(c2.labels[0].prob == doctest::Approx(0.25));
    Polynomial f2 = forward_nonlinearity(m2);
    Polynomial target2 = (Polynomial::monomial(1) - Polynomial::monomial(2)) *
                         (Polynomial::monomial(0) + Polynomial::monomial(1, 4.0));
    double scale2 = f2[1] / target2[1];
    CHECK(scale2 > 0.0);
    check_poly_close(f2, target2 * scale2, 1e-9);

    CatalogParams bad;
    bad.n = 2;
    bad.chi = 0.4;  // below 1/n
    CHECK_THROWS_AS(catalog("evs", bad), ValidationError);
    CatalogParams bad2;
    bad2.n = 2;
    bad2.chi = 1.0;
    bad2.gamma = 1.0;  // pulled table would leave [0,1]
    CHECK_THROWS_AS(catalog("evs", bad2), ValidationError);

    CHECK_THROWS_AS(catalog("no_such_model", {}), ValidationError);
}

TEST_CASE("validate diagnostics") {
    ModelDiagnostics ok = validate(catalog("efp_allen_cahn", {}));
    CHECK(ok.valid);
    CHECK(ok.alpha_monotone);
    CHECK(ok.threshold_convertible);

    RandomOutcomeModel wiggly{1.0, OffspringDistribution::pure(3),
                              {{3, {0.0, 0.9, 0.2, 1.0}}}};
    ModelDiagnostics d = validate(Model(wiggly));
    CHECK(d.valid);
    CHECK(!d.alpha_monotone);
    CHECK(!d.threshold_convertible);

    RandomThresholdModel deficit{1.0, 2, {0.0, 0.4, 0.5}};
    ModelDiagnostics d2 = validate(Model(deficit));
    CHECK(!d2.valid);
    bool mentions_sum = false;
    for (const auto& issue : d2.issues) mentions_sum |= issue.find("sum") != std::string::npos;
    CHECK(mentions_sum);
}

TEST_CASE("model documents round trip byte-stably") {
    std::vector<Model> models;
    models.push_back(catalog("efp_allen_cahn", {}));
    CatalogParams hp;
    hp.offspring = OffspringDistribution({{2, 0.5}, {3, 0.5}});
    models.push_back(catalog("heat", hp));
    models.push_back(compile_threshold(fkpp()));
    models.push_back(compile_recursive(allen_cahn()));
    CatalogParams ep;
    ep.n = 2;
    ep.chi = 2.0;
    models.push_back(catalog("evs", ep));

    for (const auto& m : models) {
        std::string doc = write_model(m);
        Model back = read_model(doc);
        CHECK(write_model(back) == doc);
        CHECK(back.index() == m.index());
        check_poly_close(forward_nonlinearity(back), forward_nonlinearity(m), 1e-15);
    }

    CHECK_THROWS_AS(read_model("kind = outcome\nrate = 1\n"), ValidationError);
    CHECK_THROWS_AS(read_model("kind = sing-along\n"), ValidationError);
    CHECK_THROWS_AS(
        read_model("kind = threshold\nrate = 1\narity = 2\nzeta = [0, 0.4, 0.5]\n"),
        ValidationError);
}
