// bbmvote command line: compiles polynomial nonlinearities into voting
// models on branching Brownian motion, estimates u(t,x) by Monte Carlo, and
// cross-checks the estimates against a finite-difference solver.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbmvote/bbm.hpp"
#include "bbmvote/errors.hpp"
#include "bbmvote/estimate.hpp"
#include "bbmvote/model_io.hpp"
#include "bbmvote/models.hpp"
#include "bbmvote/pde.hpp"
#include "bbmvote/poly.hpp"
#include "bbmvote/version.hpp"

using nlohmann::json;
using namespace bbmvote;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- parsing --

Polynomial parse_nonlinearity(const std::string& spec) {
    if (spec == "fkpp" || spec == "fisher-kpp") return Polynomial({0.0, 1.0, -1.0});
    if (spec == "allen-cahn" || spec == "allen_cahn") return Polynomial({0.0, -1.0, 3.0, -2.0});
    if (spec == "heat") return Polynomial::zero();
    if (spec.rfind("evs:", 0) == 0) {
        // evs:n,chi -> (u - u^n)(1 + chi n u^(n-1))
        int n = 0;
        double chi = 0.0;
        if (std::sscanf(spec.c_str() + 4, "%d,%lf", &n, &chi) != 2 || n < 2)
            throw ValidationError("bad EvS spec '" + spec + "', expected evs:n,chi with n >= 2");
        Polynomial base = Polynomial::monomial(1) - Polynomial::monomial(n);
        Polynomial factor =
            Polynomial::monomial(0) + Polynomial::monomial(n - 1, chi * static_cast<double>(n));
        return base * factor;
    }
    return Polynomial::parse(spec);
}

OffspringDistribution parse_offspring(const std::string& spec) {
    std::map<int, double> probs;
    std::string item;
    std::istringstream in(spec);
    while (std::getline(in, item, ',')) {
        int k = 0;
        double p = 0.0;
        if (std::sscanf(item.c_str(), "%d:%lf", &k, &p) != 2)
            throw ValidationError("bad offspring entry '" + item + "', expected k:prob");
        probs[k] = p;
    }
    return OffspringDistribution(probs);
}

InitialDatum parse_datum(const std::string& spec_in) {
    std::string spec = spec_in;
    bool complemented = false;
    if (spec.rfind("1-", 0) == 0) {
        complemented = true;
        spec = spec.substr(2);
    }
    InitialDatum g = InitialDatum::step();
    if (spec == "step") {
        g = InitialDatum::step();
    } else if (spec.rfind("interval:", 0) == 0) {
        double a, b;
        if (std::sscanf(spec.c_str() + 9, "%lf,%lf", &a, &b) != 2)
            throw ValidationError("bad datum '" + spec_in + "', expected interval:a,b");
        g = InitialDatum::interval(a, b);
    } else if (spec.rfind("bump:", 0) == 0) {
        double c, w, h = 1.0;
        int got = std::sscanf(spec.c_str() + 5, "%lf,%lf,%lf", &c, &w, &h);
        if (got < 2) throw ValidationError("bad datum '" + spec_in + "', expected bump:c,w[,h]");
        g = InitialDatum::bump(c, w, h);
    } else if (spec.rfind("table:", 0) == 0) {
        std::ifstream in(spec.substr(6));
        if (!in) throw ValidationError("cannot open datum table '" + spec.substr(6) + "'");
        std::vector<double> xs, vs;
        double x, v;
        while (in >> x >> v) {
            xs.push_back(x);
            vs.push_back(v);
        }
        g = InitialDatum::tabulated(std::move(xs), std::move(vs));
    } else {
        throw ValidationError("unknown datum '" + spec_in +
                              "'; use step, interval:a,b, bump:c,w[,h], or table:file "
                              "(optionally prefixed with '1-')");
    }
    return complemented ? g.complement() : g;
}

std::vector<double> parse_xgrid(const std::string& spec) {
    double lo, hi;
    int count;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1 || lo > hi)
        throw ValidationError("bad grid spec '" + spec + "', expected min:max:count");
    std::vector<double> xs(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
        xs[static_cast<size_t>(i)] =
            count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    return xs;
}

Grid1D parse_grid(const std::string& spec) {
    double lo, hi;
    int count;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 16 || lo >= hi)
        throw ValidationError("bad solver grid '" + spec + "', expected min:max:count (>= 16)");
    return Grid1D{lo, hi, count};
}

int default_workers() {
    if (const char* env = std::getenv("BBMVOTE_WORKERS")) {
        int w = std::atoi(env);
        if (w >= 1) return w;
    }
    return 1;
}

// ----------------------------------------------------------------- output --

using ConfigEcho = std::map<std::string, std::string>;

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& subcommand, const ConfigEcho& config,
              const std::string& header_row)
        : own_(!path.empty() && path != "-") {
        if (own_) {
            file_.open(path);
            if (!file_) throw ValidationError("cannot open output file '" + path + "'");
        }
        auto& out = stream();
        out << "# bbmvote " << kVersion << "\n";
        out << "# subcommand = " << subcommand << "\n";
        for (const auto& [k, v] : config) out << "# " << k << " = " << v << "\n";
        out << header_row << "\n";
    }

    std::ostream& stream() { return own_ ? static_cast<std::ostream&>(file_) : std::cout; }

    void row(const std::vector<double>& values, const std::vector<std::string>& tail = {}) {
        auto& out = stream();
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) out << ",";
            out << fmt17(values[i]);
        }
        for (const auto& s : tail) out << "," << s;
        out << "\n";
    }

  private:
    bool own_;
    std::ofstream file_;
};

void write_json_summary(const std::string& path, const std::string& subcommand,
                        const ConfigEcho& config, const json& results) {
    if (path.empty()) return;
    json doc;
    doc["version"] = kVersion;
    doc["subcommand"] = subcommand;
    doc["config"] = config;
    doc["results"] = results;
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open JSON output '" + path + "'");
    out << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------- options --

struct ModelSourceOpts {
    std::string model_file;
    std::string catalog_name;
    std::string f_spec;
    std::string kind = "outcome";
    std::string offspring_spec;
    std::optional<double> rate;
    std::optional<double> gamma;
    std::optional<double> chi;
    std::optional<int> group_m;
    std::optional<int> evs_n;
    std::optional<int> arity;
    bool monotone = false;

    void attach(CLI::App* cmd, bool with_compile_kinds) {
        cmd->add_option("--model", model_file, "model document file");
        cmd->add_option("--catalog", catalog_name,
                        "named model: heat, efp_allen_cahn, mckean, uniform_bias, group, evs");
        cmd->add_option("--f", f_spec,
                        "nonlinearity: \"[c0, c1, ...]\", \"c0 + c1*u + ...\", fkpp, "
                        "allen-cahn, heat, or evs:n,chi");
        if (with_compile_kinds)
            cmd->add_option("--kind", kind, "compiler for --f: outcome, threshold, recursive")
                ->check(CLI::IsMember({"outcome", "threshold", "recursive"}));
        cmd->add_option("--rate", rate, "branch rate override");
        cmd->add_option("--offspring", offspring_spec, "offspring law, e.g. 2:0.5,3:0.5");
        cmd->add_option("--gamma", gamma, "bias strength (uniform_bias, group, evs)");
        cmd->add_option("--chi", chi, "EvS pulled/pushed parameter");
        cmd->add_option("--group-m", group_m, "group size m (group catalog)");
        cmd->add_option("--evs-n", evs_n, "EvS n (arity is 2n-1)");
        cmd->add_option("--arity", arity, "arity override (recursive compiler)");
        if (with_compile_kinds)
            cmd->add_flag("--monotone", monotone,
                          "compile --f with the stronger rate bound that makes alpha monotone");
    }

    CatalogParams catalog_params() const {
        CatalogParams p;
        if (!offspring_spec.empty()) p.offspring = parse_offspring(offspring_spec);
        p.beta = rate;
        p.gamma = gamma;
        p.chi = chi;
        p.m = group_m;
        p.n = evs_n;
        return p;
    }

    Model build() const {
        int sources = (!model_file.empty()) + (!catalog_name.empty()) + (!f_spec.empty());
        if (sources != 1)
            throw ValidationError("specify exactly one of --model, --catalog, or --f");
        if (!model_file.empty()) return read_model_file(model_file);
        if (!catalog_name.empty()) return catalog(catalog_name, catalog_params());
        Polynomial f = parse_nonlinearity(f_spec);
        if (kind == "threshold") return compile_threshold(f, rate);
        if (kind == "recursive") return compile_recursive(f, arity);
        if (monotone) return to_outcome(compile_threshold(f, rate));
        return compile_outcome(f, rate);
    }

    void echo(ConfigEcho& cfg) const {
        if (!model_file.empty()) cfg["model"] = model_file;
        if (!catalog_name.empty()) cfg["catalog"] = catalog_name;
        if (!f_spec.empty()) cfg["f"] = f_spec;
        if (!f_spec.empty()) cfg["kind"] = kind;
        if (rate) cfg["rate"] = fmt17(*rate);
        if (gamma) cfg["gamma"] = fmt17(*gamma);
        if (chi) cfg["chi"] = fmt17(*chi);
        if (group_m) cfg["group_m"] = std::to_string(*group_m);
        if (evs_n) cfg["evs_n"] = std::to_string(*evs_n);
        if (arity) cfg["arity"] = std::to_string(*arity);
        if (!offspring_spec.empty()) cfg["offspring"] = offspring_spec;
        if (monotone) cfg["monotone"] = "true";
    }
};

GenealogyParams genealogy_for(const Model& model, int dim) {
    if (const auto* m = std::get_if<RandomOutcomeModel>(&model))
        return {m->rate, m->offspring, dim};
    if (const auto* m = std::get_if<RandomThresholdModel>(&model))
        return {m->rate, OffspringDistribution::pure(m->arity), dim};
    if (const auto* m = std::get_if<CompositeLabelModel>(&model))
        return {m->rate, OffspringDistribution::pure(m->arity), dim};
    const auto& m = std::get<RecursiveModel>(model);
    return {RecursiveModel::rate, OffspringDistribution::pure(m.arity), dim};
}

// Runs the estimator matching the model kind at one point.
Estimate run_point_estimate(const Model& model, const InitialDatum& g, double t, double x,
                            const EstimatorOptions& opt, const std::string& mode) {
    const double x0[1] = {x};
    std::span<const double> start(x0);
    if (const auto* m = std::get_if<RandomOutcomeModel>(&model)) {
        VoteMode vm = mode == "sampled" ? VoteMode::sampled : VoteMode::conditional;
        return estimate_voting(*m, g, t, start, opt, vm);
    }
    if (const auto* m = std::get_if<CompositeLabelModel>(&model)) {
        VoteMode vm = mode == "sampled" ? VoteMode::sampled : VoteMode::conditional;
        return estimate_voting(*m, g, t, start, opt, vm);
    }
    if (const auto* m = std::get_if<RandomThresholdModel>(&model)) {
        ThresholdMode tm = mode == "direct" ? ThresholdMode::direct : ThresholdMode::via_outcome;
        return estimate_threshold(*m, g, t, start, opt, tm);
    }
    const auto& m = std::get<RecursiveModel>(model);
    return estimate_recursive(m, g, t, start, opt);
}

std::string default_mode_for(const Model& model, const std::string& requested) {
    if (!requested.empty()) return requested;
    if (std::holds_alternative<RandomThresholdModel>(model)) return "via_outcome";
    if (std::holds_alternative<RecursiveModel>(model)) return "expectation";
    return "conditional";
}

// ------------------------------------------------------------ subcommands --

struct SimulateOpts {
    ModelSourceOpts source;
    std::string datum = "step";
    std::string xspec = "-2:2:9";
    std::string mode;  // empty -> per-kind default
    std::string estimator = "auto";
    double t = 1.0;
    std::int64_t n = 10000;
    std::uint64_t seed = 0;
    std::int64_t dump_tree_index = -1;
    std::size_t max_leaves = 1'000'000;
    std::string out, json_out;
};

int cmd_simulate(const SimulateOpts& o, int workers) {
    InitialDatum g = parse_datum(o.datum);
    std::vector<double> xs = parse_xgrid(o.xspec);
    EstimatorOptions opt;
    opt.master_seed = o.seed;
    opt.n_replicates = o.n;
    opt.workers = workers;
    opt.limits.max_leaves = o.max_leaves;

    ConfigEcho cfg;
    cfg["datum"] = o.datum;
    cfg["x"] = o.xspec;
    cfg["t"] = fmt17(o.t);
    cfg["n"] = std::to_string(o.n);
    cfg["seed"] = std::to_string(o.seed);
    cfg["estimator"] = o.estimator;

    json results = json::array();
    if (o.estimator == "product") {
        // The product functional needs only a genealogy: taken from the model
        // source when one is given, otherwise from --rate/--offspring.
        std::string id = "mckean_product";
        bool has_source = !o.source.model_file.empty() || !o.source.catalog_name.empty() ||
                          !o.source.f_spec.empty();
        GenealogyParams params{1.0, OffspringDistribution::pure(2), 1};
        if (has_source) {
            Model model = o.source.build();
            params = genealogy_for(model, 1);
            id = model_id(model);
            o.source.echo(cfg);
        } else {
            params.rate = o.source.rate.value_or(1.0);
            if (!o.source.offspring_spec.empty())
                params.offspring = parse_offspring(o.source.offspring_spec);
            cfg["rate"] = fmt17(params.rate);
            if (!o.source.offspring_spec.empty()) cfg["offspring"] = o.source.offspring_spec;
        }
        cfg["mode"] = "product";
        if (o.dump_tree_index >= 0) {
            SeedScheme seeds{o.seed};
            const double x0[1] = {xs.front()};
            std::cout << dump_tree(params, o.t, x0, seeds.replicate_root(o.dump_tree_index),
                                   opt.limits);
            return 0;
        }
        CsvWriter csv(o.out, "simulate", cfg, "x,t,mean,std_error,n,mode,model_id");
        for (double x : xs) {
            const double x0[1] = {x};
            Estimate e = estimate_mckean_product(params, g, o.t, x0, opt);
            csv.row({x, o.t, e.mean, e.std_error, static_cast<double>(e.n_replicates)},
                    {"product", id});
            results.push_back({{"x", x}, {"mean", e.mean}, {"std_error", e.std_error}});
        }
        write_json_summary(o.json_out, "simulate", cfg, results);
        return 0;
    }

    Model model = o.source.build();
    if (o.dump_tree_index >= 0) {
        SeedScheme seeds{o.seed};
        const double x0[1] = {xs.front()};
        std::cout << dump_tree(genealogy_for(model, 1), o.t, x0,
                               seeds.replicate_root(o.dump_tree_index), opt.limits);
        return 0;
    }
    std::string mode = default_mode_for(model, o.mode);
    std::string id = model_id(model);
    o.source.echo(cfg);
    cfg["mode"] = mode;
    cfg["model_id"] = id;
    CsvWriter csv(o.out, "simulate", cfg, "x,t,mean,std_error,n,mode,model_id");
    for (double x : xs) {
        Estimate e = run_point_estimate(model, g, o.t, x, opt, mode);
        csv.row({x, o.t, e.mean, e.std_error, static_cast<double>(e.n_replicates)}, {mode, id});
        if (!e.warning.empty()) std::cerr << "warning (x = " << x << "): " << e.warning << "\n";
        results.push_back({{"x", x},
                           {"mean", e.mean},
                           {"std_error", e.std_error},
                           {"ci", {e.ci_low, e.ci_high}}});
    }
    write_json_summary(o.json_out, "simulate", cfg, results);
    return 0;
}

struct SolveOpts {
    std::string f_spec = "fkpp";
    std::string datum = "step";
    std::string grid = "-12:12:1201";
    double t = 1.0;
    double dt = 0.0;
    int substeps = 1;
    double snapshot_interval = 0.0;
    std::string out, json_out;
};

int cmd_solve(const SolveOpts& o) {
    Polynomial f = parse_nonlinearity(o.f_spec);
    InitialDatum g = parse_datum(o.datum);
    Grid1D grid = parse_grid(o.grid);
    SolveConfig cfg{o.dt, o.substeps, o.snapshot_interval};
    std::vector<Field> snapshots;
    Field field = solve(f, g, grid, o.t, cfg,
                        o.snapshot_interval > 0.0 ? &snapshots : nullptr);

    ConfigEcho echo;
    echo["f"] = o.f_spec;
    echo["datum"] = o.datum;
    echo["grid"] = o.grid;
    echo["t"] = fmt17(o.t);
    if (o.dt > 0.0) echo["dt"] = fmt17(o.dt);
    echo["substeps"] = std::to_string(o.substeps);
    if (o.snapshot_interval > 0.0) echo["snapshot_interval"] = fmt17(o.snapshot_interval);

    CsvWriter csv(o.out, "solve", echo, "t,x,u");
    auto emit = [&](const Field& fld) {
        for (int i = 0; i < fld.grid.n_points; ++i)
            csv.row({fld.t, fld.grid.x(i), fld.values[static_cast<size_t>(i)]});
    };
    if (o.snapshot_interval > 0.0)
        for (const auto& s : snapshots) emit(s);
    else
        emit(field);
    write_json_summary(o.json_out, "solve", echo,
                       json{{"t", field.t}, {"n_points", field.grid.n_points}});
    return 0;
}

struct CompareOpts {
    ModelSourceOpts source;
    std::string datum = "step";
    std::string xspec = "-2:2:9";
    std::string grid = "-12:12:1201";
    std::string mode;
    double t = 1.0;
    std::int64_t n = 100000;
    std::uint64_t seed = 0;
    double allowance = 2e-3;
    bool assert_agreement = false;
    std::string out, json_out;
};

int cmd_compare(const CompareOpts& o, int workers) {
    Model model = o.source.build();
    InitialDatum g = parse_datum(o.datum);
    std::vector<double> xs = parse_xgrid(o.xspec);
    Polynomial f = forward_nonlinearity(model);
    Grid1D grid = parse_grid(o.grid);
    Field field = solve(f, g, grid, o.t);

    EstimatorOptions opt;
    opt.master_seed = o.seed;
    opt.n_replicates = o.n;
    opt.workers = workers;
    std::string mode = default_mode_for(model, o.mode);

    ConfigEcho cfg;
    o.source.echo(cfg);
    cfg["datum"] = o.datum;
    cfg["x"] = o.xspec;
    cfg["grid"] = o.grid;
    cfg["t"] = fmt17(o.t);
    cfg["n"] = std::to_string(o.n);
    cfg["seed"] = std::to_string(o.seed);
    cfg["mode"] = mode;
    cfg["allowance"] = fmt17(o.allowance);
    cfg["model_id"] = model_id(model);
    cfg["pde_f"] = f.to_string();

    CsvWriter csv(o.out, "compare", cfg, "x,t,mc_mean,mc_se,pde,z");
    json results = json::array();
    bool ok = true;
    for (double x : xs) {
        Estimate e = run_point_estimate(model, g, o.t, x, opt, mode);
        double pde = field.at(x);
        double z = e.std_error > 0.0 ? (e.mean - pde) / e.std_error : 0.0;
        ok = ok && std::abs(e.mean - pde) <= 3.0 * e.std_error + o.allowance;
        csv.row({x, o.t, e.mean, e.std_error, pde, z});
        results.push_back({{"x", x}, {"mc", e.mean}, {"se", e.std_error}, {"pde", pde}, {"z", z}});
    }
    write_json_summary(o.json_out, "compare", cfg, results);
    if (o.assert_agreement && !ok) {
        std::cerr << "compare: Monte Carlo and PDE disagree beyond 3*SE + allowance\n";
        return 3;
    }
    return 0;
}

struct FrontOpts {
    std::string f_spec = "fkpp";
    double t_end = 200.0;
    std::string window = "20:200";
    std::string fit = "pulled";  // pulled, pushed, both
    double dx = 0.05;
    double half_width = 40.0;
    double sample = 1.0;
    double regrid = 1.0;
    std::string out, json_out;
};

int cmd_front(const FrontOpts& o) {
    Polynomial f = parse_nonlinearity(o.f_spec);
    double w0, w1;
    if (std::sscanf(o.window.c_str(), "%lf:%lf", &w0, &w1) != 2)
        throw ValidationError("bad fit window '" + o.window + "', expected t0:t1");
    FrontRunConfig cfg;
    cfg.dx = o.dx;
    cfg.window_half_width = o.half_width;
    cfg.sample_interval = o.sample;
    cfg.regrid_interval = o.regrid;
    std::vector<FrontPoint> series = front_run(f, o.t_end, cfg);

    ConfigEcho echo;
    echo["f"] = o.f_spec;
    echo["t_end"] = fmt17(o.t_end);
    echo["window"] = o.window;
    echo["fit"] = o.fit;
    echo["dx"] = fmt17(o.dx);
    echo["half_width"] = fmt17(o.half_width);

    CsvWriter csv(o.out, "front", echo, "t,X");
    for (const auto& p : series) csv.row({p.t, p.x});

    json results;
    std::ostringstream report;
    if (o.fit == "pulled" || o.fit == "both") {
        double fp0 = f[1];
        FrontFit fit = bramson_fit(series, fp0, w0, w1);
        report << "pulled fit: X(t) ~ " << fit.speed << "*t + (" << fit.log_slope
               << ")*log t + " << fit.intercept << "  [rms " << fit.residual << "]\n";
        results["pulled"] = {{"speed", fit.speed},
                             {"log_slope", fit.log_slope},
                             {"intercept", fit.intercept},
                             {"residual", fit.residual}};
    }
    if (o.fit == "pushed" || o.fit == "both") {
        double speed = pushed_speed(series, w0, w1);
        report << "pushed fit: X(t) ~ " << speed << "*t\n";
        results["pushed"] = {{"speed", speed}};
    }
    results["X_over_t_at_end"] = series.back().x / series.back().t;
    std::cerr << report.str();
    write_json_summary(o.json_out, "front", echo, results);
    return 0;
}

struct MaxdistOpts {
    std::string xspec = "0:2:3";
    std::string grid = "-12:12:1201";
    double t = 1.0;
    std::int64_t n = 100000;
    std::uint64_t seed = 0;
    double allowance = 2e-3;
    bool assert_agreement = false;
    std::string out, json_out;
};

int cmd_maxdist(const MaxdistOpts& o, int workers) {
    // P(M(t) > x) of the binary rate-1 BBM against the FKPP solution with
    // step datum.
    GenealogyParams params{1.0, OffspringDistribution::pure(2), 1};
    std::vector<double> xs = parse_xgrid(o.xspec);
    EstimatorOptions opt;
    opt.master_seed = o.seed;
    opt.n_replicates = o.n;
    opt.workers = workers;
    std::vector<Estimate> est = estimate_max_cdf(params, o.t, xs, opt);

    Field field = solve(Polynomial({0.0, 1.0, -1.0}), InitialDatum::step(), parse_grid(o.grid),
                        o.t);

    ConfigEcho cfg;
    cfg["x"] = o.xspec;
    cfg["grid"] = o.grid;
    cfg["t"] = fmt17(o.t);
    cfg["n"] = std::to_string(o.n);
    cfg["seed"] = std::to_string(o.seed);
    cfg["allowance"] = fmt17(o.allowance);

    CsvWriter csv(o.out, "maxdist", cfg, "x,t,mc_mean,mc_se,pde,z");
    json results = json::array();
    bool ok = true;
    for (size_t i = 0; i < xs.size(); ++i) {
        double pde = field.at(xs[i]);
        const Estimate& e = est[i];
        double z = e.std_error > 0.0 ? (e.mean - pde) / e.std_error : 0.0;
        ok = ok && std::abs(e.mean - pde) <= 3.0 * e.std_error + o.allowance;
        csv.row({xs[i], o.t, e.mean, e.std_error, pde, z});
        results.push_back(
            {{"x", xs[i]}, {"mc", e.mean}, {"se", e.std_error}, {"pde", pde}, {"z", z}});
    }
    write_json_summary(o.json_out, "maxdist", cfg, results);
    if (o.assert_agreement && !ok) {
        std::cerr << "maxdist: Monte Carlo and PDE disagree beyond 3*SE + allowance\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voting models on branching Brownian motion genealogies"};
    app.set_config("--config", "", "key = value file with defaults for any option");
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand
    int workers = default_workers();
    app.add_option("--workers", workers,
                   "worker threads for Monte Carlo replicates (outputs do not depend on this)");

    // compile
    ModelSourceOpts compile_src;
    std::string compile_out;
    auto* compile_cmd = app.add_subcommand("compile", "compile a nonlinearity into a model");
    compile_src.attach(compile_cmd, true);
    compile_cmd->add_option("--out", compile_out, "write the model document here");

    // nonlinearity
    std::string nl_model;
    auto* nl_cmd = app.add_subcommand("nonlinearity", "print the nonlinearity of a model");
    nl_cmd->add_option("--model", nl_model, "model document file")->required();

    // decompose
    std::string dec_f;
    auto* dec_cmd = app.add_subcommand("decompose", "test a nonlinearity for McKean form");
    dec_cmd->add_option("--f", dec_f, "nonlinearity")->required();

    // catalog
    ModelSourceOpts cat_src;
    bool cat_list = false;
    std::string cat_name, cat_out;
    auto* cat_cmd = app.add_subcommand("catalog", "list or instantiate named models");
    cat_cmd->add_flag("--list", cat_list, "list catalog names");
    cat_cmd->add_option("--name", cat_name, "catalog model name");
    cat_src.attach(cat_cmd, false);
    cat_cmd->add_option("--out", cat_out, "write the model document here");

    // simulate
    SimulateOpts sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo estimates of u(t,x)");
    sim.source.attach(sim_cmd, true);
    sim_cmd->add_option("--datum", sim.datum, "initial datum");
    sim_cmd->add_option("--x", sim.xspec, "evaluation grid min:max:count");
    sim_cmd->add_option("--t", sim.t, "evaluation time");
    sim_cmd->add_option("--n", sim.n, "replicates per point");
    sim_cmd->add_option("--seed", sim.seed, "master seed");
    sim_cmd->add_option("--mode", sim.mode,
                        "sampled|conditional (voting), direct|via_outcome (threshold)");
    sim_cmd->add_option("--estimator", sim.estimator, "auto|product");
    sim_cmd->add_option("--dump-tree", sim.dump_tree_index,
                        "print the genealogy of this replicate as an outline, then exit");
    sim_cmd->add_option("--max-leaves", sim.max_leaves, "population guard per replicate");
    sim_cmd->add_option("--out", sim.out, "CSV output path");
    sim_cmd->add_option("--json", sim.json_out, "JSON summary path");

    // solve
    SolveOpts sol;
    auto* sol_cmd = app.add_subcommand("solve", "finite-difference solve of u_t = u_xx + f(u)");
    sol_cmd->add_option("--f", sol.f_spec, "nonlinearity");
    sol_cmd->add_option("--datum", sol.datum, "initial datum");
    sol_cmd->add_option("--grid", sol.grid, "solver grid min:max:count");
    sol_cmd->add_option("--t", sol.t, "final time");
    sol_cmd->add_option("--dt", sol.dt, "time step (default 0.25*dx^2)");
    sol_cmd->add_option("--substeps", sol.substeps, "reaction RK4 substeps");
    sol_cmd->add_option("--snapshots", sol.snapshot_interval, "snapshot interval");
    sol_cmd->add_option("--out", sol.out, "CSV output path");
    sol_cmd->add_option("--json", sol.json_out, "JSON summary path");

    // compare
    CompareOpts cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "simulate and solve, with per-point z-scores");
    cmp.source.attach(cmp_cmd, true);
    cmp_cmd->add_option("--datum", cmp.datum, "initial datum");
    cmp_cmd->add_option("--x", cmp.xspec, "evaluation grid min:max:count");
    cmp_cmd->add_option("--grid", cmp.grid, "solver grid min:max:count");
    cmp_cmd->add_option("--t", cmp.t, "evaluation time");
    cmp_cmd->add_option("--n", cmp.n, "replicates per point");
    cmp_cmd->add_option("--seed", cmp.seed, "master seed");
    cmp_cmd->add_option("--mode", cmp.mode, "estimation mode");
    cmp_cmd->add_option("--allowance", cmp.allowance, "solver error allowance");
    cmp_cmd->add_flag("--assert", cmp.assert_agreement,
                      "exit 3 unless |MC - PDE| <= 3*SE + allowance everywhere");
    cmp_cmd->add_option("--out", cmp.out, "CSV output path");
    cmp_cmd->add_option("--json", cmp.json_out, "JSON summary path");

    // front
    FrontOpts fr;
    auto* fr_cmd = app.add_subcommand("front", "front tracking and pulled/pushed fits");
    fr_cmd->add_option("--f", fr.f_spec, "nonlinearity");
    fr_cmd->add_option("--t-end", fr.t_end, "tracking horizon");
    fr_cmd->add_option("--window", fr.window, "fit window t0:t1");
    fr_cmd->add_option("--fit", fr.fit, "pulled, pushed, or both")
        ->check(CLI::IsMember({"pulled", "pushed", "both"}));
    fr_cmd->add_option("--dx", fr.dx, "grid step");
    fr_cmd->add_option("--half-width", fr.half_width, "comoving window half-width");
    fr_cmd->add_option("--sample", fr.sample, "front sampling interval");
    fr_cmd->add_option("--regrid", fr.regrid, "window re-centering interval");
    fr_cmd->add_option("--out", fr.out, "CSV output path");
    fr_cmd->add_option("--json", fr.json_out, "JSON summary path");

    // maxdist
    MaxdistOpts mx;
    auto* mx_cmd = app.add_subcommand("maxdist", "max-of-BBM law against the FKPP oracle");
    mx_cmd->add_option("--x", mx.xspec, "thresholds min:max:count");
    mx_cmd->add_option("--grid", mx.grid, "solver grid min:max:count");
    mx_cmd->add_option("--t", mx.t, "evaluation time");
    mx_cmd->add_option("--n", mx.n, "replicates");
    mx_cmd->add_option("--seed", mx.seed, "master seed");
    mx_cmd->add_option("--allowance", mx.allowance, "solver error allowance");
    mx_cmd->add_flag("--assert", mx.assert_agreement, "exit 3 on disagreement");
    mx_cmd->add_option("--out", mx.out, "CSV output path");
    mx_cmd->add_option("--json", mx.json_out, "JSON summary path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (compile_cmd->parsed()) {
            Model m = compile_src.build();
            std::string doc = write_model(m);
            std::cout << doc;
            if (!compile_out.empty()) write_model_file(m, compile_out);
            return 0;
        }
        if (nl_cmd->parsed()) {
            Model m = read_model_file(nl_model);
            Polynomial f = forward_nonlinearity(m);
            std::cout << f.to_string() << "\n";
            std::cout << "coeffs = [";
            const auto& c = f.coeffs();
            for (size_t i = 0; i < c.size(); ++i) std::cout << (i ? ", " : "") << fmt17(c[i]);
            std::cout << "]\n";
            return 0;
        }
        if (dec_cmd->parsed()) {
            McKeanResult r = mckean_decompose(parse_nonlinearity(dec_f));
            if (const auto* d = std::get_if<McKeanDecomposition>(&r)) {
                std::cout << "mckean = yes\n";
                std::cout << "beta = " << fmt17(d->rate) << "\n";
                for (auto& [k, p] : d->offspring.probs())
                    std::cout << "p_" << k << " = " << fmt17(p) << "\n";
                std::cout << "lambda = " << fmt17(d->lambda) << "\n";
            } else {
                const auto& nm = std::get<NotMcKean>(r);
                std::cout << "mckean = no\n";
                std::cout << "reason = " << nm.detail << "\n";
            }
            return 0;
        }
        if (cat_cmd->parsed()) {
            if (cat_list) {
                for (const auto& name : catalog_names()) std::cout << name << "\n";
                return 0;
            }
            if (cat_name.empty()) throw ValidationError("catalog: pass --name or --list");
            Model m = catalog(cat_name, cat_src.catalog_params());
            std::cout << write_model(m);
            if (!cat_out.empty()) write_model_file(m, cat_out);
            return 0;
        }
        if (sim_cmd->parsed()) return cmd_simulate(sim, workers);
        if (sol_cmd->parsed()) return cmd_solve(sol);
        if (cmp_cmd->parsed()) return cmd_compare(cmp, workers);
        if (fr_cmd->parsed()) return cmd_front(fr);
        if (mx_cmd->parsed()) return cmd_maxdist(mx, workers);
        throw ValidationError("no subcommand given");
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 2;
    } catch (const NumericsError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
