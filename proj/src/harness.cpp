#include "fermipair/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "fermipair/bounds.hpp"
#include "fermipair/effective_potential.hpp"
#include "fermipair/error.hpp"
#include "fermipair/fock.hpp"
#include "fermipair/lens.hpp"

namespace fermipair {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ostream& logger(const RunOptions& o) {
    static std::ostream null(nullptr);
    return o.log ? *o.log : null;
}

std::string key_of(const char* name, double x) {
    std::ostringstream os;
    os << name << '=' << std::setprecision(12) << x;
    return os.str();
}

// "8pi", "2.5pi" or a plain number
double parse_length(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s.size() > 2 && s.substr(s.size() - 2) == "pi") {
            const std::string head = s.substr(0, s.size() - 2);
            try {
                return (head.empty() ? 1.0 : std::stod(head)) * kPi;
            } catch (const std::exception&) {
            }
        }
    }
    throw ConfigError("L entries must be numbers or strings like \"8pi\", got " + j.dump());
}

std::vector<double> number_list(const json& j, const char* key) {
    if (!j.is_array() || j.empty()) throw ConfigError(std::string(key) + " must be a nonempty array");
    std::vector<double> v;
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError(std::string(key) + " entries must be numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

const std::set<std::string>& common_keys() {
    static const std::set<std::string> k{"schema", "experiment", "d", "k_F", "L", "spec", "output", "seed"};
    return k;
}

std::set<std::string> keys_for(Experiment e) {
    switch (e) {
        case Experiment::potential:
            return {"method", "r_max", "r_points", "rel_tol", "cutoff_multiplier", "tail_tol"};
        case Experiment::scaling:
            return {"n",     "lambda",       "m_max", "cutoff_delta", "cutoff_multiplier", "M_imp",
                    "xi0",   "t",            "w",     "krylov_tol",   "max_states",        "rel_tol"};
        case Experiment::bounds:
            return {"cutoff_multiplier", "tail_tol", "lemma2", "lemmaA1", "a1_kF_max"};
        case Experiment::proposition2:
            return {"n", "lambda", "M_imp", "xi0", "t", "w", "rel_tol", "r_max", "r_points"};
        case Experiment::certify:
            return {"w"};
    }
    return {};
}

template <class T>
void take(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for ") + key + ": " + e.what());
    }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
}

void write_text(const fs::path& p, const std::string& s) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ConfigError("cannot write " + p.string());
        out << s;
    }
    fs::rename(tmp, p);
}

std::string out_dir(const ExperimentConfig& c, const RunOptions& o) {
    const std::string dir = o.out_dir.empty() ? c.output : o.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

// least squares y = a x + b x^2
std::pair<double, double> fit_linear_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
    double s2 = 0, s3 = 0, s4 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = x[i];
        s2 += t * t;
        s3 += t * t * t;
        s4 += t * t * t * t;
        y1 += t * y[i];
        y2 += t * t * y[i];
    }
    const double det = s2 * s4 - s3 * s3;
    if (x.size() < 2 || std::abs(det) < 1e-300) return {s2 > 0 ? y1 / s2 : 0.0, 0.0};
    return {(y1 * s4 - y2 * s3) / det, (s2 * y2 - s3 * y1) / det};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

std::int64_t binom(std::int64_t n, int k) {
    if (k < 0 || k > n) return 0;
    double r = 1;
    for (int i = 0; i < k; ++i) r = r * double(n - i) / (i + 1);
    return std::int64_t(std::llround(r));
}

}  // namespace

Experiment parse_experiment(const std::string& s) {
    if (s == "potential") return Experiment::potential;
    if (s == "scaling") return Experiment::scaling;
    if (s == "bounds") return Experiment::bounds;
    if (s == "proposition2" || s == "prop2") return Experiment::proposition2;
    if (s == "certify") return Experiment::certify;
    throw ConfigError("unknown experiment \"" + s + "\"");
}

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::potential: return "potential";
        case Experiment::scaling: return "scaling";
        case Experiment::bounds: return "bounds";
        case Experiment::proposition2: return "proposition2";
        case Experiment::certify: return "certify";
    }
    return "?";
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    if (!j.contains("experiment")) throw ConfigError("config lacks \"experiment\"");
    c.experiment = parse_experiment(j.at("experiment").get<std::string>());
    if (j.contains("schema") && j.at("schema") != kSchema)
        throw ConfigError("unsupported config schema " + j.at("schema").dump());
    std::set<std::string> allowed = common_keys();
    for (const auto& k : keys_for(c.experiment)) allowed.insert(k);
    check_keys(j, allowed, to_string(c.experiment) + " config");

    take(j, "d", c.d);
    if (c.d < 1 || c.d > 3) throw ConfigError("d must be 1, 2 or 3");
    if (j.contains("k_F")) c.kF = number_list(j.at("k_F"), "k_F");
    for (double k : c.kF)
        if (!(k > 0)) throw ConfigError("k_F entries must be positive");
    if (j.contains("L")) {
        if (!j.at("L").is_array() || j.at("L").empty()) throw ConfigError("L must be a nonempty array");
        c.L.clear();
        for (const auto& x : j.at("L")) c.L.push_back(parse_length(x));
    }
    for (double l : c.L)
        if (!(l > 0)) throw ConfigError("L entries must be positive");
    if (j.contains("spec")) c.spec = j.at("spec");
    make_spec(c.spec);
    take(j, "output", c.output);
    take(j, "seed", c.seed);
    if (j.contains("lambda")) {
        const json& l = j.at("lambda");
        if (l.is_string() && l.get<std::string>() == "scaled")
            c.lambda.reset();
        else if (l.is_number())
            c.lambda = l.get<double>();
        else
            throw ConfigError("lambda must be a number or \"scaled\"");
    }
    take(j, "n", c.n);
    if (c.n < 1 || c.n > 4) throw ConfigError("n must be between 1 and 4");
    if (j.contains("w")) {
        const json& w = j.at("w");
        check_keys(w, {"kind", "amplitude", "width", "path", "relative_bound"}, "w");
        take(w, "kind", c.w.kind);
        take(w, "amplitude", c.w.amplitude);
        take(w, "width", c.w.width);
        take(w, "path", c.w.path);
        take(w, "relative_bound", c.w.relative_bound);
        if (c.w.kind != "zero" && c.w.kind != "gaussian" && c.w.kind != "table")
            throw ConfigError("w.kind must be zero, gaussian or table");
    }
    if (j.contains("xi0")) {
        const json& x = j.at("xi0");
        check_keys(x, {"family", "sigma", "separation", "p_cut"}, "xi0");
        take(x, "family", c.xi0.family);
        take(x, "sigma", c.xi0.sigma);
        take(x, "separation", c.xi0.separation);
        take(x, "p_cut", c.xi0.p_cut);
        if (c.xi0.family != "gaussian" && c.xi0.family != "random")
            throw ConfigError("xi0.family must be gaussian or random");
    }
    if (j.contains("t")) c.t = number_list(j.at("t"), "t");
    take(j, "rel_tol", c.rel_tol);
    take(j, "krylov_tol", c.krylov_tol);
    take(j, "tail_tol", c.tail_tol);
    take(j, "m_max", c.m_max);
    if (c.m_max < 0 || c.m_max > 4) throw ConfigError("m_max must be between 0 and 4");
    take(j, "cutoff_multiplier", c.cutoff_multiplier);
    take(j, "cutoff_delta", c.cutoff_delta);
    if (!(c.cutoff_multiplier >= 1)) throw ConfigError("cutoff_multiplier must be at least 1");
    take(j, "M_imp", c.M_imp);
    take(j, "max_states", c.max_states);
    take(j, "method", c.method);
    if (c.method != "quadrature" && c.method != "lattice") throw ConfigError("method must be quadrature or lattice");
    take(j, "r_max", c.r_max);
    take(j, "r_points", c.r_points);
    take(j, "lemma2", c.lemma2);
    take(j, "lemmaA1", c.lemmaA1);
    take(j, "a1_kF_max", c.a1_kF_max);
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    json j;
    j["schema"] = kSchema;
    j["experiment"] = fermipair::to_string(experiment);
    j["d"] = d;
    j["k_F"] = kF;
    j["L"] = L;
    j["spec"] = spec;
    j["output"] = output;
    j["seed"] = seed;
    const auto k = keys_for(experiment);
    auto put = [&](const char* key, const json& v) {
        if (k.count(key)) j[key] = v;
    };
    put("lambda", lambda ? json(*lambda) : json("scaled"));
    put("n", n);
    put("w", json{{"kind", w.kind}, {"amplitude", w.amplitude}, {"width", w.width}, {"path", w.path},
                  {"relative_bound", w.relative_bound}});
    put("xi0", json{{"family", xi0.family}, {"sigma", xi0.sigma}, {"separation", xi0.separation}, {"p_cut", xi0.p_cut}});
    put("t", t);
    put("rel_tol", rel_tol);
    put("krylov_tol", krylov_tol);
    put("tail_tol", tail_tol);
    put("m_max", m_max);
    put("cutoff_multiplier", cutoff_multiplier);
    put("cutoff_delta", cutoff_delta);
    put("M_imp", M_imp);
    put("max_states", max_states);
    put("method", method);
    put("r_max", r_max);
    put("r_points", r_points);
    put("lemma2", lemma2);
    put("lemmaA1", lemmaA1);
    put("a1_kF_max", a1_kF_max);
    return j;
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("output");
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

double ExperimentConfig::coupling(double k) const { return lambda ? *lambda : std::pow(k, 0.5 * (2 - d)); }

double ExperimentConfig::cutoff(double k) const { return cutoff_delta > 0 ? k + cutoff_delta : cutoff_multiplier * k; }

PotentialSpec make_spec(const json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("spec must be an object with a \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") {
        check_keys(j, {"kind"}, "spec");
        return PotentialSpec::zero();
    }
    if (kind == "yukawa") {
        check_keys(j, {"kind", "R"}, "spec");
        return PotentialSpec::yukawa(j.value("R", 1.0));
    }
    if (kind == "step") {
        check_keys(j, {"kind"}, "spec");
        return PotentialSpec::step();
    }
    if (kind == "table") {
        check_keys(j, {"kind", "path"}, "spec");
        return PotentialSpec::load_table(j.at("path").get<std::string>());
    }
    throw ConfigError("unknown spec kind \"" + kind + "\"");
}

ImpurityPotential make_w(const WSpec& w, double r_max) {
    if (w.kind == "zero") return ImpurityPotential::zero();
    std::vector<double> r, v;
    if (w.kind == "gaussian") {
        const int pts = 1024;
        for (int i = 0; i < pts; ++i) {
            const double x = r_max * i / (pts - 1);
            r.push_back(x);
            v.push_back(w.amplitude * std::exp(-x * x / (2 * w.width * w.width)));
        }
        std::ostringstream id;
        id << "gaussian(" << w.amplitude << ',' << w.width << ')';
        return ImpurityPotential::bounded_table(r, v, id.str());
    }
    std::ifstream in(w.path);
    if (!in) throw ConfigError("cannot open w table " + w.path);
    std::string line;
    while (std::getline(in, line)) {
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        double a, b;
        if (ls >> a >> b) {
            r.push_back(a);
            v.push_back(b);
        }
    }
    if (w.relative_bound >= 0) return ImpurityPotential::uncertified(r, v, w.relative_bound, w.path);
    return ImpurityPotential::bounded_table(r, v, w.path);
}

ImpurityState make_xi0(const ImpurityGrid& g, const XiSpec& x, std::uint64_t seed) {
    if (x.family == "random") return random_state(g, x.p_cut, seed);
    std::vector<Vec3> centers(g.n, Vec3{0, 0, 0});
    for (int i = 1; i < g.n; ++i) centers[i][0] = i * x.separation;
    ImpurityState s = gaussian_state(g, centers, x.sigma);
    s.normalize();
    return s;
}

std::vector<double> grid_distances(const ImpurityGrid& g) {
    const int half = g.M / 2;
    const double dx = g.L / g.M;
    std::set<long> norms;
    for (int a = 0; a <= half; ++a)
        for (int b = 0; b <= (g.d >= 2 ? a : 0); ++b)
            for (int c = 0; c <= (g.d >= 3 ? b : 0); ++c) norms.insert(long(a) * a + long(b) * b + long(c) * c);
    std::vector<double> r;
    for (long n2 : norms) r.push_back(dx * std::sqrt(double(n2)));
    return r;
}

Manifest::Manifest(const std::string& dir, const ExperimentConfig& c) : dir_(dir) {
    const fs::path p = fs::path(dir) / "manifest.json";
    const std::string h = c.hash();
    if (fs::exists(p)) {
        std::ifstream in(p);
        json old;
        try {
            in >> old;
        } catch (const json::exception&) {
            throw ConfigError("unreadable manifest " + p.string());
        }
        if (old.value("config_hash", "") != h)
            throw ConfigError("output directory " + dir + " holds results of a different config (hash " +
                              old.value("config_hash", "?") + ")");
        doc_ = old;
    } else {
        doc_["config_hash"] = h;
        doc_["config"] = c.to_json();
        doc_["version"] = kVersion;
        doc_["points"] = json::object();
        doc_["timings"] = json::object();
    }
}

std::optional<json> Manifest::point(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (doc_["points"].contains(key)) return doc_["points"][key];
    return std::nullopt;
}

void Manifest::record(const std::string& key, const json& value, double seconds) {
    std::lock_guard<std::mutex> lock(mu_);
    doc_["points"][key] = value;
    doc_["timings"][key] = seconds;
    flush();
}

void Manifest::finish(const json& report, double seconds) {
    std::lock_guard<std::mutex> lock(mu_);
    doc_["report"] = report;
    doc_["wall_time"] = seconds;
    flush();
}

void Manifest::flush() const { write_text(fs::path(dir_) / "manifest.json", doc_.dump(2) + "\n"); }

namespace {

// Runs or resumes each keyed point through the manifest.
template <class F>
std::vector<json> run_points(Manifest& m, const std::vector<std::string>& keys, const RunOptions& o, F&& f,
                             std::size_t& resumed) {
    std::vector<std::optional<json>> done(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        done[i] = m.point(keys[i]);
        if (done[i]) ++resumed;
    }
    std::mutex log_mu;
    return parallel_map(keys.size(), o.threads, [&](std::size_t i) -> json {
        if (done[i]) return *done[i];
        const auto t0 = Clock::now();
        json r = f(i);
        const double dt = seconds_since(t0);
        m.record(keys[i], r, dt);
        std::lock_guard<std::mutex> lock(log_mu);
        logger(o) << "  " << keys[i] << " done in " << std::fixed << std::setprecision(1) << dt << " s\n";
        return r;
    });
}

}  // namespace

RunResult run_potential(const ExperimentConfig& c, const RunOptions& o) {
    const PotentialSpec spec = make_spec(c.spec);
    if (c.r_points < 2 || !(c.r_max > 0)) throw ConfigError("need r_max > 0 and r_points >= 2");
    std::vector<double> r;
    for (int i = 0; i < c.r_points; ++i) r.push_back(c.r_max * i / (c.r_points - 1));
    RunResult res;
    if (o.dry_run) {
        for (double k : c.kF) {
            json p{{"k_F", k}, {"points", r.size()}, {"method", c.method}};
            if (c.method == "lattice") {
                const double h = 2 * kPi / c.L.back();
                const double zc = c.cutoff(k) / h;
                p["L"] = c.L.back();
                p["transfer_reps_estimate"] = std::pow(zc + k / h, c.d) / std::tgamma(c.d + 1.0);
                p["ball_points_estimate"] = ball_volume(c.d) * std::pow(k / h, c.d);
            }
            res.report["points"].push_back(p);
        }
        return res;
    }
    const std::string dir = out_dir(c, o);
    Manifest m(dir, c);
    const auto t0 = Clock::now();
    std::vector<std::string> keys;
    for (double k : c.kF) keys.push_back(key_of("k_F", k));
    auto rows = run_points(m, keys, o, [&](std::size_t i) -> json {
        const double k = c.kF[i];
        PotentialTable t;
        if (c.method == "quadrature") {
            t = tabulate_quadrature(c.d, k, spec, r, c.rel_tol);
        } else {
            const LatticeW lw(c.d, c.L.back(), k, c.cutoff(k), spec, c.tail_tol);
            t = tabulate_lattice(lw, spec, r);
        }
        return json{{"k_F", k}, {"scaled", t.scaled}, {"err", t.err}, {"L", t.L}, {"cutoff", t.cutoff}};
    }, res.resumed_points);

    std::vector<PotentialTable> tables;
    for (const json& row : rows) {
        PotentialTable t;
        t.d = c.d;
        t.kF = row.at("k_F").get<double>();
        t.method = c.method == "quadrature" ? "quadrature" : "lattice_sum";
        t.spec_id = spec.id();
        t.L = row.at("L").get<double>();
        t.cutoff = row.at("cutoff").get<double>();
        t.r = r;
        t.scaled = row.at("scaled").get<std::vector<double>>();
        t.err = row.at("err").get<std::vector<double>>();
        std::ostringstream name;
        name << "W_d" << c.d << "_kF" << t.kF << ".csv";
        const std::string path = (fs::path(dir) / name.str()).string();
        t.write_csv(path);
        res.files.push_back(path);
        tables.push_back(std::move(t));
    }
    const Lemma1Report lr = lemma1_report(tables, spec);
    json rep;
    rep["d"] = c.d;
    rep["spec_id"] = spec.id();
    rep["c_probe"] = lr.c_probe;
    rep["core_ok"] = lr.core_ok;
    rep["spec_core_certified"] = lr.spec_core_certified;
    rep["sup_ratio"] = lr.sup_ratio();
    for (const auto& row : lr.rows)
        rep["rows"].push_back({{"k_F", row.kF}, {"sup_abs", row.sup_abs}, {"core_inf", row.core_inf},
                               {"scaled_at_0", row.scaled.front()}});
    // self-convergence between neighbouring k_F
    for (std::size_t i = 1; i < tables.size(); ++i) {
        double diff = 0, scale = 0;
        for (std::size_t j = 0; j < r.size(); ++j) {
            diff = std::max(diff, std::abs(tables[i].scaled[j] - tables[i - 1].scaled[j]));
            scale = std::max(scale, std::abs(tables[i].scaled[j]));
        }
        rep["convergence"].push_back(
            {{"k_F_pair", {tables[i - 1].kF, tables[i].kF}}, {"max_abs_diff", diff}, {"relative", diff / scale}});
    }
    const std::string path = (fs::path(dir) / "potential_report.json").string();
    write_text(path, rep.dump(2) + "\n");
    res.files.push_back(path);
    m.finish(rep, seconds_since(t0));
    res.report = rep;
    return res;
}

namespace {

struct ScalingSetup {
    MomentumLattice lattice;
    FermiBall ball;
    ImpurityGrid grid;
    ScalingSetup(const ExperimentConfig& c, double k)
        : lattice(c.d, c.L.front(), c.cutoff(k)), ball(lattice, k), grid{c.n, c.d, c.M_imp, c.L.front()} {
        grid.validate();
    }
};

PotentialTable fock_consistent_table(const ExperimentConfig& c, double k, const PotentialSpec& spec,
                                     const ImpurityGrid& g) {
    const LatticeW lw(c.d, c.L.front(), k, c.cutoff(k), spec, std::numeric_limits<double>::infinity());
    return tabulate_lattice(lw, spec, grid_distances(g));
}

}  // namespace

RunResult run_scaling(const ExperimentConfig& c, const RunOptions& o) {
    const PotentialSpec spec = make_spec(c.spec);
    std::vector<double> times = c.t;
    std::sort(times.begin(), times.end());
    if (times.front() < 0) throw ConfigError("times must be non-negative");
    RunResult res;
    if (o.dry_run) {
        for (double k : c.kF) {
            const MomentumLattice lat(c.d, c.L.front(), c.cutoff(k));
            const FermiBall ball(lat, k);
            const std::int64_t N = std::int64_t(ball.members().size()), P = std::int64_t(ball.outside().size());
            double configs = 0, hops = 0;
            for (int m = 0; m <= c.m_max; ++m) {
                const double cm = double(binom(N, m)) * double(binom(P, m));
                configs += cm;
                hops += cm * double(N + P) * double(std::min<std::int64_t>(N, P) + m);
            }
            const double tuples = std::pow(double(c.M_imp), (c.n - 1) * c.d);
            const double blocks = std::pow(double(c.M_imp), c.d);
            const double dim = configs * tuples * blocks;
            json p{{"k_F", k},
                   {"lambda", c.coupling(k)},
                   {"cutoff", c.cutoff(k)},
                   {"modes", lat.size()},
                   {"fermion_configs", configs},
                   {"block_dim", configs * tuples},
                   {"blocks", blocks},
                   {"dimension", dim},
                   {"hop_entries_estimate", hops},
                   {"krylov_memory_bytes", configs * tuples * 16.0 * 42},
                   {"state_memory_bytes", dim * 16.0},
                   {"flop_estimate", hops * tuples * blocks * 8.0 * 40 * (1 + 2 * times.back())}};
            res.report["points"].push_back(p);
        }
        return res;
    }
    const std::string dir = out_dir(c, o);
    Manifest m(dir, c);
    const auto t0 = Clock::now();
    const ImpurityPotential w = make_w(c.w, c.L.front() * std::sqrt(double(c.d)));
    std::vector<std::string> keys;
    for (double k : c.kF) keys.push_back(key_of("k_F", k));
    auto rows = run_points(m, keys, o, [&](std::size_t i) -> json {
        const double k = c.kF[i];
        const ScalingSetup s(c, k);
        FockOptions fo;
        fo.m_max = c.m_max;
        fo.max_states = c.max_states;
        const FockBasis basis(s.ball, s.grid, spec, fo);
        const PotentialTable table = fock_consistent_table(c, k, spec, s.grid);
        const double lam = c.coupling(k);
        const ImpurityState xi0 = make_xi0(s.grid, c.xi0, c.seed);
        KrylovOptions ko;
        ko.tol = c.krylov_tol;

        const MicroHamiltonian H(basis, lam, w);
        const EffectiveHamiltonian h(s.grid, lam, table, w);
        const auto curve = deficit_curve(H, h, xi0, times, ko);
        json pts = json::array();
        for (const auto& p : curve) {
            const double bg = k >= 2 ? big_gamma(c.d, k, lam, p.t).value : std::numeric_limits<double>::quiet_NaN();
            pts.push_back({{"t", p.t},
                           {"deficit", p.deficit},
                           {"dropped_weight", p.dropped_weight},
                           {"norm", p.norm},
                           {"energy", p.energy},
                           {"big_gamma", bg}});
        }
        // coupling switched off: the microscopic and effective evolutions factorize exactly
        const MicroHamiltonian H0(basis, 0.0, w);
        const EffectiveHamiltonian h0(s.grid, 0.0, table, w);
        const double control = deficit_curve(H0, h0, xi0, {times.back()}, ko).back().deficit;
        const double rho = double(s.ball.particle_number()) / std::pow(c.L.front(), c.d);
        return json{{"k_F", k},
                    {"lambda", lam},
                    {"rho", rho},
                    {"dimension", basis.dimension()},
                    {"block_dim", basis.block_dim()},
                    {"fermion_configs", basis.fermion_count()},
                    {"duhamel_rate", duhamel_rate(H, h, xi0)},
                    {"control_deficit", control},
                    {"curve", pts}};
    }, res.resumed_points);

    const std::string csv = (fs::path(dir) / "scaling.csv").string();
    std::ostringstream os;
    os << "k_F,lambda,t,deficit,dropped_weight,norm,energy,big_gamma,control_deficit\n" << std::setprecision(12);
    for (const json& r : rows)
        for (const json& p : r.at("curve"))
            os << r.at("k_F").get<double>() << ',' << r.at("lambda").get<double>() << ',' << p.at("t").get<double>()
               << ',' << p.at("deficit").get<double>() << ',' << p.at("dropped_weight").get<double>() << ','
               << p.at("norm").get<double>() << ',' << p.at("energy").get<double>() << ','
               << p.value("big_gamma", std::numeric_limits<double>::quiet_NaN()) << ','
               << r.at("control_deficit").get<double>() << '\n';
    write_text(csv, os.str());
    res.files.push_back(csv);

    json rep;
    rep["points"] = rows;
    double control = 0;
    for (const json& r : rows) control = std::max(control, r.at("control_deficit").get<double>());
    rep["control_max"] = control;
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] == 0) continue;
        std::vector<double> ks, ds;
        bool mono = true;
        double worst_drop = 0;
        for (const json& r : rows) {
            const json& p = r.at("curve")[j];
            const double dv = p.at("deficit").get<double>();
            if (!ds.empty() && !(dv < ds.back())) mono = false;
            ks.push_back(r.at("k_F").get<double>());
            ds.push_back(dv);
            worst_drop = std::max(worst_drop, p.at("dropped_weight").get<double>() / dv);
        }
        std::vector<double> corrected;
        for (std::size_t q = 0; q < ks.size(); ++q) corrected.push_back(ds[q] / std::pow(std::log(ks[q]), 3));
        rep["trend"].push_back({{"t", times[j]},
                                {"monotone_decreasing", mono},
                                {"loglog_slope", loglog_slope(ks, ds)},
                                {"loglog_slope_log3_corrected", loglog_slope(ks, corrected)},
                                {"reference_slope", -0.5},
                                {"max_dropped_over_deficit", worst_drop}});
    }
    const std::string path = (fs::path(dir) / "scaling_report.json").string();
    write_text(path, rep.dump(2) + "\n");
    res.files.push_back(path);
    m.finish(rep, seconds_since(t0));
    res.report = rep;
    return res;
}

RunResult run_bounds(const ExperimentConfig& c, const RunOptions& o) {
    const PotentialSpec spec = make_spec(c.spec);
    for (double k : c.kF)
        if (k < 2) throw ConfigError("bounds need k_F >= 2");
    struct Point {
        double kF, L;
    };
    std::vector<Point> pts;
    std::vector<std::string> keys;
    for (double k : c.kF)
        for (double l : c.L) {
            pts.push_back({k, l});
            keys.push_back(key_of("k_F", k) + "," + key_of("L", l));
        }
    RunResult res;
    if (o.dry_run) {
        for (const Point& p : pts) {
            const MomentumLattice lat(c.d, p.L, c.cutoff(p.kF));
            const FermiBall ball(lat, p.kF);
            res.report["points"].push_back({{"k_F", p.kF},
                                            {"L", p.L},
                                            {"ball", ball.members().size()},
                                            {"outside", ball.outside().size()},
                                            {"nested_matrix_entries", double(ball.outside().size()) * ball.outside().size()}});
        }
        return res;
    }
    const std::string dir = out_dir(c, o);
    Manifest m(dir, c);
    const auto t0 = Clock::now();
    auto rows = run_points(m, keys, o, [&](std::size_t i) -> json {
        const MomentumLattice lat(c.d, pts[i].L, c.cutoff(pts[i].kF));
        const FermiBall ball(lat, pts[i].kF);
        const bool big = pts[i].kF <= c.a1_kF_max;
        const std::array<bool, 5> a{c.lemmaA1, c.lemmaA1, c.lemmaA1, c.lemmaA1 && big, c.lemmaA1 && big};
        return bound_report(ball, spec, c.lemma2, a, c.tail_tol).to_json();
    }, res.resumed_points);

    json all = json::array();
    std::ostringstream csv;
    csv << "sum,d,k_F,L,cutoff,value,tail,envelope,ratio\n" << std::setprecision(12);
    // sum -> L -> kF -> (value, ratio)
    std::map<std::string, std::map<double, std::map<double, std::pair<double, double>>>> table;
    for (const json& r : rows)
        for (const json& s : r) {
            all.push_back(s);
            csv << s.at("sum").get<std::string>() << ',' << s.at("d").get<int>() << ',' << s.at("k_F").get<double>()
                << ',' << s.at("L").get<double>() << ',' << s.at("cutoff").get<double>() << ','
                << s.at("value").get<double>() << ',' << (s.at("tail").is_null() ? std::string("") : s.at("tail").dump())
                << ',' << s.at("envelope").get<double>() << ',' << s.at("ratio").get<double>() << '\n';
            table[s.at("sum")][s.at("L")][s.at("k_F")] = {s.at("value").get<double>(), s.at("ratio").get<double>()};
        }
    const std::string jpath = (fs::path(dir) / "bounds.json").string();
    const std::string cpath = (fs::path(dir) / "bounds.csv").string();
    write_text(jpath, all.dump(2) + "\n");
    write_text(cpath, csv.str());
    res.files = {jpath, cpath};

    json rep;
    const double Lmax = *std::max_element(c.L.begin(), c.L.end());
    for (const auto& [sum, byL] : table) {
        json e;
        e["sum"] = sum;
        const auto it = byL.find(Lmax);
        if (it == byL.end()) continue;
        double lo = std::numeric_limits<double>::infinity(), hi = 0;
        for (const auto& [k, vr] : it->second) {
            lo = std::min(lo, vr.second);
            hi = std::max(hi, vr.second);
        }
        e["ratio_band"] = hi / lo;
        e["ratio_stable"] = hi / lo < 5;
        // final doubling
        if (byL.size() >= 2) {
            const auto prev = std::prev(it);
            double worst = 0;
            for (const auto& [k, vr] : it->second) {
                const auto q = prev->second.find(k);
                if (q == prev->second.end()) continue;
                worst = std::max(worst, std::abs(vr.first - q->second.first) / std::abs(vr.first));
            }
            e["final_doubling_change"] = worst;
            e["L_converged"] = worst < 0.02;
        }
        rep["sums"].push_back(e);
    }
    const std::string path = (fs::path(dir) / "bounds_report.json").string();
    write_text(path, rep.dump(2) + "\n");
    res.files.push_back(path);
    m.finish(rep, seconds_since(t0));
    res.report = rep;
    return res;
}

RunResult run_proposition2(const ExperimentConfig& c, const RunOptions& o) {
    const PotentialSpec spec = make_spec(c.spec);
    if (c.n < 2) throw ConfigError("proposition2 needs n >= 2");
    std::vector<double> times = c.t;
    std::sort(times.begin(), times.end());
    if (times.front() <= 0) throw ConfigError("proposition2 times must be positive");
    const ImpurityGrid g{c.n, c.d, c.M_imp, c.L.front()};
    g.validate();
    RunResult res;
    if (o.dry_run) {
        res.report["grid_size"] = g.size();
        res.report["W_points"] = grid_distances(g).size() * c.kF.size();
        return res;
    }
    const std::string dir = out_dir(c, o);
    Manifest m(dir, c);
    const auto t0 = Clock::now();
    const ImpurityPotential w = make_w(c.w, c.L.front() * std::sqrt(double(c.d)));
    std::vector<std::string> keys;
    for (double k : c.kF) keys.push_back(key_of("k_F", k));
    auto rows = run_points(m, keys, o, [&](std::size_t i) -> json {
        const double k = c.kF[i];
        const double lam = c.coupling(k);
        const PotentialTable table = tabulate_quadrature(c.d, k, spec, grid_distances(g), c.rel_tol);
        const ImpurityState xi0 = make_xi0(g, c.xi0, c.seed);
        const EffectiveHamiltonian h(g, lam, table, w, EffectiveVariant::h_n);
        const EffectiveHamiltonian ht(g, lam, table, w, EffectiveVariant::h_tilde);
        // c0 = sum_{i<j} <xi0, lambda^2 W(|y_i - y_j|) xi0> read off the generator difference
        const ImpurityState a = h.apply(xi0), b = ht.apply(xi0);
        double c0 = 0, rate = 0;
        for (std::size_t q = 0; q < xi0.amplitudes().size(); ++q) {
            const cplx dlt = b.amplitudes()[q] - a.amplitudes()[q];
            c0 += (std::conj(xi0.amplitudes()[q]) * dlt).real();
            rate += std::norm(dlt);
        }
        rate = std::sqrt(rate);
        json out{{"k_F", k}, {"lambda", lam}, {"c0", c0}, {"first_order_rate", rate}};
        if (!(c0 > 0))
            throw ConfigError("initial state violates the core condition: c0 = " + std::to_string(c0));
        std::vector<double> def;
        for (double t : times) {
            const ImpurityState x1 = evolve_effective(xi0, h, t).state;
            const ImpurityState x2 = evolve_effective(xi0, ht, t).state;
            double s = 0;
            for (std::size_t q = 0; q < x1.amplitudes().size(); ++q)
                s += std::norm(x1.amplitudes()[q] - x2.amplitudes()[q]);
            def.push_back(std::sqrt(s));
        }
        const auto [lin, quad] = fit_linear_quadratic(times, def);
        out["t"] = times;
        out["deficit"] = def;
        out["fit_linear"] = lin;
        out["fit_quadratic"] = quad;
        out["relative_mismatch"] = std::abs(lin - c0) / c0;
        out["applicable"] = c0 > 1e-6 * std::abs(table.scaled_at(0.0)) * c.n * (c.n - 1) / 2;
        return out;
    }, res.resumed_points);
    json rep;
    rep["points"] = rows;
    const std::string path = (fs::path(dir) / "proposition2_report.json").string();
    write_text(path, rep.dump(2) + "\n");
    res.files.push_back(path);
    m.finish(rep, seconds_since(t0));
    res.report = rep;
    return res;
}

RunResult run_certify(const ExperimentConfig& c, const RunOptions& o) {
    const PotentialSpec spec = make_spec(c.spec);
    const double R = spec.kind() == ProfileKind::yukawa ? spec.yukawa_R() : 1.0;
    RunResult res;
    json rep;
    const CertificateReport cr = certify_assumptions(spec, R);
    rep["spec"] = {{"id", spec.id()},
                   {"R", cr.R},
                   {"worst_envelope_violation", cr.worst_envelope_violation},
                   {"worst_at", cr.worst_at},
                   {"core_margin", cr.core_margin},
                   {"core_ok", cr.core_ok},
                   {"warnings", cr.warnings}};
    const ImpurityPotential w = make_w(c.w, c.L.front() * std::sqrt(double(c.d)));
    rep["w"] = {{"id", w.id()}, {"certified", w.certified()}, {"sup_abs", w.sup_abs()}, {"relative_bound", w.relative_bound()}};
    res.report = rep;
    if (o.dry_run) return res;
    const std::string dir = out_dir(c, o);
    const std::string path = (fs::path(dir) / "certify.json").string();
    write_text(path, rep.dump(2) + "\n");
    res.files.push_back(path);
    return res;
}

RunResult run_experiment(const ExperimentConfig& c, const RunOptions& o) {
    switch (c.experiment) {
        case Experiment::potential: return run_potential(c, o);
        case Experiment::scaling: return run_scaling(c, o);
        case Experiment::bounds: return run_bounds(c, o);
        case Experiment::proposition2: return run_proposition2(c, o);
        case Experiment::certify: return run_certify(c, o);
    }
    throw ConfigError("unknown experiment");
}

}  // namespace fermipair
