#include "fermipair/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fermipair {

namespace {

double interp(const std::vector<double>& x, const std::vector<double>& y, double t, double beyond) {
    if (x.empty()) return 0;
    if (t <= x.front()) return y.front();
    if (t > x.back()) return beyond;
    auto it = std::upper_bound(x.begin(), x.end(), t);
    const std::size_t j = std::size_t(it - x.begin());
    if (j >= x.size()) return y.back();
    const double a = (t - x[j - 1]) / (x[j] - x[j - 1]);
    return y[j - 1] + a * (y[j] - y[j - 1]);
}

void check_table(const std::vector<double>& x, const std::vector<double>& y, const char* what) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError(std::string(what) + ": need at least two nodes of equal length");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ConfigError(std::string(what) + ": non-finite entry");
        if (i && !(x[i] > x[i - 1])) throw ConfigError(std::string(what) + ": radii must increase");
    }
    if (x.front() < 0) throw ConfigError(std::string(what) + ": negative radius");
}

}  // namespace

PotentialSpec PotentialSpec::zero() { return PotentialSpec{}; }

PotentialSpec PotentialSpec::yukawa(double R) {
    if (!(R > 0)) throw ConfigError("yukawa profile needs R > 0");
    PotentialSpec s;
    s.kind_ = ProfileKind::yukawa;
    s.R_ = R;
    std::ostringstream os;
    os << "yukawa(R=" << R << ")";
    s.id_ = os.str();
    s.support_ = std::numeric_limits<double>::infinity();
    return s;
}

PotentialSpec PotentialSpec::step() {
    PotentialSpec s;
    s.kind_ = ProfileKind::step;
    s.id_ = "step";
    s.support_ = 1;
    s.breaks_ = {1.0};
    return s;
}

PotentialSpec PotentialSpec::table(std::vector<double> k, std::vector<double> v, std::string id) {
    check_table(k, v, "profile table");
    PotentialSpec s;
    s.kind_ = ProfileKind::table;
    s.id_ = std::move(id);
    s.support_ = k.back();
    s.breaks_ = k;
    s.tk_ = std::move(k);
    s.tv_ = std::move(v);
    return s;
}

PotentialSpec PotentialSpec::load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open profile table " + path);
    std::vector<double> k, v;
    std::string line;
    while (std::getline(in, line)) {
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        double a, b;
        if (ls >> a >> b) {
            k.push_back(a);
            v.push_back(b);
        }
    }
    return table(std::move(k), std::move(v), "table:" + path);
}

PotentialSpec PotentialSpec::custom(std::function<double(double)> f, std::string id, double support,
                                    std::vector<double> breaks) {
    PotentialSpec s;
    s.kind_ = ProfileKind::custom;
    s.id_ = std::move(id);
    s.f_ = std::move(f);
    s.support_ = support;
    s.breaks_ = std::move(breaks);
    return s;
}

double PotentialSpec::operator()(double k) const {
    k = std::abs(k);
    switch (kind_) {
        case ProfileKind::zero: return 0;
        case ProfileKind::yukawa: return 1.0 / (k * k + R_);
        case ProfileKind::step: return k <= 1.0 ? 0.5 : 0.0;
        case ProfileKind::table: return interp(tk_, tv_, k, 0.0);
        case ProfileKind::custom: return k > support_ ? 0.0 : f_(k);
    }
    return 0;
}

CertificateReport certify_assumptions(const PotentialSpec& spec, double R, int samples) {
    if (!(R > 0)) throw ConfigError("certificate needs R > 0");
    CertificateReport rep;
    rep.R = R;
    std::vector<double> ks{0.0};
    const double lo = std::log(1e-4), hi = std::log(1e3);
    for (int i = 0; i < samples; ++i) ks.push_back(std::exp(lo + (hi - lo) * i / (samples - 1)));
    for (double b : spec.breakpoints())
        for (double e : {-1e-12, 0.0, 1e-12})
            if (b + e >= 0) ks.push_back(b + e);
    for (int i = 0; i <= 200; ++i) ks.push_back(i / 200.0);  // core region
    std::sort(ks.begin(), ks.end());

    rep.worst_envelope_violation = -std::numeric_limits<double>::infinity();
    rep.core_margin = std::numeric_limits<double>::infinity();
    for (double k : ks) {
        const double v = std::abs(spec(k));
        if (!std::isfinite(v)) throw AssumptionViolated("profile " + spec.id() + " is not finite at |k|=" + std::to_string(k));
        const double viol = v - 1.0 / (k * k + R);
        if (viol > rep.worst_envelope_violation) {
            rep.worst_envelope_violation = viol;
            rep.worst_at = k;
        }
        if (k <= 1.0) rep.core_margin = std::min(rep.core_margin, v - 1.0 / (1.0 + R));
    }
    rep.core_ok = rep.core_margin >= -1e-12;
    if (!rep.core_ok) rep.warnings.push_back("no core lower bound |v| >= 1/(1+R) on |k| <= 1");
    if (rep.worst_envelope_violation > 1e-12) {
        std::ostringstream os;
        os << "profile " << spec.id() << " exceeds 1/(k^2+" << R << ") by " << rep.worst_envelope_violation
           << " at |k|=" << rep.worst_at;
        throw AssumptionViolated(os.str());
    }
    return rep;
}

ImpurityPotential ImpurityPotential::zero() { return ImpurityPotential{}; }

ImpurityPotential ImpurityPotential::bounded_table(std::vector<double> r, std::vector<double> w, std::string id) {
    check_table(r, w, "impurity potential");
    ImpurityPotential p;
    p.id_ = std::move(id);
    for (double x : w) p.sup_ = std::max(p.sup_, std::abs(x));
    p.r_ = std::move(r);
    p.w_ = std::move(w);
    return p;
}

ImpurityPotential ImpurityPotential::uncertified(std::vector<double> r, std::vector<double> w, double c, std::string id) {
    if (!(c >= 0 && c < 1)) throw ConfigError("relative bound c must lie in [0, 1)");
    ImpurityPotential p = bounded_table(std::move(r), std::move(w), std::move(id));
    p.c_ = c;
    p.certified_ = false;
    return p;
}

double ImpurityPotential::operator()(double r) const {
    if (r_.empty()) return 0;
    return interp(r_, w_, std::abs(r), w_.back());
}

}  // namespace fermipair
