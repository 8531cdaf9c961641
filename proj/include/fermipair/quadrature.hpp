#pragma once

// Globally adaptive 21-point Gauss-Kronrod quadrature. Node tables come from
// Boost.Math; the bisection driver is ours so callers can seed their own panels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

namespace fermipair {

struct QuadOptions {
    double abs_tol = 0;
    double rel_tol = 1e-10;
    std::size_t max_intervals = 4000;
};

struct QuadResult {
    double value = 0;
    double error = 0;
    std::size_t evaluations = 0;
    bool converged = true;

    QuadResult& operator+=(const QuadResult& o) {
        value += o.value;
        error += o.error;
        evaluations += o.evaluations;
        converged = converged && o.converged;
        return *this;
    }
};

namespace detail {

struct GK21 {
    double xk[11];  // xk[0] = 0, odd entries are the Gauss nodes
    double wk[11];
    double wg[5];   // Gauss weights for xk[1], xk[3], ..., xk[9]
};
const GK21& gk21();

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk_panel(F& f, double a, double b) {
    const GK21& r = gk21();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double fl[11], fr[11];
    fl[0] = fr[0] = f(c);
    double k = r.wk[0] * fl[0], g = 0, kabs = r.wk[0] * std::abs(fl[0]);
    for (int i = 1; i < 11; ++i) {
        const double x = h * r.xk[i];
        fl[i] = f(c - x);
        fr[i] = f(c + x);
        const double s = fl[i] + fr[i];
        k += r.wk[i] * s;
        kabs += r.wk[i] * (std::abs(fl[i]) + std::abs(fr[i]));
        if (i % 2 == 1) g += r.wg[i / 2] * s;
    }
    // QUADPACK qk21 error heuristic
    const double mean = 0.5 * k;
    double asc = r.wk[0] * std::abs(fl[0] - mean);
    for (int i = 1; i < 11; ++i) asc += r.wk[i] * (std::abs(fl[i] - mean) + std::abs(fr[i] - mean));
    const double ah = std::abs(h);
    k *= h;
    g *= h;
    kabs *= ah;
    asc *= ah;
    double err = std::abs(k - g);
    if (asc != 0 && err != 0) err = asc * std::min(1.0, std::pow(200 * err / asc, 1.5));
    err = std::max(err, 50 * std::numeric_limits<double>::epsilon() * kabs);
    if (!std::isfinite(k)) err = std::numeric_limits<double>::infinity();
    return {a, b, k, err};
}

}  // namespace detail

// Integrates f over the union of [edges[i], edges[i+1]]; edges must be sorted.
template <class F>
QuadResult integrate_panels(F&& f, const std::vector<double>& edges, const QuadOptions& opt = {}) {
    QuadResult res;
    if (edges.size() < 2) return res;
    std::priority_queue<detail::Panel> heap;
    double total = 0, err = 0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (!(edges[i + 1] > edges[i])) continue;
        detail::Panel p = detail::gk_panel(f, edges[i], edges[i + 1]);
        res.evaluations += 21;
        total += p.value;
        err += p.error;
        heap.push(p);
    }
    while (!heap.empty()) {
        const double tol = std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
        if (err <= tol) break;
        if (heap.size() >= opt.max_intervals) {
            res.converged = false;
            break;
        }
        detail::Panel p = heap.top();
        const double m = 0.5 * (p.a + p.b);
        if (!(m > p.a && m < p.b)) {  // cannot bisect further
            res.converged = false;
            break;
        }
        heap.pop();
        detail::Panel l = detail::gk_panel(f, p.a, m), r = detail::gk_panel(f, m, p.b);
        res.evaluations += 42;
        total += l.value + r.value - p.value;
        err += l.error + r.error - p.error;
        heap.push(l);
        heap.push(r);
    }
    // re-sum to shed the drift of the running totals
    total = 0;
    err = 0;
    while (!heap.empty()) {
        total += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    res.value = total;
    res.error = err;
    return res;
}

template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opt = {}) {
    return integrate_panels(f, std::vector<double>{a, b}, opt);
}

// Sorted, de-duplicated edges: {a, b} plus the interior breaks.
std::vector<double> panel_edges(double a, double b, const std::vector<double>& breaks);

}  // namespace fermipair
