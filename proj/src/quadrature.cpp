#include "fermipair/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace fermipair {

namespace detail {

const GK21& gk21() {
    static const GK21 table = [] {
        GK21 t{};
        const auto& xk = boost::math::quadrature::gauss_kronrod<double, 21>::abscissa();
        const auto& wk = boost::math::quadrature::gauss_kronrod<double, 21>::weights();
        const auto& wg = boost::math::quadrature::gauss<double, 10>::weights();
        for (int i = 0; i < 11; ++i) {
            t.xk[i] = xk[i];
            t.wk[i] = wk[i];
        }
        for (int i = 0; i < 5; ++i) t.wg[i] = wg[i];
        return t;
    }();
    return table;
}

}  // namespace detail

std::vector<double> panel_edges(double a, double b, const std::vector<double>& breaks) {
    std::vector<double> e{a, b};
    for (double x : breaks)
        if (x > a && x < b) e.push_back(x);
    std::sort(e.begin(), e.end());
    std::vector<double> out;
    for (double x : e)
        if (out.empty() || x - out.back() > 1e-14 * (1 + std::abs(x))) out.push_back(x);
    if (out.back() != b) out.back() = b;
    return out;
}

}  // namespace fermipair
