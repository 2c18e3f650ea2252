#pragma once

#include <functional>
#include <vector>

namespace oma {

double norm_pdf(double x);
double norm_cdf(double x);
// Inverse of norm_cdf on (0,1); accurate to ~1e-15 (rational approx + one
// Halley refinement).
double inv_norm_cdf(double u);

// Nodes/weights for \int_{-inf}^{inf} e^{-y^2} f(y) dy ~ sum w_i f(y_i).
// For Z ~ N(0,1): E[f(Z)] = (1/sqrt(pi)) sum w_i f(sqrt(2) y_i).
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

const QuadratureRule& gauss_hermite(int n);

// Nodes/weights for \int_a^b f(x) dx.
QuadratureRule gauss_legendre(int n, double a, double b);

// Root of f on [lo, hi]; requires a sign change. Brent's method, stops when
// |f| <= f_tol or the bracket shrinks below x_tol.
double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double f_tol, double x_tol = 1e-14, int max_iter = 200);

// Maximum of f on [lo, hi] by golden-section search; ties resolved toward lo.
struct ScalarMax {
    double arg;
    double value;
};
ScalarMax golden_max(const std::function<double(double)>& f, double lo,
                     double hi, double x_tol, int max_iter = 120);

} // namespace oma
