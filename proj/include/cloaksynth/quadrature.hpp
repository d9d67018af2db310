#pragma once

#include <vector>

namespace cloak {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [a, b], nodes ascending.
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Rule for integral_{a}^{b} sqrt(b - x) f(x) dx, exact for polynomial f of
// degree <= 2n - 2. Built by the substitution b - x = s^2 from a Gauss-Legendre rule.
QuadratureRule gauss_sqrt_endpoint(int n, double a, double b);

}  // namespace cloak
