#include "cloaksynth/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cloak {

QuadratureRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre needs n >= 1");
    QuadratureRule q;
    q.nodes.resize(n);
    q.weights.resize(n);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged node for the weight.
        double p0 = 1.0, p1 = x;
        for (int k = 1; k < n; ++k) {
            const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
            p0 = p1;
            p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = mid - half * x;
        q.nodes[n - 1 - i] = mid + half * x;
        q.weights[i] = q.weights[n - 1 - i] = w * half;
    }
    if (n % 2 == 1) q.nodes[n / 2] = mid;
    return q;
}

QuadratureRule gauss_sqrt_endpoint(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_sqrt_endpoint needs n >= 1");
    if (!(b > a)) throw std::invalid_argument("gauss_sqrt_endpoint needs b > a");
    const double S = std::sqrt(b - a);
    const auto g = gauss_legendre(2 * n, -S, S);
    QuadratureRule q;
    q.nodes.resize(n);
    q.weights.resize(n);
    // Positive half of the symmetric rule, ascending in x = b - s^2.
    for (int i = 0; i < n; ++i) {
        const double s = g.nodes[2 * n - 1 - i];
        q.nodes[i] = b - s * s;
        q.weights[i] = 2.0 * g.weights[2 * n - 1 - i] * s * s;
    }
    return q;
}

}  // namespace cloak
