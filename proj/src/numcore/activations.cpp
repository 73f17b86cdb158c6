#include "wgf/activations.hpp"

#include <cmath>

namespace wgf {

double softplus(double u) {
    return std::fmax(u, 0.0) + std::log1p(std::exp(-std::fabs(u)));
}

double sigmoid(double u) {
    if (u >= 0.0) {
        const double e = std::exp(-u);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

double softplus_d(double u, int order) {
    switch (order) {
        case 0:
            return softplus(u);
        case 1:
            return sigmoid(u);
        case 2: {
            const double s = sigmoid(u);
            return s * (1.0 - s);
        }
        default:
            throw InvalidArgument("softplus_d: order must be 0, 1, or 2");
    }
}

SoftplusLadder softplus_ladder(double u) {
    const double s = sigmoid(u);
    const double d2 = s * (1.0 - s);
    return {softplus(u), s, d2, d2 * (1.0 - 2.0 * s)};
}

void softplus_ladder_fill(const double* u, std::size_t n, double* value, double* d1,
                          double* d2, double* d3) {
    for (std::size_t i = 0; i < n; ++i) {
        const SoftplusLadder l = softplus_ladder(u[i]);
        if (value) value[i] = l.value;
        if (d1) d1[i] = l.d1;
        if (d2) d2[i] = l.d2;
        if (d3) d3[i] = l.d3;
    }
}

}  // namespace wgf
