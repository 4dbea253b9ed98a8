// Prints the (1,3) caustic of the 2x1 ellipse, the inscribed triangle
// tangent to it, and how far one billiard trip around it misses closing.

#include <cstdio>

#include "ellflow/ellflow.hpp"

int main() {
    using namespace ellflow;
    const EllipseTable table = make_table(2.0, 1.0);
    const CausticData cd = resonant_caustic(table, make_resonance(1, 3));
    std::printf("lambda = %.15f  k = %.15f  delta = %.15f  rho = %.15f\n", cd.lambda, cd.modulus.k, cd.delta, cd.rho);

    const EllipseBoundary ellipse(table);
    PhaseState s = polygon_start(ellipse, cd, 0.0);
    const PhaseState start = s;
    for (int j = 0; j < 3; ++j) {
        const Point q = ellipse.point(s.phi);
        std::printf("vertex %d: (%+.12f, %+.12f)  tangency %.2e\n", j, q.x(), q.y(),
                    tangency_residual(table, cd, j * cd.delta));
        s = billiard_step(ellipse, s);
    }
    std::printf("closure: dphi = %.2e after one turn\n", s.unwrapped() - start.unwrapped() - 2.0 * std::numbers::pi);
    return 0;
}
