#pragma once

#include <string>
#include <vector>

#include "mmg/space.hpp"

namespace mmg {

// Dual problem: maximize sum g_i (mu_i - nu_i) over g: host -> [-1,1]
// that are L-Lipschitz and vanish outside the closed ball B(base, r).
struct FlatProblem {
    PointedSpace host;
    std::vector<double> mu, nu;
    double L = 1.0;
    double r = 1.0;

    std::vector<std::string> validate() const;
};

struct FlatSolution {
    double value = 0.0;
    std::vector<double> witness;       // empty when only the value was requested
    std::vector<std::size_t> active;   // indices inside B(base, r)
    double feas_tol = 1e-9;            // solver feasibility tolerance
};

// Exact optimum. The problem is solved as a balanced transportation
// problem (mass surplus/deficit may be created or destroyed at the
// pointwise cost implied by the box and support constraints); the witness
// is recovered from the tight constraints and certifies optimality
// together with the flow by strong duality.
FlatSolution flat_lr(const FlatProblem& p, bool want_witness = true);

// inf over eps in (0,1/2) with flat_lr(L, 1/eps) < eps; 1/2 if none.
// Bisection to absolute tolerance `tol`; the predicate is monotone in eps.
double flat_L(const PointedSpace& host, const std::vector<double>& mu,
              const std::vector<double>& nu, double L, double tol = 1e-6);

// Same with L = r = 1/eps.
double flat(const PointedSpace& host, const std::vector<double>& mu,
            const std::vector<double>& nu, double tol = 1e-6);

// Independent feasibility/optimality certificate: box, support, Lipschitz
// constraints and the objective identity. Empty result means the witness
// proves the reported value is optimal (the solver checked the matching
// flow bound internally).
std::vector<std::string> verify_flat_solution(const FlatProblem& p, const FlatSolution& s);

// Distance-from-basepoint projection. Any test function of the basepoint
// distance transfers to every isometric embedding, so flat values on the
// projected pair bound the corresponding values in any common host from
// below. Used for certified lower bounds.
struct RadialPair {
    PointedSpace host;          // points on a half line, base at 0
    std::vector<double> mu, nu;
};
RadialPair radial_projection(const MeasuredSpace& left, const MeasuredSpace& right);

// sup over eps with F^{1/eps,1/eps}(radial mu, radial nu) >= eps, i.e. a
// lower bound for the basepointed measure distance over all embeddings.
double radial_lower_bound(const MeasuredSpace& left, const MeasuredSpace& right,
                          double tol = 1e-6);

}  // namespace mmg
