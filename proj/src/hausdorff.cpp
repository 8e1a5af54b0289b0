#include "mmg/hausdorff.hpp"

#include <cmath>
#include <limits>

namespace mmg {

std::vector<std::size_t> neighborhood(const PointedSpace& host,
                                      const std::vector<std::size_t>& S, double r) {
    if (S.empty()) throw DomainError("neighborhood of the empty set is undefined");
    if (r < 0.0) throw DomainError("neighborhood radius must be nonnegative");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < host.size(); ++i) {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t s : S) d = std::min(d, host.dist(i, s));
        if (d <= r) out.push_back(i);
    }
    return out;
}

LocalHausdorffResult local_hausdorff(const SubsetPair& p) {
    if (p.left.empty() || p.right.empty())
        throw DomainError("local Hausdorff needs nonempty sides");
    for (std::size_t i : p.left)
        if (i >= p.host.size()) throw DomainError("left index out of range");
    for (std::size_t i : p.right)
        if (i >= p.host.size()) throw DomainError("right index out of range");

    const std::size_t z = p.host.base();
    LocalHausdorffResult res;
    auto scan = [&](const std::vector<std::size_t>& from,
                    const std::vector<std::size_t>& to, bool from_left) {
        for (std::size_t i : from) {
            double to_other = std::numeric_limits<double>::infinity();
            for (std::size_t j : to) to_other = std::min(to_other, p.host.dist(i, j));
            double a = p.host.dist(z, i);
            double window = a > 0.0 ? 1.0 / a : std::numeric_limits<double>::infinity();
            double lambda = std::min(to_other, window);
            if (lambda > res.critical_eps) {
                res.critical_eps = lambda;
                res.critical_index = i;
                res.critical_on_left = from_left;
            }
        }
    };
    scan(p.left, p.right, true);
    scan(p.right, p.left, false);
    res.value = std::min(0.5, res.critical_eps);
    return res;
}

}  // namespace mmg
