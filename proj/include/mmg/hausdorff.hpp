#pragma once

#include <vector>

#include "mmg/space.hpp"

namespace mmg {

struct SubsetPair {
    PointedSpace host;
    std::vector<std::size_t> left, right;
};

// Closed neighborhood {i : dist(i, S) <= r}.
std::vector<std::size_t> neighborhood(const PointedSpace& host,
                                      const std::vector<std::size_t>& S, double r);

struct LocalHausdorffResult {
    double value = 0.0;            // in [0, 1/2]
    double critical_eps = 0.0;     // uncapped threshold that forced the value
    std::size_t critical_index = 0;  // host index attaining the threshold
    bool critical_on_left = true;
};

// Infimum over eps in (0,1/2) of the two-sided containment
//   left  within B(z,1/eps) inside B(right, eps),
//   right within B(z,1/eps) inside B(left, eps).
// Each point contributes the exact threshold min(dist to other side,
// 1/dist to z); the value is the max over points, capped at 1/2. No
// bisection slack: the result is exact for finite hosts.
LocalHausdorffResult local_hausdorff(const SubsetPair& p);

}  // namespace mmg
