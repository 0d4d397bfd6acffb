#pragma once

// Direct transcription of the window/partition case rules, written with signed
// arithmetic and independent of the library's branch structure.

#include <vector>

namespace dualsr::testing {

struct OracleGroups {
    std::vector<long> window, g1, g2, g3;
};

inline OracleGroups nbp_oracle(long i, long L)
{
    OracleGroups o;
    if (i < 3) {
        o.window = {1, 2, 3, 4, 5};
        o.g2 = {1, 2, 3};
        o.g3 = {4, i, 5};
    } else if (i > L - 3) {
        o.window = {L - 4, L - 3, L - 2, L - 1, L};
        o.g2 = {L - 2, L - 1, L};
        o.g3 = {L - 3, i, L - 4};
    } else {
        o.window = {i - 2, i - 1, i, i + 1, i + 2};
        o.g2 = {i - 1, i, i + 1};
        o.g3 = {i - 2, i, i + 2};
    }
    o.g1 = {i};
    return o;
}

} // namespace dualsr::testing
