#pragma once

#include <cstddef>
#include <vector>

#include "camel/ctensor.hpp"

namespace camel {

/// One few-shot task: a labelled support set for adaptation and a query set for scoring.
///
/// Frames are stacked into (count, 1, frame_len) tensors. Labels are local, in [0, n_way);
/// `classes[label]` maps them back to the pool's scheme ids.
struct Episode {
    CTensor support_x;
    std::vector<int> support_y;
    CTensor query_x;
    std::vector<int> query_y;
    std::vector<int> classes;
    std::size_t n_way = 0;
    std::size_t k_shot = 0;
};

}  // namespace camel
