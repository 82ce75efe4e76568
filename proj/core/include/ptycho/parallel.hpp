#pragma once

#include <functional>

namespace ptycho {

/// Process-wide cap on worker threads for shift-parallel loops. Results are
/// identical for any setting: each index writes disjoint output, and any
/// cross-shift reduction happens sequentially in shift order afterwards.
void set_max_threads(int k);
int max_threads();

/// Runs body(0..count-1), possibly on multiple threads.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace ptycho
