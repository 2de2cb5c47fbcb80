#pragma once

#include <functional>

namespace mvs {

/// Number of worker threads used by module-internal loops. 1 is the
/// bit-reference configuration.
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, count). Iterations must write disjoint outputs;
/// reductions belong in the caller after the loop, in index order.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace mvs
