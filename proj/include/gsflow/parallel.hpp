#pragma once

#include <cstddef>
#include <functional>

namespace gsflow {

// Static-partition parallel loop over [0, n). Iterations must write to
// disjoint state; results are then identical for any worker count. Thread
// count comes from set_num_threads or the GSFLOW_THREADS environment
// variable, defaulting to the hardware count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

void set_num_threads(int n);
int num_threads();

}  // namespace gsflow
