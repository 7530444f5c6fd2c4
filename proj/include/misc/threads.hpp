#pragma once

namespace misc {

// Sets the worker count for OpenMP loops and Eigen products. 1 gives
// bit-reproducible results.
void set_threads(int n);
int max_threads();

}  // namespace misc
