#include "misc/threads.hpp"

#include <omp.h>

#include <Eigen/Core>
#include <algorithm>

namespace misc {

void set_threads(int n) {
  n = std::max(n, 1);
  omp_set_num_threads(n);
  Eigen::setNbThreads(n);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace misc
