#include "reconnet/parallel.hpp"

#include <omp.h>

namespace reconnet {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int threads) { omp_set_num_threads(threads < 1 ? 1 : threads); }

ScopedThreads::ScopedThreads(int threads) : previous_(max_threads()) { set_threads(threads); }

ScopedThreads::~ScopedThreads() { set_threads(previous_); }

}  // namespace reconnet
