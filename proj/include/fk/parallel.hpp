#pragma once

#include <cstddef>
#include <functional>

namespace fk {

// Worker count for parallel_for. Defaults to FK_JOBS when set, otherwise the
// hardware concurrency.
int jobs();
void set_jobs(int n);

// Calls body(k) for k in [0, n) on up to jobs() threads. Each index runs
// exactly once; callers write results to index-owned slots, so the outcome
// does not depend on scheduling. The first exception thrown is rethrown.
// Calls nested inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace fk
