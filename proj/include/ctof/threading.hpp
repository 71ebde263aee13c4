#pragma once

#include <functional>

namespace ctof {

// Worker count for parallel loops; 0 or 1 means serial. Results never depend
// on the setting: workers own disjoint index ranges and any reduction happens
// in index order afterwards.
void set_worker_threads(int n);
int worker_threads();

void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace ctof
