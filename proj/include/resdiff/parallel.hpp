// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace resdiff {

// Worker cap: RESDIFF_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
// handled exactly once; callers write results into per-index slots so the
// outcome does not depend on scheduling. Exceptions from fn are rethrown
// (the one from the lowest index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace resdiff
