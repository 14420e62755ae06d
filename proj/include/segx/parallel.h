/*
 * Copyright 2026 The SegX Toolkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SEGX_PARALLEL_H_
#define SEGX_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace segx {

// Runs fn(i) for i in [0, n) on up to `jobs` threads (jobs <= 1 runs
// inline). Work is split into contiguous static chunks. Callers write
// results by index, so output never depends on scheduling. The exception
// from the lowest failing index is rethrown after all workers finish.
void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace segx

#endif  // SEGX_PARALLEL_H_
