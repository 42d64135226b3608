/*
 * Copyright 2026 The passband authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace passband {

/// Activation and patch buffers in the tens of megabytes are allocated and
/// freed once per layer call. glibc serves blocks that size via mmap and
/// returns them to the kernel on free, so every call page-faults a fresh
/// zeroed mapping; keeping large blocks on the heap roughly triples
/// single-core training throughput. Idempotent, process-wide.
inline void tune_allocator_for_large_buffers() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, -1);
    return true;
  }();
  (void)once;
#endif
}

}  // namespace passband
