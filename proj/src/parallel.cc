/* Copyright 2026 The osgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "osgate/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>

namespace osgate {

namespace {

std::atomic<int> g_override{0};

int env_cap() {
  static const int cap = [] {
    const char* raw = std::getenv("OSGATE_THREADS");
    if (raw == nullptr) return 0;
    try {
      return std::max(0, std::stoi(raw));
    } catch (...) {
      return 0;
    }
  }();
  return cap;
}

}  // namespace

int thread_cap() {
  if (const int o = g_override.load(std::memory_order_relaxed); o > 0) return o;
  const int max_threads = std::max(1, omp_get_max_threads());
  const int cap = env_cap();
  return cap > 0 ? std::min(cap, max_threads) : max_threads;
}

void set_thread_cap(int threads) { g_override.store(threads > 0 ? threads : 0); }

}  // namespace osgate
