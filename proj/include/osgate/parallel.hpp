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

#pragma once

namespace osgate {

// Which implementation of a batch kernel to run. kSerial is the per-item
// reference path kept for testing; kParallel is the blocked OpenMP path.
enum class ExecPolicy { kSerial, kParallel };

// Thread count used by every OpenMP region. Defaults to the OpenMP maximum,
// capped by the OSGATE_THREADS environment variable when set.
int thread_cap();

// Overrides the cap for the rest of the process (values < 1 reset to default).
void set_thread_cap(int threads);

}  // namespace osgate
