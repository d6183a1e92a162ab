// Copyright 2026 The bcpnn-higgs Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bcpnn/parallel.hpp"

#include <atomic>

namespace bcpnn {

namespace {
std::atomic<std::size_t> g_threads{1};
}

std::size_t num_threads() { return g_threads.load(std::memory_order_relaxed); }

void set_num_threads(std::size_t n) {
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  g_threads.store(n, std::memory_order_relaxed);
}

}  // namespace bcpnn
