/*
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

#include <cstdint>

namespace itoflow::rng {

// Counter-based generator: every draw is a pure function of
// (seed, stream, step, counter). Streams are typically path indices, so
// simulation results do not depend on evaluation order or thread count.
inline constexpr const char* kSchemeId = "counter-mix64-boxmuller-v1";

// Logical channels keep independent uses of the same (seed, path, step)
// triple from colliding.
enum class Channel : std::uint64_t {
  kInit = 1,
  kIncrement = 2,
  kAux = 3,
  kBootstrap = 4,
  kProbe = 5,
  kSample = 6,
};

std::uint64_t hash(std::uint64_t seed, Channel channel, std::uint64_t stream,
                   std::uint64_t step, std::uint64_t counter);

// Uniform on (0, 1].
double uniform(std::uint64_t seed, Channel channel, std::uint64_t stream,
               std::uint64_t step, std::uint64_t counter);

// One pair of independent standard normals (Box-Muller).
void normal_pair(std::uint64_t seed, Channel channel, std::uint64_t stream,
                 std::uint64_t step, std::uint64_t counter, double* out2);

// Fills out[0..n) with standard normals drawn from counters 0, 1, ...
void normals(std::uint64_t seed, Channel channel, std::uint64_t stream,
             std::uint64_t step, int n, double* out);

}  // namespace itoflow::rng
