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
#include "itoflow/rng.hpp"

#include <cmath>
#include <numbers>

namespace itoflow::rng {

namespace {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t hash(std::uint64_t seed, Channel channel, std::uint64_t stream,
                   std::uint64_t step, std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(channel));
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ step);
  h = splitmix64(h ^ counter);
  return h;
}

double uniform(std::uint64_t seed, Channel channel, std::uint64_t stream,
               std::uint64_t step, std::uint64_t counter) {
  const std::uint64_t h = hash(seed, channel, stream, step, counter);
  return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

void normal_pair(std::uint64_t seed, Channel channel, std::uint64_t stream,
                 std::uint64_t step, std::uint64_t counter, double* out2) {
  const double u1 = uniform(seed, channel, stream, step, 2 * counter);
  const double u2 = uniform(seed, channel, stream, step, 2 * counter + 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  out2[0] = r * std::cos(theta);
  out2[1] = r * std::sin(theta);
}

void normals(std::uint64_t seed, Channel channel, std::uint64_t stream,
             std::uint64_t step, int n, double* out) {
  double pair[2];
  for (int i = 0; i < n; i += 2) {
    normal_pair(seed, channel, stream, step, static_cast<std::uint64_t>(i / 2),
                pair);
    out[i] = pair[0];
    if (i + 1 < n) out[i + 1] = pair[1];
  }
}

}  // namespace itoflow::rng
