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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "itoflow/rng.hpp"

using namespace itoflow;

TEST_CASE("draws are pure functions of their coordinates") {
  const double a = rng::uniform(42, rng::Channel::kIncrement, 7, 3, 1);
  const double b = rng::uniform(42, rng::Channel::kIncrement, 7, 3, 1);
  CHECK(a == b);
  CHECK(a != rng::uniform(43, rng::Channel::kIncrement, 7, 3, 1));
  CHECK(a != rng::uniform(42, rng::Channel::kAux, 7, 3, 1));
  CHECK(a != rng::uniform(42, rng::Channel::kIncrement, 8, 3, 1));
  CHECK(a != rng::uniform(42, rng::Channel::kIncrement, 7, 4, 1));
  CHECK(a != rng::uniform(42, rng::Channel::kIncrement, 7, 3, 2));
}

TEST_CASE("uniform lands in (0, 1]") {
  for (std::uint64_t i = 0; i < 100000; ++i) {
    const double u = rng::uniform(1, rng::Channel::kSample, i, 0, 0);
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("normals have the right first two moments") {
  const int n = 200000;
  std::vector<double> draws(n);
  rng::normals(5, rng::Channel::kIncrement, 0, 0, n, draws.data());
  double mean = 0.0;
  for (double x : draws) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : draws) var += (x - mean) * (x - mean);
  var /= n - 1;
  // 4 standard errors: se(mean)=1/sqrt(n), se(var)=sqrt(2/n).
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("normal_pair matches the bulk generator") {
  double pair[2];
  rng::normal_pair(9, rng::Channel::kInit, 4, 2, 0, pair);
  double bulk[2];
  rng::normals(9, rng::Channel::kInit, 4, 2, 2, bulk);
  CHECK(pair[0] == bulk[0]);
  CHECK(pair[1] == bulk[1]);
}

TEST_CASE("scheme id is pinned") {
  CHECK(std::strcmp(rng::kSchemeId, "counter-mix64-boxmuller-v1") == 0);
}
