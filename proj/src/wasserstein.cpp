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
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "itoflow/measure.hpp"

namespace itoflow {

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int c = 0; c < d; ++c) {
    const double diff = a[c] - b[c];
    s += diff * diff;
  }
  return s;
}

// One-dimensional optimal coupling: merge the two quantile functions.
double w2_sorted_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  auto order = [](const EmpiricalMeasure& m) {
    std::vector<std::size_t> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&m](std::size_t a, std::size_t b) {
      return m.points[a] < m.points[b];
    });
    return idx;
  };
  const auto ia = order(mu);
  const auto ib = order(nu);
  std::vector<double> costs;
  costs.reserve(mu.size() + nu.size());
  std::size_t a = 0, b = 0;
  double ra = mu.weights[ia[0]], rb = nu.weights[ib[0]];
  while (a < mu.size() && b < nu.size()) {
    const double m = std::min(ra, rb);
    const double diff = mu.points[ia[a]] - nu.points[ib[b]];
    costs.push_back(m * diff * diff);
    ra -= m;
    rb -= m;
    if (ra <= 1e-16) {
      if (++a < mu.size()) ra = mu.weights[ia[a]];
    }
    if (rb <= 1e-16) {
      if (++b < nu.size()) rb = nu.weights[ib[b]];
    }
  }
  return std::sqrt(std::max(0.0, pairwise_sum(costs)));
}

// Exact assignment for equal-size uniform-weight clouds, O(N^3).
double w2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const int n = static_cast<int>(mu.size());
  const int d = mu.dim;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Potential-based Hungarian algorithm with 1-based bookkeeping.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur =
            sq_dist(mu.point(i0 - 1), nu.point(j - 1), d) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<double> costs(n);
  for (int j = 1; j <= n; ++j) {
    costs[j - 1] = sq_dist(mu.point(match[j] - 1), nu.point(j - 1), d) / n;
  }
  return std::sqrt(std::max(0.0, pairwise_sum(costs)));
}

// General weighted transport by successive shortest augmenting paths with
// Johnson potentials on the dense bipartite graph. Each augmentation
// exhausts at least one supply or demand, so at most N + M rounds.
double w2_transport(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const int n = static_cast<int>(mu.size());
  const int m = static_cast<int>(nu.size());
  const int d = mu.dim;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> supply(mu.weights), demand(nu.weights);
  std::vector<std::vector<double>> flow(n, std::vector<double>(m, 0.0));
  std::vector<double> pot_u(n, 0.0), pot_v(m, 0.0);
  auto cost = [&](int i, int j) { return sq_dist(mu.point(i), nu.point(j), d); };

  const double kDust = 1e-15;
  // Flows live on the lattice generated by the input weights, so each
  // augmentation retires a supply, a demand, or a residual arc; the guard
  // only trips if numerics break that invariant.
  const long max_rounds = 8L * (n + m) * (n + m) + 64;
  long rounds = 0;
  for (;;) {
    if (++rounds > max_rounds) {
      throw NumericError("wasserstein2: transport failed to converge");
    }
    // Dijkstra from all sources with remaining supply.
    std::vector<double> dist_u(n, kInf), dist_v(m, kInf);
    std::vector<int> prev_v(m, -1);   // source atom feeding each sink label
    std::vector<int> prev_u(n, -1);   // sink whose residual arc reached the source
    using Item = std::pair<double, int>;  // (dist, node), node < n means source
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (int i = 0; i < n; ++i) {
      if (supply[i] > kDust) {
        dist_u[i] = 0.0;
        heap.emplace(0.0, i);
      }
    }
    int best_sink = -1;
    while (!heap.empty()) {
      const auto [dd, node] = heap.top();
      heap.pop();
      if (node < n) {
        if (dd > dist_u[node] + 1e-18) continue;
        for (int j = 0; j < m; ++j) {
          // Reduced costs are nonnegative up to rounding; clamping keeps
          // Dijkstra sound and the predecessor graph acyclic.
          const double w =
              std::max(0.0, cost(node, j) - pot_u[node] - pot_v[j]);
          if (dist_u[node] + w < dist_v[j] - 1e-18) {
            dist_v[j] = dist_u[node] + w;
            prev_v[j] = node;
            heap.emplace(dist_v[j], n + j);
          }
        }
      } else {
        const int j = node - n;
        if (dd > dist_v[j] + 1e-18) continue;
        for (int i = 0; i < n; ++i) {
          if (flow[i][j] <= kDust) continue;
          const double w =
              std::max(0.0, -(cost(i, j) - pot_u[i] - pot_v[j]));
          if (dist_v[j] + w < dist_u[i] - 1e-18) {
            dist_u[i] = dist_v[j] + w;
            prev_u[i] = j;
            heap.emplace(dist_u[i], i);
          }
        }
      }
    }
    for (int j = 0; j < m; ++j) {
      if (demand[j] > kDust && dist_v[j] < kInf &&
          (best_sink < 0 || dist_v[j] < dist_v[best_sink])) {
        best_sink = j;
      }
    }
    if (best_sink < 0) break;

    // Bottleneck along the augmenting path, then push.
    double push = demand[best_sink];
    int steps = 0;
    for (int j = best_sink;;) {
      if (++steps > n + m + 2) {
        throw NumericError("wasserstein2: augmenting path is not simple");
      }
      const int i = prev_v[j];
      if (prev_u[i] < 0) {
        push = std::min(push, supply[i]);
        break;
      }
      push = std::min(push, flow[i][prev_u[i]]);
      j = prev_u[i];
    }
    for (int j = best_sink;;) {
      const int i = prev_v[j];
      flow[i][j] += push;
      if (prev_u[i] < 0) {
        supply[i] -= push;
        break;
      }
      flow[i][prev_u[i]] -= push;
      j = prev_u[i];
    }
    demand[best_sink] -= push;
    // Johnson update clamped at the sink distance; the clamp keeps reduced
    // costs nonnegative on arcs into nodes the search never reached.
    // (the source potential enters the reduced cost with the opposite sign)
    const double reach = dist_v[best_sink];
    for (int i = 0; i < n; ++i) {
      pot_u[i] -= std::min(dist_u[i], reach);
    }
    for (int j = 0; j < m; ++j) {
      pot_v[j] += std::min(dist_v[j], reach);
    }
  }

  std::vector<double> costs;
  costs.reserve(static_cast<std::size_t>(n) * m / 4);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (flow[i][j] > 0.0) costs.push_back(flow[i][j] * cost(i, j));
    }
  }
  return std::sqrt(std::max(0.0, pairwise_sum(costs)));
}

bool uniform_weights(const EmpiricalMeasure& mu) {
  const double w0 = 1.0 / static_cast<double>(mu.size());
  for (double w : mu.weights) {
    if (std::abs(w - w0) > 1e-14) return false;
  }
  return true;
}

}  // namespace

double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                    const WassersteinCaps& caps) {
  mu.validate();
  nu.validate();
  if (mu.dim != nu.dim) {
    throw std::invalid_argument("wasserstein2: dimension mismatch");
  }
  if (mu.dim == 1) {
    if (mu.size() > caps.one_dim || nu.size() > caps.one_dim) {
      throw CapacityError("wasserstein2: 1-d size above cap");
    }
    return w2_sorted_1d(mu, nu);
  }
  if (mu.size() == nu.size() && uniform_weights(mu) && uniform_weights(nu)) {
    if (mu.size() > caps.assignment) {
      throw CapacityError("wasserstein2: assignment size above cap");
    }
    return w2_assignment(mu, nu);
  }
  if (mu.size() + nu.size() > caps.transport_nodes ||
      mu.size() * nu.size() > caps.transport_arcs) {
    throw CapacityError("wasserstein2: transport size above cap");
  }
  return w2_transport(mu, nu);
}

}  // namespace itoflow
