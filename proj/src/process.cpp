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
#include "itoflow/process.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

namespace itoflow {

void TimeGrid::validate() const {
  if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be > 0");
  if (n_steps <= 0) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
}

void CoefficientModel::validate() const {
  if (dim <= 0) throw std::invalid_argument("CoefficientModel: dim must be >= 1");
  if (noise_dim < dim) {
    throw std::invalid_argument("CoefficientModel: noise_dim must be >= dim");
  }
  if (!(bound > 0.0)) throw std::invalid_argument("CoefficientModel: bound K must be > 0");
  if (!(ellipticity > 0.0)) {
    throw std::invalid_argument("CoefficientModel: ellipticity delta must be > 0");
  }
  if (!drift || !diffusion) {
    throw std::invalid_argument("CoefficientModel: drift/diffusion not set");
  }
}

void InitialLaw::sample(std::uint64_t seed, std::uint64_t path, int dim,
                        double* out) const {
  auto center_at = [&](int c) {
    return c < static_cast<int>(center.size()) ? center[c] : 0.0;
  };
  switch (kind) {
    case Kind::kPoint:
      for (int c = 0; c < dim; ++c) out[c] = center_at(c);
      return;
    case Kind::kGaussian: {
      rng::normals(seed, rng::Channel::kInit, path, 0, dim, out);
      for (int c = 0; c < dim; ++c) {
        const double sd = c < static_cast<int>(scale.size())
                              ? scale[c]
                              : (scale.empty() ? 1.0 : scale[0]);
        out[c] = center_at(c) + sd * out[c];
      }
      return;
    }
    case Kind::kUniformBall: {
      const double radius = scale.empty() ? 1.0 : scale[0];
      // Rejection from the enclosing cube.
      for (std::uint64_t attempt = 0;; ++attempt) {
        double r2 = 0.0;
        for (int c = 0; c < dim; ++c) {
          const double u = rng::uniform(seed, rng::Channel::kInit, path,
                                        attempt, static_cast<std::uint64_t>(c));
          out[c] = 2.0 * u - 1.0;
          r2 += out[c] * out[c];
        }
        if (r2 <= 1.0) break;
      }
      for (int c = 0; c < dim; ++c) out[c] = center_at(c) + radius * out[c];
      return;
    }
  }
}

void PathBundle::increment(std::size_t path, int step, double* out) const {
  rng::normals(seed, rng::Channel::kIncrement, path,
               static_cast<std::uint64_t>(step), noise_dim, out);
  const double sqrt_dt = std::sqrt(grid.dt());
  for (int j = 0; j < noise_dim; ++j) out[j] *= sqrt_dt;
}

void PathBundle::drift_value(const CoefficientModel& model, std::size_t path,
                             int step, double* out) const {
  if (cached) {
    std::memcpy(out,
                drift_cache.data() +
                    (static_cast<std::size_t>(step) * n_paths + path) * dim,
                sizeof(double) * dim);
    return;
  }
  model.drift(grid.time(step), state(step, path), aux(path, step), out);
}

void PathBundle::diffusion_value(const CoefficientModel& model,
                                 std::size_t path, int step,
                                 double* out) const {
  if (cached) {
    const std::size_t stride = static_cast<std::size_t>(dim) * noise_dim;
    std::memcpy(out,
                diffusion_cache.data() +
                    (static_cast<std::size_t>(step) * n_paths + path) * stride,
                sizeof(double) * stride);
    return;
  }
  model.diffusion(grid.time(step), state(step, path), aux(path, step), out);
}

PathBundle simulate_paths(const CoefficientModel& model, const TimeGrid& grid,
                          std::size_t n_paths, const InitialLaw& init,
                          std::uint64_t seed, int n_threads) {
  grid.validate();
  model.validate();
  if (n_paths < 1) throw std::invalid_argument("simulate_paths: n_paths must be >= 1");

  const int d = model.dim;
  const int d1 = model.noise_dim;
  PathBundle bundle;
  bundle.grid = grid;
  bundle.dim = d;
  bundle.noise_dim = d1;
  bundle.n_paths = n_paths;
  bundle.seed = seed;
  bundle.rng_scheme = rng::kSchemeId;
  bundle.states.resize(static_cast<std::size_t>(grid.n_steps + 1) * n_paths * d);

  const std::size_t drift_footprint =
      static_cast<std::size_t>(grid.n_steps) * n_paths * d;
  bundle.cached = drift_footprint * (1 + d1) <= PathBundle::kCacheCap;
  if (bundle.cached) {
    bundle.drift_cache.resize(drift_footprint);
    bundle.diffusion_cache.resize(drift_footprint * d1);
  }

  // Failure location, if any (lowest path index wins for determinism).
  std::atomic<std::size_t> bad_path{n_paths};
  std::atomic<int> bad_step{-1};

  parallel_for_blocks(
      n_paths, 4096,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> b(d), sigma(static_cast<std::size_t>(d) * d1),
            dw(d1);
        for (std::size_t p = begin; p < end; ++p) {
          double* x0 = bundle.states.data() + p * d;
          init.sample(seed, p, d, x0);
          for (int i = 0; i < grid.n_steps; ++i) {
            const double t = bundle.grid.time(i);
            const double* xi = bundle.state(i, p);
            const double aux = bundle.aux(p, i);
            model.drift(t, xi, aux, b.data());
            model.diffusion(t, xi, aux, sigma.data());
            bundle.increment(p, i, dw.data());
            double* xn =
                bundle.states.data() +
                (static_cast<std::size_t>(i + 1) * n_paths + p) * d;
            bool finite = true;
            for (int c = 0; c < d; ++c) {
              double v = xi[c] + b[c] * grid.dt() + dot(sigma.data() + c * d1, dw.data(), d1);
              if (!std::isfinite(v)) finite = false;
              xn[c] = v;
            }
            if (!finite) {
              std::size_t expect = n_paths;
              if (bad_path.compare_exchange_strong(expect, p) || p < expect) {
                bad_path.store(p);
                bad_step.store(i);
              }
              return;
            }
            if (bundle.cached) {
              std::memcpy(bundle.drift_cache.data() +
                              (static_cast<std::size_t>(i) * n_paths + p) * d,
                          b.data(), sizeof(double) * d);
              std::memcpy(bundle.diffusion_cache.data() +
                              (static_cast<std::size_t>(i) * n_paths + p) * d * d1,
                          sigma.data(), sizeof(double) * d * d1);
            }
          }
        }
      },
      n_threads);

  if (bad_path.load() < n_paths) {
    throw NumericError("simulate_paths: non-finite state at path " +
                       std::to_string(bad_path.load()) + ", step " +
                       std::to_string(bad_step.load()));
  }
  return bundle;
}

EmpiricalMeasure marginal(const PathBundle& paths, int t_index) {
  if (t_index < 0 || t_index > paths.grid.n_steps) {
    throw std::invalid_argument("marginal: t_index out of range");
  }
  EmpiricalMeasure mu;
  mu.dim = paths.dim;
  const double* slice = paths.state(t_index, 0);
  mu.points.assign(slice, slice + paths.n_paths * paths.dim);
  mu.weights.assign(paths.n_paths, 1.0 / static_cast<double>(paths.n_paths));
  return mu;
}

std::vector<CoefficientProbe> make_probe_set(const CoefficientModel& model,
                                             double horizon, std::size_t count,
                                             std::uint64_t seed) {
  std::vector<CoefficientProbe> probes;
  const int d = model.dim;
  // Canonical basis directions at a few deterministic (t, x).
  for (int c = 0; c < d; ++c) {
    CoefficientProbe pr;
    pr.t = 0.0;
    pr.x.assign(d, 0.0);
    pr.lambda.assign(d, 0.0);
    pr.lambda[c] = 1.0;
    probes.push_back(std::move(pr));
  }
  for (std::size_t k = 0; k < count; ++k) {
    CoefficientProbe pr;
    pr.t = horizon * rng::uniform(seed, rng::Channel::kProbe, k, 0, 0);
    pr.x.resize(d);
    pr.lambda.resize(d);
    rng::normals(seed, rng::Channel::kProbe, k, 1, d, pr.x.data());
    rng::normals(seed, rng::Channel::kProbe, k, 2, d, pr.lambda.data());
    const double nl = std::sqrt(norm2(pr.lambda.data(), d));
    for (int c = 0; c < d; ++c) {
      pr.x[c] *= 2.0;
      pr.lambda[c] = nl > 0 ? pr.lambda[c] / nl : (c == 0 ? 1.0 : 0.0);
    }
    probes.push_back(std::move(pr));
  }
  return probes;
}

ValidationReport validate_coefficients(
    const CoefficientModel& model,
    const std::vector<CoefficientProbe>& probe) {
  if (probe.empty()) {
    throw std::invalid_argument("validate_coefficients: empty probe set");
  }
  model.validate();
  const int d = model.dim;
  const int d1 = model.noise_dim;
  ValidationReport report;
  report.n_probes = probe.size();
  double max_bound = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  std::vector<double> b(d), sigma(static_cast<std::size_t>(d) * d1),
      a(static_cast<std::size_t>(d) * d), al(d);
  for (const auto& pr : probe) {
    model.drift(pr.t, pr.x.data(), 0.5, b.data());
    model.diffusion(pr.t, pr.x.data(), 0.5, sigma.data());
    const double bn = std::sqrt(norm2(b.data(), d));
    const double sn = std::sqrt(norm2(sigma.data(), d * d1));
    max_bound = std::max(max_bound, bn + sn);
    gram(sigma.data(), d, d1, a.data());
    mat_vec(a.data(), pr.lambda.data(), d, d, al.data());
    const double l2 = norm2(pr.lambda.data(), d);
    if (l2 > 0) {
      min_ratio = std::min(min_ratio, dot(al.data(), pr.lambda.data(), d) / l2);
    }
  }
  report.max_bound = max_bound;
  report.min_ellipticity_ratio = min_ratio;
  report.bound_ok = max_bound <= model.bound;
  report.ellipticity_ok = min_ratio >= model.ellipticity - 1e-12;
  return report;
}

}  // namespace itoflow
