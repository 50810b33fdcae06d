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
#include "itoflow/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "itoflow/quadrature.hpp"
#include "itoflow/rng.hpp"

namespace itoflow {

EmpiricalMeasure EmpiricalMeasure::uniform(int dim, std::vector<double> pts) {
  if (dim <= 0 || pts.empty() || pts.size() % dim != 0) {
    throw std::invalid_argument("EmpiricalMeasure::uniform: bad point array");
  }
  EmpiricalMeasure mu;
  mu.dim = dim;
  mu.points = std::move(pts);
  const std::size_t n = mu.points.size() / dim;
  mu.weights.assign(n, 1.0 / static_cast<double>(n));
  return mu;
}

EmpiricalMeasure EmpiricalMeasure::point_mass(std::vector<double> x) {
  EmpiricalMeasure mu;
  mu.dim = static_cast<int>(x.size());
  mu.points = std::move(x);
  mu.weights = {1.0};
  return mu;
}

void EmpiricalMeasure::validate() const {
  if (dim <= 0) throw std::invalid_argument("EmpiricalMeasure: dim must be >= 1");
  if (weights.empty() || points.size() != weights.size() * dim) {
    throw std::invalid_argument("EmpiricalMeasure: points/weights size mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("EmpiricalMeasure: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("EmpiricalMeasure: weights must sum to one");
  }
  for (double x : points) {
    if (!std::isfinite(x)) throw NumericError("EmpiricalMeasure: non-finite point");
  }
}

double EmpiricalMeasure::second_moment() const {
  std::vector<double> terms(size());
  for (std::size_t j = 0; j < size(); ++j) {
    terms[j] = weights[j] * norm2(point(j), dim);
  }
  return pairwise_sum(terms);
}

void EmpiricalMeasure::mean(double* out) const {
  for (int c = 0; c < dim; ++c) out[c] = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    for (int c = 0; c < dim; ++c) out[c] += weights[j] * point(j)[c];
  }
}

namespace {

// exp(-1 / (1 - r2)) for r2 < 1, zero outside; the unnormalized profile.
double bump_profile(double r2) {
  return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
}

}  // namespace

Mollifier mollifier_make(int n, int dim) {
  if (n < 1) throw std::invalid_argument("mollifier_make: n must be >= 1");
  if (dim < 1) throw std::invalid_argument("mollifier_make: dim must be >= 1");
  Mollifier rho;
  rho.index_n = n;
  rho.dim = dim;
  double mass;
  if (dim == 1) {
    mass = quad::integrate_1d([](double x) { return bump_profile(x * x); },
                              -1.0, 1.0, 1e-12);
  } else {
    // Radial reduction: integral = omega_{d-1} int_0^1 r^{d-1} profile(r^2) dr.
    const double omega =
        2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
    mass = omega * quad::integrate_1d(
                       [dim](double r) {
                         return std::pow(r, dim - 1) * bump_profile(r * r);
                       },
                       0.0, 1.0, 1e-12);
  }
  rho.norm_const = 1.0 / mass;
  return rho;
}

double Mollifier::density(const double* x) const {
  double r2 = 0.0;
  for (int c = 0; c < dim; ++c) {
    const double y = index_n * x[c];
    r2 += y * y;
  }
  return std::pow(static_cast<double>(index_n), dim) * norm_const *
         bump_profile(r2);
}

void Mollifier::quadrature_nodes(int nodes_per_dim, std::vector<double>* nodes,
                                 std::vector<double>* weights) const {
  std::vector<double> gn, gw;
  quad::gauss_legendre(nodes_per_dim, &gn, &gw);
  nodes->clear();
  weights->clear();
  std::vector<int> idx(dim, 0);
  std::vector<double> x(dim);
  const std::size_t total =
      static_cast<std::size_t>(std::pow(nodes_per_dim, dim));
  for (std::size_t k = 0; k < total; ++k) {
    double w = 1.0, r2 = 0.0;
    for (int c = 0; c < dim; ++c) {
      x[c] = gn[idx[c]];
      w *= gw[idx[c]];
      r2 += x[c] * x[c];
    }
    const double profile = bump_profile(r2);
    if (profile > 0.0) {
      for (int c = 0; c < dim; ++c) nodes->push_back(x[c] * radius());
      weights->push_back(w * profile);
    }
    for (int c = 0; c < dim; ++c) {
      if (++idx[c] < nodes_per_dim) break;
      idx[c] = 0;
    }
  }
  if (weights->empty()) {
    throw NumericError("Mollifier::quadrature_nodes: no nodes in support");
  }
  const double total_w = pairwise_sum(*weights);
  for (double& w : *weights) w /= total_w;
}

void Mollifier::sample(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t step, double* out) const {
  // Rejection: uniform in the support ball via its bounding cube, then
  // thin by the profile (maximum e^{-1} at the origin).
  const std::uint64_t per_attempt = static_cast<std::uint64_t>(dim) + 1;
  for (std::uint64_t attempt = 0;; ++attempt) {
    double r2 = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double u = rng::uniform(seed, rng::Channel::kSample, stream, step,
                                    attempt * per_attempt + c);
      out[c] = 2.0 * u - 1.0;
      r2 += out[c] * out[c];
    }
    if (r2 >= 1.0) continue;
    const double u = rng::uniform(seed, rng::Channel::kSample, stream, step,
                                  attempt * per_attempt + dim);
    if (u * std::exp(-1.0) <= bump_profile(r2)) break;
  }
  for (int c = 0; c < dim; ++c) out[c] *= radius();
}

MollifiedMeasure mollify(const EmpiricalMeasure& mu, const Mollifier& rho) {
  mu.validate();
  if (mu.dim != rho.dim) {
    throw std::invalid_argument("mollify: dimension mismatch");
  }
  return MollifiedMeasure{mu, rho};
}

double MollifiedMeasure::density(const double* x) const {
  const int d = base.dim;
  std::vector<double> shifted(d), terms(base.size());
  for (std::size_t j = 0; j < base.size(); ++j) {
    for (int c = 0; c < d; ++c) shifted[c] = x[c] - base.point(j)[c];
    terms[j] = base.weights[j] * mollifier.density(shifted.data());
  }
  return pairwise_sum(terms);
}

EmpiricalMeasure MollifiedMeasure::node_expansion(int nodes_per_dim) const {
  std::vector<double> offs, offw;
  mollifier.quadrature_nodes(nodes_per_dim, &offs, &offw);
  const int d = base.dim;
  const std::size_t k = offw.size();
  if (base.size() * k > 5'000'000) {
    throw CapacityError("node_expansion: atom count above cap");
  }
  EmpiricalMeasure out;
  out.dim = d;
  out.points.reserve(base.size() * k * d);
  out.weights.reserve(base.size() * k);
  for (std::size_t j = 0; j < base.size(); ++j) {
    for (std::size_t m = 0; m < k; ++m) {
      for (int c = 0; c < d; ++c) {
        out.points.push_back(base.point(j)[c] + offs[m * d + c]);
      }
      out.weights.push_back(base.weights[j] * offw[m]);
    }
  }
  return out;
}

EmpiricalMeasure MollifiedMeasure::sample(std::size_t n_draws,
                                          std::uint64_t seed) const {
  if (n_draws == 0) {
    throw std::invalid_argument("MollifiedMeasure::sample: n_draws must be >= 1");
  }
  const int d = base.dim;
  EmpiricalMeasure out;
  out.dim = d;
  out.points.resize(n_draws * d);
  out.weights.assign(n_draws, 1.0 / static_cast<double>(n_draws));
  std::vector<double> perturb(d);
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double u = rng::uniform(seed, rng::Channel::kSample, i, 0, 0);
    double acc = 0.0;
    std::size_t pick = base.size() - 1;
    for (std::size_t j = 0; j < base.size(); ++j) {
      acc += base.weights[j];
      if (u <= acc) {
        pick = j;
        break;
      }
    }
    mollifier.sample(seed, i, 1, perturb.data());
    for (int c = 0; c < d; ++c) {
      out.points[i * d + c] = base.point(pick)[c] + perturb[c];
    }
  }
  return out;
}

EmpiricalMeasure convolve_empirical(const EmpiricalMeasure& mu,
                                    const EmpiricalMeasure& m,
                                    std::size_t atom_cap) {
  mu.validate();
  m.validate();
  if (mu.dim != m.dim) {
    throw std::invalid_argument("convolve_empirical: dimension mismatch");
  }
  if (mu.size() * m.size() > atom_cap) {
    throw CapacityError("convolve_empirical: atom count above cap");
  }
  const int d = mu.dim;
  EmpiricalMeasure out;
  out.dim = d;
  out.points.reserve(mu.size() * m.size() * d);
  out.weights.reserve(mu.size() * m.size());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      for (int c = 0; c < d; ++c) {
        out.points.push_back(mu.point(j)[c] + m.point(k)[c]);
      }
      out.weights.push_back(mu.weights[j] * m.weights[k]);
    }
  }
  return out;
}

namespace {

// Integrates g over the support of the given atom clouds: in d = 1 the atom
// balls are merged into disjoint intervals, each integrated adaptively; in
// d >= 2 the bounding box of all atoms (padded by the radius) is used.
double integrate_over_support(
    const std::function<double(const double*)>& g, int dim,
    const std::vector<const EmpiricalMeasure*>& clouds, double radius,
    double rel_tol) {
  if (dim == 1) {
    std::vector<std::pair<double, double>> intervals;
    for (const auto* mu : clouds) {
      for (std::size_t j = 0; j < mu->size(); ++j) {
        const double x = mu->point(j)[0];
        intervals.emplace_back(x - radius, x + radius);
      }
    }
    std::sort(intervals.begin(), intervals.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& iv : intervals) {
      if (!merged.empty() && iv.first <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, iv.second);
      } else {
        merged.push_back(iv);
      }
    }
    std::vector<double> parts(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
      parts[i] = quad::integrate_1d([&g](double x) { return g(&x); },
                                    merged[i].first, merged[i].second,
                                    rel_tol, 8, 16);
    }
    return pairwise_sum(parts);
  }
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (const auto* mu : clouds) {
    for (std::size_t j = 0; j < mu->size(); ++j) {
      for (int c = 0; c < dim; ++c) {
        lo[c] = std::min(lo[c], mu->point(j)[c] - radius);
        hi[c] = std::max(hi[c], mu->point(j)[c] + radius);
      }
    }
  }
  return quad::integrate_box(g, dim, lo, hi, rel_tol, 8, 8);
}

}  // namespace

double density_norm(const MollifiedMeasure& m, double q) {
  if (!(q >= 1.0)) throw std::invalid_argument("density_norm: q must be >= 1");
  const double integral = integrate_over_support(
      [&m, q](const double* x) { return std::pow(m.density(x), q); },
      m.base.dim, {&m.base}, m.mollifier.radius(), 1e-6);
  return std::pow(integral, 1.0 / q);
}

double dk_distance(const MollifiedMeasure& mu, const MollifiedMeasure& nu,
                   double k) {
  const int d = mu.base.dim;
  if (nu.base.dim != d) {
    throw std::invalid_argument("dk_distance: dimension mismatch");
  }
  if (!(k >= d + 1)) {
    throw std::invalid_argument("dk_distance: requires k >= d + 1");
  }
  const double kp = k / (k - 1.0);
  const double radius =
      std::max(mu.mollifier.radius(), nu.mollifier.radius());
  const double integral = integrate_over_support(
      [&mu, &nu, kp](const double* x) {
        return std::pow(std::abs(mu.density(x) - nu.density(x)), kp);
      },
      d, {&mu.base, &nu.base}, radius, 1e-6);
  return std::pow(integral, 1.0 / kp);
}

}  // namespace itoflow
