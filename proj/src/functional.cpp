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
#include "itoflow/functional.hpp"

#include <cmath>
#include <cstring>

#include "itoflow/quadrature.hpp"

namespace itoflow {

namespace {

double checked(double x, const char* where) {
  if (!std::isfinite(x)) {
    throw NumericError(std::string(where) + ": non-finite evaluation");
  }
  return x;
}

class LinearDeriv final : public LinDerivative {
 public:
  explicit LinearDeriv(ScalarField g) : g_(std::move(g)) {}
  double value(const double* v) const override {
    return checked(g_.value(v), "linear lin_deriv");
  }
  void grad(const double* v, double* out) const override { g_.grad(v, out); }
  void hess(const double* v, double* out) const override { g_.hess(v, out); }

 private:
  ScalarField g_;
};

class QuadraticDeriv final : public LinDerivative {
 public:
  QuadraticDeriv(std::shared_ptr<const ScalarField2> g, EmpiricalMeasure mu)
      : g_(std::move(g)), mu_(std::move(mu)) {}

  double value(const double* v) const override {
    std::vector<double> terms(mu_.size());
    for (std::size_t j = 0; j < mu_.size(); ++j) {
      const double* y = mu_.point(j);
      terms[j] = mu_.weights[j] * (g_->value(v, y) + g_->value(y, v));
    }
    return checked(pairwise_sum(terms), "quadratic lin_deriv");
  }
  void grad(const double* v, double* out) const override {
    const int d = mu_.dim;
    std::vector<double> buf(d);
    for (int c = 0; c < d; ++c) out[c] = 0.0;
    for (std::size_t j = 0; j < mu_.size(); ++j) {
      const double* y = mu_.point(j);
      g_->grad_x(v, y, buf.data());
      for (int c = 0; c < d; ++c) out[c] += mu_.weights[j] * buf[c];
      g_->grad_y(y, v, buf.data());
      for (int c = 0; c < d; ++c) out[c] += mu_.weights[j] * buf[c];
    }
  }
  void hess(const double* v, double* out) const override {
    const int d = mu_.dim;
    std::vector<double> buf(static_cast<std::size_t>(d) * d);
    for (int c = 0; c < d * d; ++c) out[c] = 0.0;
    for (std::size_t j = 0; j < mu_.size(); ++j) {
      const double* y = mu_.point(j);
      g_->hess_x(v, y, buf.data());
      for (int c = 0; c < d * d; ++c) out[c] += mu_.weights[j] * buf[c];
      g_->hess_y(y, v, buf.data());
      for (int c = 0; c < d * d; ++c) out[c] += mu_.weights[j] * buf[c];
    }
  }

 private:
  std::shared_ptr<const ScalarField2> g_;
  EmpiricalMeasure mu_;
};

class SmoothedDeriv final : public LinDerivative {
 public:
  SmoothedDeriv(std::shared_ptr<const LinDerivative> inner, int dim,
                std::shared_ptr<const std::vector<double>> offsets,
                std::shared_ptr<const std::vector<double>> node_weights)
      : inner_(std::move(inner)),
        dim_(dim),
        offsets_(std::move(offsets)),
        node_weights_(std::move(node_weights)) {}

  double value(const double* v) const override {
    const auto& w = *node_weights_;
    std::vector<double> shifted(dim_), terms(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      shift(v, k, shifted.data());
      terms[k] = w[k] * inner_->value(shifted.data());
    }
    return pairwise_sum(terms);
  }
  void grad(const double* v, double* out) const override {
    const auto& w = *node_weights_;
    std::vector<double> shifted(dim_), buf(dim_);
    for (int c = 0; c < dim_; ++c) out[c] = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      shift(v, k, shifted.data());
      inner_->grad(shifted.data(), buf.data());
      for (int c = 0; c < dim_; ++c) out[c] += w[k] * buf[c];
    }
  }
  void hess(const double* v, double* out) const override {
    const auto& w = *node_weights_;
    std::vector<double> shifted(dim_),
        buf(static_cast<std::size_t>(dim_) * dim_);
    for (int c = 0; c < dim_ * dim_; ++c) out[c] = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      shift(v, k, shifted.data());
      inner_->hess(shifted.data(), buf.data());
      for (int c = 0; c < dim_ * dim_; ++c) out[c] += w[k] * buf[c];
    }
  }

 private:
  void shift(const double* v, std::size_t k, double* out) const {
    const double* z = offsets_->data() + k * dim_;
    for (int c = 0; c < dim_; ++c) out[c] = v[c] + z[c];
  }
  std::shared_ptr<const LinDerivative> inner_;
  int dim_;
  std::shared_ptr<const std::vector<double>> offsets_;
  std::shared_ptr<const std::vector<double>> node_weights_;
};

EmpiricalMeasure mix_measures(const EmpiricalMeasure& mu,
                              const EmpiricalMeasure& nu, double t) {
  // t mu + (1 - t) nu as one atom cloud.
  EmpiricalMeasure out;
  out.dim = mu.dim;
  out.points = mu.points;
  out.points.insert(out.points.end(), nu.points.begin(), nu.points.end());
  out.weights.reserve(mu.size() + nu.size());
  for (double w : mu.weights) out.weights.push_back(t * w);
  for (double w : nu.weights) out.weights.push_back((1.0 - t) * w);
  return out;
}

}  // namespace

MeasureFunctional make_linear(ScalarField g) {
  if (!g.value || !g.grad || !g.hess) {
    throw std::invalid_argument("make_linear: incomplete field");
  }
  MeasureFunctional f;
  f.dim = g.dim;
  f.name = "linear";
  f.meta.measure_degree = 1;
  auto shared = std::make_shared<const ScalarField>(std::move(g));
  f.value = [shared](const EmpiricalMeasure& mu) {
    std::vector<double> terms(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) {
      terms[j] = mu.weights[j] * shared->value(mu.point(j));
    }
    return checked(pairwise_sum(terms), "linear value");
  };
  f.prepare = [shared](const EmpiricalMeasure&) {
    return std::make_shared<const LinearDeriv>(*shared);
  };
  LinearStatForm stat;
  stat.stat_dim = 1;
  const int d = f.dim;
  stat.s = [shared](const double* x, double* out) {
    out[0] = shared->value(x);
  };
  stat.s_drift = [shared, d](const double* x, const double* b, double* out) {
    std::vector<double> gr(d);
    shared->grad(x, gr.data());
    out[0] = dot(gr.data(), b, d);
  };
  stat.s_diffusion = [shared, d](const double* x, const double* a,
                                 double* out) {
    std::vector<double> h(static_cast<std::size_t>(d) * d);
    shared->hess(x, h.data());
    out[0] = 0.5 * mat_dot(h.data(), a, d);
  };
  stat.phi = [](const double* theta) { return theta[0]; };
  stat.dphi = [](const double*, double* out) { out[0] = 1.0; };
  f.linear_stat = std::move(stat);
  return f;
}

MeasureFunctional make_quadratic(ScalarField2 g) {
  if (!g.value || !g.grad_x || !g.grad_y || !g.hess_x || !g.hess_y) {
    throw std::invalid_argument("make_quadratic: incomplete kernel");
  }
  MeasureFunctional f;
  f.dim = g.dim;
  f.name = "quadratic";
  f.meta.measure_degree = 2;
  auto shared = std::make_shared<const ScalarField2>(std::move(g));
  f.value = [shared](const EmpiricalMeasure& mu) {
    std::vector<double> rows(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
      std::vector<double> terms(mu.size());
      for (std::size_t j = 0; j < mu.size(); ++j) {
        terms[j] = mu.weights[j] * shared->value(mu.point(i), mu.point(j));
      }
      rows[i] = mu.weights[i] * pairwise_sum(terms);
    }
    return checked(pairwise_sum(rows), "quadratic value");
  };
  f.prepare = [shared](const EmpiricalMeasure& mu) {
    return std::make_shared<const QuadraticDeriv>(shared, mu);
  };
  PairStatForm pair;
  const int d = f.dim;
  pair.g = [shared](const double* x, const double* y) {
    return shared->value(x, y);
  };
  pair.g_drift = [shared, d](const double* x, const double* bx,
                             const double* y) {
    std::vector<double> gr(d), gr2(d);
    shared->grad_x(x, y, gr.data());
    shared->grad_y(y, x, gr2.data());
    for (int c = 0; c < d; ++c) gr[c] += gr2[c];
    return dot(gr.data(), bx, d);
  };
  pair.g_diffusion = [shared, d](const double* x, const double* ax,
                                 const double* y) {
    std::vector<double> h(static_cast<std::size_t>(d) * d), h2(h.size());
    shared->hess_x(x, y, h.data());
    shared->hess_y(y, x, h2.data());
    for (std::size_t c = 0; c < h.size(); ++c) h[c] += h2[c];
    return 0.5 * mat_dot(h.data(), ax, d);
  };
  f.pair_stat = std::move(pair);
  return f;
}

MeasureFunctional make_convolution(ScalarField f_even) {
  if (!f_even.value || !f_even.grad || !f_even.hess) {
    throw std::invalid_argument("make_convolution: incomplete field");
  }
  const int d = f_even.dim;
  auto shared = std::make_shared<const ScalarField>(std::move(f_even));
  ScalarField2 g;
  g.dim = d;
  g.value = [shared, d](const double* x, const double* y) {
    std::vector<double> diff(d);
    for (int c = 0; c < d; ++c) diff[c] = x[c] - y[c];
    return shared->value(diff.data());
  };
  g.grad_x = [shared, d](const double* x, const double* y, double* out) {
    std::vector<double> diff(d);
    for (int c = 0; c < d; ++c) diff[c] = x[c] - y[c];
    shared->grad(diff.data(), out);
  };
  g.grad_y = [shared, d](const double* x, const double* y, double* out) {
    std::vector<double> diff(d);
    for (int c = 0; c < d; ++c) diff[c] = x[c] - y[c];
    shared->grad(diff.data(), out);
    for (int c = 0; c < d; ++c) out[c] = -out[c];
  };
  g.hess_x = [shared, d](const double* x, const double* y, double* out) {
    std::vector<double> diff(d);
    for (int c = 0; c < d; ++c) diff[c] = x[c] - y[c];
    shared->hess(diff.data(), out);
  };
  g.hess_y = g.hess_x;
  MeasureFunctional f = make_quadratic(std::move(g));
  f.name = "convolution";
  return f;
}

ExtendedFunctional make_composite(CompositeOuter f_outer, ScalarField g) {
  if (!f_outer.value || !f_outer.grad_x || !f_outer.hess_x || !f_outer.dy ||
      !g.value || !g.grad || !g.hess) {
    throw std::invalid_argument("make_composite: incomplete data");
  }
  ExtendedFunctional u;
  u.dim = g.dim;
  u.name = "composite";
  const int d = u.dim;
  auto fo = std::make_shared<const CompositeOuter>(std::move(f_outer));
  auto gg = std::make_shared<const ScalarField>(std::move(g));
  auto theta_of = [gg](const EmpiricalMeasure& mu) {
    std::vector<double> terms(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) {
      terms[j] = mu.weights[j] * gg->value(mu.point(j));
    }
    return pairwise_sum(terms);
  };
  u.value = [fo, theta_of](double, const double* x,
                           const EmpiricalMeasure& mu) {
    return checked(fo->value(x, theta_of(mu)), "composite value");
  };
  u.time_deriv = [](double, const double*, const EmpiricalMeasure&) {
    return 0.0;
  };
  u.space_grad = [fo, theta_of](double, const double* x,
                                const EmpiricalMeasure& mu, double* out) {
    fo->grad_x(x, theta_of(mu), out);
  };
  u.space_hess = [fo, theta_of](double, const double* x,
                                const EmpiricalMeasure& mu, double* out) {
    fo->hess_x(x, theta_of(mu), out);
  };

  class Deriv final : public ExtLinDerivative {
   public:
    Deriv(std::shared_ptr<const ScalarField> g, double fy)
        : g_(std::move(g)), fy_(fy) {}
    double value(const double* v) const override {
      return g_->value(v) * fy_;
    }
    void grad(const double* v, double* out) const override {
      g_->grad(v, out);
      for (int c = 0; c < g_->dim; ++c) out[c] *= fy_;
    }
    void hess(const double* v, double* out) const override {
      g_->hess(v, out);
      for (int c = 0; c < g_->dim * g_->dim; ++c) out[c] *= fy_;
    }

   private:
    std::shared_ptr<const ScalarField> g_;
    double fy_;
  };
  u.prepare = [fo, gg, theta_of](double, const double* x,
                                 const EmpiricalMeasure& mu) {
    const double fy = fo->dy(x, theta_of(mu));
    return std::static_pointer_cast<const ExtLinDerivative>(
        std::make_shared<const Deriv>(gg, fy));
  };

  ExtStatsForm stats;
  stats.stat_dim = 1;
  stats.s = [gg](const double* y, double* out) { out[0] = gg->value(y); };
  stats.s_drift = [gg, d](const double* y, const double* by, double* out) {
    std::vector<double> gr(d);
    gg->grad(y, gr.data());
    out[0] = dot(gr.data(), by, d);
  };
  stats.s_diffusion = [gg, d](const double* y, const double* ay, double* out) {
    std::vector<double> h(static_cast<std::size_t>(d) * d);
    gg->hess(y, h.data());
    out[0] = 0.5 * mat_dot(h.data(), ay, d);
  };
  stats.value = [fo](double, const double* x, const double* theta) {
    return fo->value(x, theta[0]);
  };
  stats.dt = [](double, const double*, const double*) { return 0.0; };
  stats.grad_x = [fo](double, const double* x, const double* theta,
                      double* out) { fo->grad_x(x, theta[0], out); };
  stats.hess_x = [fo](double, const double* x, const double* theta,
                      double* out) { fo->hess_x(x, theta[0], out); };
  stats.tilde_drift = [fo](double, const double* x, const double* theta,
                           const double* theta_drift) {
    return fo->dy(x, theta[0]) * theta_drift[0];
  };
  stats.tilde_diffusion = [fo](double, const double* x, const double* theta,
                               const double* theta_diffusion) {
    return fo->dy(x, theta[0]) * theta_diffusion[0];
  };
  u.stats = std::move(stats);
  u.meta.sobolev_k = d + 1;
  u.sobolev_k2 = 2.0 * d;
  u.meta.distance = "W2";
  return u;
}

ExtendedFunctional make_bilinear(ScalarField2 g) {
  if (!g.value || !g.grad_x || !g.grad_y || !g.hess_x || !g.hess_y) {
    throw std::invalid_argument("make_bilinear: incomplete kernel");
  }
  ExtendedFunctional u;
  u.dim = g.dim;
  u.name = "bilinear";
  const int d = u.dim;
  auto gg = std::make_shared<const ScalarField2>(std::move(g));
  u.value = [gg](double, const double* x, const EmpiricalMeasure& mu) {
    std::vector<double> terms(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) {
      terms[j] = mu.weights[j] * gg->value(x, mu.point(j));
    }
    return checked(pairwise_sum(terms), "bilinear value");
  };
  u.time_deriv = [](double, const double*, const EmpiricalMeasure&) {
    return 0.0;
  };
  u.space_grad = [gg, d](double, const double* x, const EmpiricalMeasure& mu,
                         double* out) {
    std::vector<double> buf(d);
    for (int c = 0; c < d; ++c) out[c] = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      gg->grad_x(x, mu.point(j), buf.data());
      for (int c = 0; c < d; ++c) out[c] += mu.weights[j] * buf[c];
    }
  };
  u.space_hess = [gg, d](double, const double* x, const EmpiricalMeasure& mu,
                         double* out) {
    std::vector<double> buf(static_cast<std::size_t>(d) * d);
    for (int c = 0; c < d * d; ++c) out[c] = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      gg->hess_x(x, mu.point(j), buf.data());
      for (int c = 0; c < d * d; ++c) out[c] += mu.weights[j] * buf[c];
    }
  };

  class Deriv final : public ExtLinDerivative {
   public:
    Deriv(std::shared_ptr<const ScalarField2> g, std::vector<double> x)
        : g_(std::move(g)), x_(std::move(x)) {}
    double value(const double* v) const override {
      return g_->value(x_.data(), v);
    }
    void grad(const double* v, double* out) const override {
      g_->grad_y(x_.data(), v, out);
    }
    void hess(const double* v, double* out) const override {
      g_->hess_y(x_.data(), v, out);
    }

   private:
    std::shared_ptr<const ScalarField2> g_;
    std::vector<double> x_;
  };
  u.prepare = [gg, d](double, const double* x, const EmpiricalMeasure&) {
    return std::static_pointer_cast<const ExtLinDerivative>(
        std::make_shared<const Deriv>(gg, std::vector<double>(x, x + d)));
  };
  u.meta.sobolev_k = 5.0 * d;
  u.meta.distance = "dk";
  return u;
}

MeasureFunctional mollified(const MeasureFunctional& f, const Mollifier& rho,
                            int mc_nodes) {
  if (mc_nodes < 1) {
    throw std::invalid_argument("mollified: mc_nodes must be >= 1");
  }
  if (rho.dim != f.dim) {
    throw std::invalid_argument("mollified: dimension mismatch");
  }
  auto offsets = std::make_shared<std::vector<double>>();
  auto node_w = std::make_shared<std::vector<double>>();
  rho.quadrature_nodes(mc_nodes, offsets.get(), node_w.get());
  auto inner = std::make_shared<const MeasureFunctional>(f);
  const Mollifier rho_copy = rho;
  const int d = f.dim;

  auto expand = [inner, rho_copy, mc_nodes](const EmpiricalMeasure& mu) {
    return MollifiedMeasure{mu, rho_copy}.node_expansion(mc_nodes);
  };

  MeasureFunctional out;
  out.dim = d;
  out.name = "mollified:" + f.name + ":n=" + std::to_string(rho.index_n);
  out.meta = f.meta;
  out.value = [inner, expand](const EmpiricalMeasure& mu) {
    return inner->value(expand(mu));
  };
  out.prepare = [inner, expand, offsets, node_w,
                 d](const EmpiricalMeasure& mu) {
    auto base = inner->prepare(expand(mu));
    return std::static_pointer_cast<const LinDerivative>(
        std::make_shared<const SmoothedDeriv>(base, d, offsets, node_w));
  };
  if (f.linear_stat) {
    const LinearStatForm& ls = *f.linear_stat;
    LinearStatForm stat;
    stat.stat_dim = ls.stat_dim;
    const int m = ls.stat_dim;
    stat.s = [ls, offsets, node_w, d, m](const double* x, double* out) {
      std::vector<double> shifted(d), buf(m);
      for (int a = 0; a < m; ++a) out[a] = 0.0;
      for (std::size_t k = 0; k < node_w->size(); ++k) {
        for (int c = 0; c < d; ++c) shifted[c] = x[c] + (*offsets)[k * d + c];
        ls.s(shifted.data(), buf.data());
        for (int a = 0; a < m; ++a) out[a] += (*node_w)[k] * buf[a];
      }
    };
    stat.s_drift = [ls, offsets, node_w, d, m](const double* x,
                                               const double* b, double* out) {
      std::vector<double> shifted(d), buf(m);
      for (int a = 0; a < m; ++a) out[a] = 0.0;
      for (std::size_t k = 0; k < node_w->size(); ++k) {
        for (int c = 0; c < d; ++c) shifted[c] = x[c] + (*offsets)[k * d + c];
        ls.s_drift(shifted.data(), b, buf.data());
        for (int a = 0; a < m; ++a) out[a] += (*node_w)[k] * buf[a];
      }
    };
    stat.s_diffusion = [ls, offsets, node_w, d, m](const double* x,
                                                   const double* a,
                                                   double* out) {
      std::vector<double> shifted(d), buf(m);
      for (int q = 0; q < m; ++q) out[q] = 0.0;
      for (std::size_t k = 0; k < node_w->size(); ++k) {
        for (int c = 0; c < d; ++c) shifted[c] = x[c] + (*offsets)[k * d + c];
        ls.s_diffusion(shifted.data(), a, buf.data());
        for (int q = 0; q < m; ++q) out[q] += (*node_w)[k] * buf[q];
      }
    };
    stat.phi = ls.phi;
    stat.dphi = ls.dphi;
    out.linear_stat = std::move(stat);
  }
  if (f.pair_stat) {
    const PairStatForm& ps = *f.pair_stat;
    PairStatForm pair;
    auto smear2 = [offsets, node_w, d](const auto& kernel, const double* x,
                                       const double* y) {
      std::vector<double> sx(d), sy(d);
      double acc = 0.0;
      for (std::size_t k = 0; k < node_w->size(); ++k) {
        for (int c = 0; c < d; ++c) sx[c] = x[c] + (*offsets)[k * d + c];
        for (std::size_t l = 0; l < node_w->size(); ++l) {
          for (int c = 0; c < d; ++c) sy[c] = y[c] + (*offsets)[l * d + c];
          acc += (*node_w)[k] * (*node_w)[l] * kernel(sx.data(), sy.data());
        }
      }
      return acc;
    };
    pair.g = [ps, smear2](const double* x, const double* y) {
      return smear2(ps.g, x, y);
    };
    pair.g_drift = [ps, smear2](const double* x, const double* bx,
                                const double* y) {
      return smear2(
          [&ps, bx](const double* sx, const double* sy) {
            return ps.g_drift(sx, bx, sy);
          },
          x, y);
    };
    pair.g_diffusion = [ps, smear2](const double* x, const double* ax,
                                    const double* y) {
      return smear2(
          [&ps, ax](const double* sx, const double* sy) {
            return ps.g_diffusion(sx, ax, sy);
          },
          x, y);
    };
    out.pair_stat = std::move(pair);
  }
  return out;
}

double check_linear_derivative_identity(const MeasureFunctional& f,
                                        const EmpiricalMeasure& mu,
                                        const EmpiricalMeasure& nu,
                                        int n_quad) {
  if (n_quad < 2) {
    throw std::invalid_argument(
        "check_linear_derivative_identity: n_quad must be >= 2");
  }
  mu.validate();
  nu.validate();
  if (mu.dim != nu.dim || mu.dim != f.dim) {
    throw std::invalid_argument(
        "check_linear_derivative_identity: dimension mismatch");
  }
  std::vector<double> tn, tw;
  quad::gauss_legendre_ab(n_quad, 0.0, 1.0, &tn, &tw);
  std::vector<double> contributions(n_quad);
  for (int q = 0; q < n_quad; ++q) {
    const EmpiricalMeasure mix = mix_measures(mu, nu, tn[q]);
    auto deriv = f.prepare(mix);
    std::vector<double> terms;
    terms.reserve(mu.size() + nu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) {
      terms.push_back(mu.weights[j] * deriv->value(mu.point(j)));
    }
    for (std::size_t j = 0; j < nu.size(); ++j) {
      terms.push_back(-nu.weights[j] * deriv->value(nu.point(j)));
    }
    contributions[q] = tw[q] * pairwise_sum(terms);
  }
  const double integral = pairwise_sum(contributions);
  return std::abs(f.value(mu) - f.value(nu) - integral);
}

void finite_difference_oracle(const MeasureFunctional& f,
                              const EmpiricalMeasure& mu, const double* v,
                              double h, double* grad_out, double* hess_out) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite_difference_oracle: h must be > 0");
  }
  const int d = f.dim;
  auto deriv = f.prepare(mu);
  std::vector<double> p(v, v + d);
  auto at = [&](int i, double di, int j, double dj) {
    p.assign(v, v + d);
    p[i] += di;
    if (j >= 0) p[j] += dj;
    return deriv->value(p.data());
  };
  const double center = deriv->value(v);
  for (int i = 0; i < d; ++i) {
    grad_out[i] = (at(i, h, -1, 0) - at(i, -h, -1, 0)) / (2.0 * h);
    hess_out[i * d + i] =
        (at(i, h, -1, 0) - 2.0 * center + at(i, -h, -1, 0)) / (h * h);
    for (int j = i + 1; j < d; ++j) {
      const double hij = (at(i, h, j, h) - at(i, h, j, -h) -
                          at(i, -h, j, h) + at(i, -h, j, -h)) /
                         (4.0 * h * h);
      hess_out[i * d + j] = hij;
      hess_out[j * d + i] = hij;
    }
  }
}

ScalarField make_field(const std::string& id, int dim) {
  ScalarField g;
  g.dim = dim;
  if (id == "x1") {
    g.value = [](const double* x) { return x[0]; };
    g.grad = [dim](const double*, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = 0.0;
      out[0] = 1.0;
    };
    g.hess = [dim](const double*, double* out) {
      for (int c = 0; c < dim * dim; ++c) out[c] = 0.0;
    };
  } else if (id == "abs2") {
    g.value = [dim](const double* x) { return norm2(x, dim); };
    g.grad = [dim](const double* x, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = 2.0 * x[c];
    };
    g.hess = [dim](const double*, double* out) {
      for (int c = 0; c < dim * dim; ++c) out[c] = 0.0;
      for (int c = 0; c < dim; ++c) out[c * dim + c] = 2.0;
    };
  } else if (id == "gauss") {
    g.value = [dim](const double* x) { return std::exp(-norm2(x, dim)); };
    g.grad = [dim](const double* x, double* out) {
      const double e = std::exp(-norm2(x, dim));
      for (int c = 0; c < dim; ++c) out[c] = -2.0 * x[c] * e;
    };
    g.hess = [dim](const double* x, double* out) {
      const double e = std::exp(-norm2(x, dim));
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
          out[i * dim + j] =
              (4.0 * x[i] * x[j] - (i == j ? 2.0 : 0.0)) * e;
        }
      }
    };
  } else if (id == "const1") {
    g.value = [](const double*) { return 1.0; };
    g.grad = [dim](const double*, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = 0.0;
    };
    g.hess = [dim](const double*, double* out) {
      for (int c = 0; c < dim * dim; ++c) out[c] = 0.0;
    };
  } else {
    throw std::invalid_argument("make_field: unknown id '" + id + "'");
  }
  return g;
}

ScalarField2 make_kernel(const std::string& id, int dim) {
  ScalarField2 g;
  g.dim = dim;
  if (id == "prod") {
    g.value = [dim](const double* x, const double* y) {
      return dot(x, y, dim);
    };
    g.grad_x = [dim](const double*, const double* y, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = y[c];
    };
    g.grad_y = [dim](const double* x, const double*, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = x[c];
    };
    g.hess_x = [dim](const double*, const double*, double* out) {
      for (int c = 0; c < dim * dim; ++c) out[c] = 0.0;
    };
    g.hess_y = g.hess_x;
  } else if (id == "gauss") {
    // Separable kernel exp(-|x|^2 - |y|^2).
    auto e = [dim](const double* x, const double* y) {
      return std::exp(-norm2(x, dim) - norm2(y, dim));
    };
    g.value = e;
    g.grad_x = [dim, e](const double* x, const double* y, double* out) {
      const double v = e(x, y);
      for (int c = 0; c < dim; ++c) out[c] = -2.0 * x[c] * v;
    };
    g.grad_y = [dim, e](const double* x, const double* y, double* out) {
      const double v = e(x, y);
      for (int c = 0; c < dim; ++c) out[c] = -2.0 * y[c] * v;
    };
    g.hess_x = [dim, e](const double* x, const double* y, double* out) {
      const double v = e(x, y);
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
          out[i * dim + j] =
              (4.0 * x[i] * x[j] - (i == j ? 2.0 : 0.0)) * v;
        }
      }
    };
    g.hess_y = [dim, e](const double* x, const double* y, double* out) {
      const double v = e(x, y);
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
          out[i * dim + j] =
              (4.0 * y[i] * y[j] - (i == j ? 2.0 : 0.0)) * v;
        }
      }
    };
  } else if (id == "gauss_diff") {
    // exp(-|x - y|^2 / 2)
    auto e = [dim](const double* x, const double* y) {
      double s = 0.0;
      for (int c = 0; c < dim; ++c) {
        const double diff = x[c] - y[c];
        s += diff * diff;
      }
      return std::exp(-0.5 * s);
    };
    g.value = e;
    g.grad_x = [dim, e](const double* x, const double* y, double* out) {
      const double v = e(x, y);
      for (int c = 0; c < dim; ++c) out[c] = -(x[c] - y[c]) * v;
    };
    g.grad_y = [dim, e](const double* x, const double* y, double* out) {
      const double v = e(x, y);
      for (int c = 0; c < dim; ++c) out[c] = (x[c] - y[c]) * v;
    };
    g.hess_x = [dim, e](const double* x, const double* y, double* out) {
      const double v = e(x, y);
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
          out[i * dim + j] = ((x[i] - y[i]) * (x[j] - y[j]) -
                              (i == j ? 1.0 : 0.0)) *
                             v;
        }
      }
    };
    g.hess_y = g.hess_x;
  } else {
    throw std::invalid_argument("make_kernel: unknown id '" + id + "'");
  }
  return g;
}

ScalarField make_even_field(const std::string& id, int dim) {
  if (id == "gauss_bump") return make_field("gauss", dim);
  if (id == "abs2") return make_field("abs2", dim);
  throw std::invalid_argument("make_even_field: unknown id '" + id + "'");
}

CompositeOuter make_outer(const std::string& id, int dim) {
  CompositeOuter fo;
  fo.dim = dim;
  auto zero_vec = [dim](const double*, double, double* out) {
    for (int c = 0; c < dim; ++c) out[c] = 0.0;
  };
  auto zero_mat = [dim](const double*, double, double* out) {
    for (int c = 0; c < dim * dim; ++c) out[c] = 0.0;
  };
  if (id == "identity") {
    fo.value = [](const double*, double y) { return y; };
    fo.grad_x = zero_vec;
    fo.hess_x = zero_mat;
    fo.dy = [](const double*, double) { return 1.0; };
  } else if (id == "square") {
    fo.value = [](const double*, double y) { return y * y; };
    fo.grad_x = zero_vec;
    fo.hess_x = zero_mat;
    fo.dy = [](const double*, double y) { return 2.0 * y; };
  } else if (id == "x1_plus_y") {
    fo.value = [](const double* x, double y) { return x[0] + y; };
    fo.grad_x = [dim](const double*, double, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = 0.0;
      out[0] = 1.0;
    };
    fo.hess_x = zero_mat;
    fo.dy = [](const double*, double) { return 1.0; };
  } else {
    throw std::invalid_argument("make_outer: unknown id '" + id + "'");
  }
  return fo;
}

TimeField make_time_field(const std::string& id, int dim) {
  TimeField g;
  g.dim = dim;
  auto zero_vec = [dim](double, const double*, double* out) {
    for (int c = 0; c < dim; ++c) out[c] = 0.0;
  };
  auto zero_mat = [dim](double, const double*, double* out) {
    for (int c = 0; c < dim * dim; ++c) out[c] = 0.0;
  };
  if (id == "t") {
    g.value = [](double t, const double*) { return t; };
    g.dt = [](double, const double*) { return 1.0; };
    g.grad_x = zero_vec;
    g.hess_x = zero_mat;
  } else if (id == "t_x1") {
    g.value = [](double t, const double* x) { return t * x[0]; };
    g.dt = [](double, const double* x) { return x[0]; };
    g.grad_x = [dim](double t, const double*, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = 0.0;
      out[0] = t;
    };
    g.hess_x = zero_mat;
  } else if (id == "abs2") {
    g.value = [dim](double, const double* x) { return norm2(x, dim); };
    g.dt = [](double, const double*) { return 0.0; };
    g.grad_x = [dim](double, const double* x, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = 2.0 * x[c];
    };
    g.hess_x = [dim](double, const double*, double* out) {
      for (int c = 0; c < dim * dim; ++c) out[c] = 0.0;
      for (int c = 0; c < dim; ++c) out[c * dim + c] = 2.0;
    };
  } else {
    throw std::invalid_argument("make_time_field: unknown id '" + id + "'");
  }
  return g;
}

namespace {

// "quadratic:g=prod" -> {"quadratic", {{"g", "prod"}}}
std::pair<std::string, std::vector<std::pair<std::string, std::string>>>
parse_spec(const std::string& name) {
  const auto colon = name.find(':');
  std::string head = name.substr(0, colon);
  std::vector<std::pair<std::string, std::string>> params;
  if (colon != std::string::npos) {
    std::string rest = name.substr(colon + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      auto comma = rest.find(',', pos);
      if (comma == std::string::npos) comma = rest.size();
      const std::string item = rest.substr(pos, comma - pos);
      const auto eq = item.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("functional spec: malformed parameter '" +
                                    item + "'");
      }
      params.emplace_back(item.substr(0, eq), item.substr(eq + 1));
      pos = comma + 1;
    }
  }
  return {std::move(head), std::move(params)};
}

std::string find_param(
    const std::vector<std::pair<std::string, std::string>>& params,
    const std::string& key, const std::string& spec) {
  for (const auto& [k, v] : params) {
    if (k == key) return v;
  }
  throw std::invalid_argument("functional spec '" + spec +
                              "': missing parameter '" + key + "'");
}

}  // namespace

MeasureFunctional make_functional(const std::string& name, int dim) {
  auto [head, params] = parse_spec(name);
  if (head == "second_moment") {
    MeasureFunctional f = make_linear(make_field("abs2", dim));
    f.name = "second_moment";
    f.meta.sobolev_k = dim + 1;
    f.meta.alpha = 0.0;
    f.meta.hypothesis_certified = false;  // |x|^2 is not globally Sobolev
    return f;
  }
  if (head == "mean_squared") {
    MeasureFunctional f = make_quadratic(make_kernel("prod", dim));
    f.name = "mean_squared";
    f.meta.sobolev_k = 2.0 * dim;
    f.meta.alpha = 1.0;
    f.meta.hypothesis_certified = false;
    // u(mu) = |mean|^2 admits the cheaper vector-mean statistic.
    LinearStatForm stat;
    stat.stat_dim = dim;
    stat.s = [dim](const double* x, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = x[c];
    };
    stat.s_drift = [dim](const double*, const double* b, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = b[c];
    };
    stat.s_diffusion = [dim](const double*, const double*, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = 0.0;
    };
    stat.phi = [dim](const double* theta) { return norm2(theta, dim); };
    stat.dphi = [dim](const double* theta, double* out) {
      for (int c = 0; c < dim; ++c) out[c] = 2.0 * theta[c];
    };
    f.linear_stat = std::move(stat);
    return f;
  }
  if (head == "linear") {
    const std::string gid = find_param(params, "g", name);
    MeasureFunctional f = make_linear(make_field(gid, dim));
    f.name = name;
    f.meta.sobolev_k = dim + 1;
    f.meta.hypothesis_certified = (gid == "gauss" || gid == "const1");
    return f;
  }
  if (head == "quadratic") {
    const std::string gid = find_param(params, "g", name);
    MeasureFunctional f = make_quadratic(make_kernel(gid, dim));
    f.name = name;
    f.meta.sobolev_k = 2.0 * dim;
    f.meta.alpha = 1.0;
    f.meta.hypothesis_certified = (gid != "prod");
    return f;
  }
  if (head == "convolution") {
    const std::string fid = find_param(params, "f", name);
    MeasureFunctional f = make_convolution(make_even_field(fid, dim));
    f.name = name;
    f.meta.sobolev_k = dim + 1;
    f.meta.alpha = 0.0;
    f.meta.hypothesis_certified = (fid == "gauss_bump");
    return f;
  }
  throw std::invalid_argument("make_functional: unknown name '" + name + "'");
}

ExtendedFunctional make_extended_functional(const std::string& name, int dim) {
  auto [head, params] = parse_spec(name);
  if (head == "bilinear") {
    const std::string gid = find_param(params, "g", name);
    ExtendedFunctional u = make_bilinear(make_kernel(gid, dim));
    u.name = name;
    u.meta.hypothesis_certified = (gid != "prod");
    if (gid == "prod") {
      ExtStatsForm stats;
      stats.stat_dim = dim;
      stats.s = [dim](const double* y, double* out) {
        for (int c = 0; c < dim; ++c) out[c] = y[c];
      };
      stats.s_drift = [dim](const double*, const double* by, double* out) {
        for (int c = 0; c < dim; ++c) out[c] = by[c];
      };
      stats.s_diffusion = [dim](const double*, const double*, double* out) {
        for (int c = 0; c < dim; ++c) out[c] = 0.0;
      };
      stats.value = [dim](double, const double* x, const double* theta) {
        return dot(x, theta, dim);
      };
      stats.dt = [](double, const double*, const double*) { return 0.0; };
      stats.grad_x = [dim](double, const double*, const double* theta,
                           double* out) {
        for (int c = 0; c < dim; ++c) out[c] = theta[c];
      };
      stats.hess_x = [dim](double, const double*, const double*, double* out) {
        for (int c = 0; c < dim * dim; ++c) out[c] = 0.0;
      };
      stats.tilde_drift = [dim](double, const double* x, const double*,
                                const double* theta_drift) {
        return dot(x, theta_drift, dim);
      };
      stats.tilde_diffusion = [dim](double, const double* x, const double*,
                                    const double* theta_diffusion) {
        return dot(x, theta_diffusion, dim);
      };
      u.stats = std::move(stats);
    }
    return u;
  }
  if (head == "composite") {
    const std::string fid = find_param(params, "F", name);
    const std::string gid = find_param(params, "g", name);
    ExtendedFunctional u =
        make_composite(make_outer(fid, dim), make_field(gid, dim));
    u.name = name;
    u.meta.hypothesis_certified = (gid == "gauss" || gid == "const1");
    return u;
  }
  throw std::invalid_argument("make_extended_functional: unknown name '" +
                              name + "'");
}

}  // namespace itoflow
