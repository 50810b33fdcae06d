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
#include "itoflow/formula.hpp"

#include <cmath>
#include <cstring>

namespace itoflow {

double FormulaReport::max_abs_residual() const {
  double m = 0.0;
  for (double r : residual) m = std::max(m, std::abs(r));
  return m;
}

bool FormulaReport::within_band(double band_factor, double floor) const {
  for (std::size_t i = 0; i < residual.size(); ++i) {
    if (std::abs(residual[i]) > band_factor * mc_stderr[i] + floor) {
      return false;
    }
  }
  return true;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_slope: need at least two points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

namespace {

struct Blocks {
  std::size_t total = 0;
  std::size_t block_size = 1;
  std::size_t count = 1;
  std::size_t size_of(std::size_t k) const {
    return std::min(total, (k + 1) * block_size) - k * block_size;
  }
};

Blocks make_blocks(std::size_t n, int requested) {
  Blocks b;
  b.total = n;
  const std::size_t k =
      std::min<std::size_t>(std::max(requested, 1), std::max<std::size_t>(n, 1));
  b.block_size = (n + k - 1) / k;
  b.count = num_blocks(n, b.block_size);
  return b;
}

// One bootstrap resample: block multiplicities and the resampled path count.
void draw_multiplicities(std::uint64_t seed, std::uint64_t r,
                         const Blocks& blocks, std::vector<double>* c,
                         double* total_weight) {
  c->assign(blocks.count, 0.0);
  for (std::size_t k = 0; k < blocks.count; ++k) {
    const double u = rng::uniform(seed, rng::Channel::kBootstrap, r, 0, k);
    const std::size_t idx = std::min(
        blocks.count - 1, static_cast<std::size_t>(u * blocks.count));
    (*c)[idx] += 1.0;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < blocks.count; ++k) {
    total += (*c)[k] * blocks.size_of(k);
  }
  *total_weight = total;
}

void stderr_from_resamples(const std::vector<double>& series, int n_times,
                           int n_resamples, std::vector<double>* out) {
  out->assign(n_times, 0.0);
  if (n_resamples < 2) return;
  for (int i = 0; i < n_times; ++i) {
    double mean = 0.0;
    for (int r = 0; r < n_resamples; ++r) mean += series[r * n_times + i];
    mean /= n_resamples;
    double var = 0.0;
    for (int r = 0; r < n_resamples; ++r) {
      const double dv = series[r * n_times + i] - mean;
      var += dv * dv;
    }
    (*out)[i] = std::sqrt(var / (n_resamples - 1));
  }
}

void coeffs_at(const PathBundle& paths, const CoefficientModel& model,
               std::size_t p, int i, double* b, double* a, double* sigma_buf) {
  paths.drift_value(model, p, i, b);
  paths.diffusion_value(model, p, i, sigma_buf);
  gram(sigma_buf, paths.dim, paths.noise_dim, a);
}

void check_term(double v, const char* term, int i) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("verify: ") + term +
                       " non-finite at time index " + std::to_string(i));
  }
}

FormulaReport flow_linear(const MeasureFunctional& f, const PathBundle& paths,
                          const CoefficientModel& model,
                          const BootstrapSpec& bs, int n_threads) {
  const LinearStatForm& ls = *f.linear_stat;
  const int m = ls.stat_dim;
  const int nt = paths.grid.n_steps + 1;
  const int d = paths.dim;
  const int d1 = paths.noise_dim;
  const std::size_t n = paths.n_paths;
  const double dt = paths.grid.dt();
  const Blocks blocks = make_blocks(n, bs.n_blocks);
  const std::size_t kb = blocks.count;

  // Block sums, per time: [s | s_drift | s_diffusion], each of width m.
  std::vector<double> bsum(static_cast<std::size_t>(nt) * kb * 3 * m, 0.0);
  for (int i = 0; i < nt; ++i) {
    const bool left = i < paths.grid.n_steps;
    parallel_for_blocks(
        n, blocks.block_size,
        [&](std::size_t k, std::size_t begin, std::size_t end) {
          std::vector<double> buf(m), b(d), a(static_cast<std::size_t>(d) * d),
              sig(static_cast<std::size_t>(d) * d1);
          double* cell = bsum.data() + (static_cast<std::size_t>(i) * kb + k) *
                                           3 * m;
          for (std::size_t p = begin; p < end; ++p) {
            const double* x = paths.state(i, p);
            ls.s(x, buf.data());
            for (int q = 0; q < m; ++q) cell[q] += buf[q];
            if (!left) continue;
            coeffs_at(paths, model, p, i, b.data(), a.data(), sig.data());
            ls.s_drift(x, b.data(), buf.data());
            for (int q = 0; q < m; ++q) cell[m + q] += buf[q];
            ls.s_diffusion(x, a.data(), buf.data());
            for (int q = 0; q < m; ++q) cell[2 * m + q] += buf[q];
          }
        },
        n_threads);
  }

  auto block_mean = [&](int i, int which, double weight_total,
                        const std::vector<double>* mult, double* out) {
    for (int q = 0; q < m; ++q) {
      std::vector<double> parts(kb);
      for (std::size_t k = 0; k < kb; ++k) {
        const double c = mult ? (*mult)[k] : 1.0;
        parts[k] =
            c * bsum[(static_cast<std::size_t>(i) * kb + k) * 3 * m +
                     which * m + q];
      }
      out[q] = pairwise_sum(parts) / weight_total;
    }
  };

  // Residual series for one (possibly reweighted) sample.
  auto series = [&](const std::vector<double>* mult, double weight_total,
                    FormulaReport* full, double* residual_out) {
    std::vector<double> theta(m), theta0(m), dp(m), ed(m), ef(m);
    block_mean(0, 0, weight_total, mult, theta0.data());
    const double u0 = ls.phi(theta0.data());
    double drift_cum = 0.0, diff_cum = 0.0;
    for (int i = 0; i < nt; ++i) {
      block_mean(i, 0, weight_total, mult, theta.data());
      const double lhs = ls.phi(theta.data()) - u0;
      const double res = lhs - drift_cum - diff_cum;
      residual_out[i] = res;
      if (full) {
        check_term(lhs, "lhs", i);
        full->lhs[i] = lhs;
        full->drift_term[i] = drift_cum;
        full->diffusion_term[i] = diff_cum;
        full->residual[i] = res;
      }
      if (i < paths.grid.n_steps) {
        block_mean(i, 1, weight_total, mult, ed.data());
        block_mean(i, 2, weight_total, mult, ef.data());
        ls.dphi(theta.data(), dp.data());
        const double dinc = dot(dp.data(), ed.data(), m);
        const double finc = dot(dp.data(), ef.data(), m);
        if (full) {
          check_term(dinc, "drift term", i);
          check_term(finc, "diffusion term", i);
        }
        drift_cum += dt * dinc;
        diff_cum += dt * finc;
      }
    }
    residual_out[0] = 0.0;
    if (full) full->residual[0] = 0.0;
  };

  FormulaReport report;
  report.scenario = "measure_flow";
  report.functional_name = f.name;
  report.times.resize(nt);
  for (int i = 0; i < nt; ++i) report.times[i] = paths.grid.time(i);
  report.lhs.assign(nt, 0.0);
  report.drift_term.assign(nt, 0.0);
  report.diffusion_term.assign(nt, 0.0);
  report.residual.assign(nt, 0.0);
  std::vector<double> res_buf(nt);
  series(nullptr, static_cast<double>(n), &report, res_buf.data());

  report.n_resamples = bs.n_resamples;
  std::vector<double> boot(static_cast<std::size_t>(std::max(bs.n_resamples, 0)) * nt);
  std::vector<double> mult;
  for (int r = 0; r < bs.n_resamples; ++r) {
    double w = 0.0;
    draw_multiplicities(paths.seed, r, blocks, &mult, &w);
    series(&mult, w, nullptr, boot.data() + static_cast<std::size_t>(r) * nt);
  }
  stderr_from_resamples(boot, nt, bs.n_resamples, &report.mc_stderr);
  return report;
}

FormulaReport flow_pair(const MeasureFunctional& f, const PathBundle& paths,
                        const CoefficientModel& model, const BootstrapSpec& bs,
                        int n_threads) {
  const PairStatForm& ps = *f.pair_stat;
  const int nt = paths.grid.n_steps + 1;
  const int d = paths.dim;
  const int d1 = paths.noise_dim;
  const std::size_t n = paths.n_paths;
  const double dt = paths.grid.dt();
  // Pair reductions are quadratic in the block count; keep it modest.
  const Blocks blocks = make_blocks(n, std::min(bs.n_blocks, 32));
  const std::size_t kb = blocks.count;

  // Per time, K x K block-pair sums of [g | g_drift | g_diffusion].
  const std::size_t cell_stride = kb * kb;
  std::vector<double> bsum(static_cast<std::size_t>(nt) * 3 * cell_stride,
                           0.0);
  std::vector<double> b_all(n * d), a_all(n * d * d);
  for (int i = 0; i < nt; ++i) {
    const bool left = i < paths.grid.n_steps;
    if (left) {
      parallel_for_blocks(
          n, blocks.block_size,
          [&](std::size_t, std::size_t begin, std::size_t end) {
            std::vector<double> sig(static_cast<std::size_t>(d) * d1);
            for (std::size_t p = begin; p < end; ++p) {
              coeffs_at(paths, model, p, i, b_all.data() + p * d,
                        a_all.data() + p * d * d, sig.data());
            }
          },
          n_threads);
    }
    double* base = bsum.data() + static_cast<std::size_t>(i) * 3 * cell_stride;
    parallel_for_blocks(
        n, blocks.block_size,
        [&](std::size_t kp, std::size_t begin, std::size_t end) {
          for (std::size_t p = begin; p < end; ++p) {
            const double* xp = paths.state(i, p);
            for (std::size_t q = 0; q < n; ++q) {
              const std::size_t kq = q / blocks.block_size;
              const double* xq = paths.state(i, q);
              base[kp * kb + kq] += ps.g(xp, xq);
              if (left) {
                base[cell_stride + kp * kb + kq] +=
                    ps.g_drift(xp, b_all.data() + p * d, xq);
                base[2 * cell_stride + kp * kb + kq] +=
                    ps.g_diffusion(xp, a_all.data() + p * d * d, xq);
              }
            }
          }
        },
        n_threads);
  }

  auto pair_mean = [&](int i, int which, const std::vector<double>* mult,
                       double weight_total) {
    const double* base =
        bsum.data() + (static_cast<std::size_t>(i) * 3 + which) * cell_stride;
    std::vector<double> parts(cell_stride);
    for (std::size_t kp = 0; kp < kb; ++kp) {
      for (std::size_t kq = 0; kq < kb; ++kq) {
        const double c = mult ? (*mult)[kp] * (*mult)[kq] : 1.0;
        parts[kp * kb + kq] = c * base[kp * kb + kq];
      }
    }
    return pairwise_sum(parts) / (weight_total * weight_total);
  };

  auto series = [&](const std::vector<double>* mult, double weight_total,
                    FormulaReport* full, double* residual_out) {
    const double u0 = pair_mean(0, 0, mult, weight_total);
    double drift_cum = 0.0, diff_cum = 0.0;
    for (int i = 0; i < nt; ++i) {
      const double lhs = pair_mean(i, 0, mult, weight_total) - u0;
      const double res = lhs - drift_cum - diff_cum;
      residual_out[i] = res;
      if (full) {
        check_term(lhs, "lhs", i);
        full->lhs[i] = lhs;
        full->drift_term[i] = drift_cum;
        full->diffusion_term[i] = diff_cum;
        full->residual[i] = res;
      }
      if (i < paths.grid.n_steps) {
        const double dinc = pair_mean(i, 1, mult, weight_total);
        const double finc = pair_mean(i, 2, mult, weight_total);
        if (full) {
          check_term(dinc, "drift term", i);
          check_term(finc, "diffusion term", i);
        }
        drift_cum += dt * dinc;
        diff_cum += dt * finc;
      }
    }
    residual_out[0] = 0.0;
    if (full) full->residual[0] = 0.0;
  };

  FormulaReport report;
  report.scenario = "measure_flow";
  report.functional_name = f.name;
  report.times.resize(nt);
  for (int i = 0; i < nt; ++i) report.times[i] = paths.grid.time(i);
  report.lhs.assign(nt, 0.0);
  report.drift_term.assign(nt, 0.0);
  report.diffusion_term.assign(nt, 0.0);
  report.residual.assign(nt, 0.0);
  std::vector<double> res_buf(nt);
  series(nullptr, static_cast<double>(n), &report, res_buf.data());

  report.n_resamples = bs.n_resamples;
  std::vector<double> boot(static_cast<std::size_t>(std::max(bs.n_resamples, 0)) * nt);
  std::vector<double> mult;
  for (int r = 0; r < bs.n_resamples; ++r) {
    double w = 0.0;
    draw_multiplicities(paths.seed, r, blocks, &mult, &w);
    series(&mult, w, nullptr, boot.data() + static_cast<std::size_t>(r) * nt);
  }
  stderr_from_resamples(boot, nt, bs.n_resamples, &report.mc_stderr);
  return report;
}

FormulaReport flow_generic(const MeasureFunctional& f, const PathBundle& paths,
                           const CoefficientModel& model,
                           const BootstrapSpec& bs, int n_threads) {
  const int nt = paths.grid.n_steps + 1;
  const int d = paths.dim;
  const int d1 = paths.noise_dim;
  const std::size_t n = paths.n_paths;
  const double dt = paths.grid.dt();
  if (static_cast<double>(bs.n_resamples) * nt * n > 1e9) {
    throw CapacityError(
        "verify_measure_flow: run too large for direct bootstrap; the "
        "functional has no sufficient-statistic form");
  }
  (void)n_threads;
  const Blocks blocks = make_blocks(n, bs.n_blocks);

  auto series = [&](const std::vector<double>* mult, double weight_total,
                    FormulaReport* full, double* residual_out) {
    // Reweighted empirical measure for this (re)sample.
    std::vector<double> weights(n);
    for (std::size_t p = 0; p < n; ++p) {
      const double c = mult ? (*mult)[p / blocks.block_size] : 1.0;
      weights[p] = c / weight_total;
    }
    std::vector<double> b(d), a(static_cast<std::size_t>(d) * d),
        sig(static_cast<std::size_t>(d) * d1), gr(d),
        hs(static_cast<std::size_t>(d) * d);
    double u0 = 0.0, drift_cum = 0.0, diff_cum = 0.0;
    for (int i = 0; i < nt; ++i) {
      EmpiricalMeasure mu = marginal(paths, i);
      mu.weights = weights;
      const double ui = f.value(mu);
      if (i == 0) u0 = ui;
      const double lhs = ui - u0;
      const double res = lhs - drift_cum - diff_cum;
      residual_out[i] = res;
      if (full) {
        check_term(lhs, "lhs", i);
        full->lhs[i] = lhs;
        full->drift_term[i] = drift_cum;
        full->diffusion_term[i] = diff_cum;
        full->residual[i] = res;
      }
      if (i < paths.grid.n_steps) {
        auto deriv = f.prepare(mu);
        std::vector<double> dparts(n), fparts(n);
        for (std::size_t p = 0; p < n; ++p) {
          const double* x = paths.state(i, p);
          coeffs_at(paths, model, p, i, b.data(), a.data(), sig.data());
          deriv->grad(x, gr.data());
          deriv->hess(x, hs.data());
          dparts[p] = weights[p] * dot(gr.data(), b.data(), d);
          fparts[p] = weights[p] * 0.5 * mat_dot(hs.data(), a.data(), d);
        }
        const double dinc = pairwise_sum(dparts);
        const double finc = pairwise_sum(fparts);
        if (full) {
          check_term(dinc, "drift term", i);
          check_term(finc, "diffusion term", i);
        }
        drift_cum += dt * dinc;
        diff_cum += dt * finc;
      }
    }
    residual_out[0] = 0.0;
    if (full) full->residual[0] = 0.0;
  };

  FormulaReport report;
  report.scenario = "measure_flow";
  report.functional_name = f.name;
  report.times.resize(nt);
  for (int i = 0; i < nt; ++i) report.times[i] = paths.grid.time(i);
  report.lhs.assign(nt, 0.0);
  report.drift_term.assign(nt, 0.0);
  report.diffusion_term.assign(nt, 0.0);
  report.residual.assign(nt, 0.0);
  std::vector<double> res_buf(nt);
  series(nullptr, static_cast<double>(n), &report, res_buf.data());

  report.n_resamples = bs.n_resamples;
  std::vector<double> boot(static_cast<std::size_t>(std::max(bs.n_resamples, 0)) * nt);
  std::vector<double> mult;
  for (int r = 0; r < bs.n_resamples; ++r) {
    double w = 0.0;
    draw_multiplicities(paths.seed, r, blocks, &mult, &w);
    series(&mult, w, nullptr, boot.data() + static_cast<std::size_t>(r) * nt);
  }
  stderr_from_resamples(boot, nt, bs.n_resamples, &report.mc_stderr);
  return report;
}

}  // namespace

FormulaReport verify_measure_flow(const MeasureFunctional& f,
                                  const PathBundle& paths,
                                  const CoefficientModel& model,
                                  const BootstrapSpec& bootstrap,
                                  int n_threads) {
  if (f.dim != paths.dim || model.dim != paths.dim) {
    throw std::invalid_argument("verify_measure_flow: dimension mismatch");
  }
  if (f.linear_stat) return flow_linear(f, paths, model, bootstrap, n_threads);
  if (f.pair_stat) return flow_pair(f, paths, model, bootstrap, n_threads);
  return flow_generic(f, paths, model, bootstrap, n_threads);
}

FormulaReport verify_time_linear(const TimeField& g, const PathBundle& paths,
                                 const CoefficientModel& model,
                                 const BootstrapSpec& bs, int n_threads) {
  if (g.dim != paths.dim || model.dim != paths.dim) {
    throw std::invalid_argument("verify_time_linear: dimension mismatch");
  }
  const int nt = paths.grid.n_steps + 1;
  const int d = paths.dim;
  const int d1 = paths.noise_dim;
  const std::size_t n = paths.n_paths;
  const double dt = paths.grid.dt();
  const Blocks blocks = make_blocks(n, bs.n_blocks);
  const std::size_t kb = blocks.count;

  // Block sums per time of [g, dt g, grad g . b, 0.5 hess g : a].
  std::vector<double> bsum(static_cast<std::size_t>(nt) * kb * 4, 0.0);
  for (int i = 0; i < nt; ++i) {
    const bool left = i < paths.grid.n_steps;
    const double t = paths.grid.time(i);
    parallel_for_blocks(
        n, blocks.block_size,
        [&](std::size_t k, std::size_t begin, std::size_t end) {
          std::vector<double> b(d), a(static_cast<std::size_t>(d) * d),
              sig(static_cast<std::size_t>(d) * d1), gr(d),
              hs(static_cast<std::size_t>(d) * d);
          double* cell =
              bsum.data() + (static_cast<std::size_t>(i) * kb + k) * 4;
          for (std::size_t p = begin; p < end; ++p) {
            const double* x = paths.state(i, p);
            cell[0] += g.value(t, x);
            if (!left) continue;
            coeffs_at(paths, model, p, i, b.data(), a.data(), sig.data());
            cell[1] += g.dt(t, x);
            g.grad_x(t, x, gr.data());
            cell[2] += dot(gr.data(), b.data(), d);
            g.hess_x(t, x, hs.data());
            cell[3] += 0.5 * mat_dot(hs.data(), a.data(), d);
          }
        },
        n_threads);
  }

  auto block_mean = [&](int i, int which, const std::vector<double>* mult,
                        double weight_total) {
    std::vector<double> parts(kb);
    for (std::size_t k = 0; k < kb; ++k) {
      const double c = mult ? (*mult)[k] : 1.0;
      parts[k] = c * bsum[(static_cast<std::size_t>(i) * kb + k) * 4 + which];
    }
    return pairwise_sum(parts) / weight_total;
  };

  auto series = [&](const std::vector<double>* mult, double weight_total,
                    FormulaReport* full, double* residual_out) {
    const double u0 = block_mean(0, 0, mult, weight_total);
    double time_cum = 0.0, drift_cum = 0.0, diff_cum = 0.0;
    for (int i = 0; i < nt; ++i) {
      const double lhs = block_mean(i, 0, mult, weight_total) - u0;
      const double res = lhs - time_cum - drift_cum - diff_cum;
      residual_out[i] = res;
      if (full) {
        check_term(lhs, "lhs", i);
        full->lhs[i] = lhs;
        full->time_term[i] = time_cum;
        full->drift_term[i] = drift_cum;
        full->diffusion_term[i] = diff_cum;
        full->residual[i] = res;
      }
      if (i < paths.grid.n_steps) {
        time_cum += dt * block_mean(i, 1, mult, weight_total);
        drift_cum += dt * block_mean(i, 2, mult, weight_total);
        diff_cum += dt * block_mean(i, 3, mult, weight_total);
      }
    }
    residual_out[0] = 0.0;
    if (full) full->residual[0] = 0.0;
  };

  FormulaReport report;
  report.scenario = "time_linear";
  report.functional_name = "time_linear";
  report.times.resize(nt);
  for (int i = 0; i < nt; ++i) report.times[i] = paths.grid.time(i);
  report.lhs.assign(nt, 0.0);
  report.time_term.assign(nt, 0.0);
  report.drift_term.assign(nt, 0.0);
  report.diffusion_term.assign(nt, 0.0);
  report.residual.assign(nt, 0.0);
  std::vector<double> res_buf(nt);
  series(nullptr, static_cast<double>(n), &report, res_buf.data());

  report.n_resamples = bs.n_resamples;
  std::vector<double> boot(static_cast<std::size_t>(std::max(bs.n_resamples, 0)) * nt);
  std::vector<double> mult;
  for (int r = 0; r < bs.n_resamples; ++r) {
    double w = 0.0;
    draw_multiplicities(paths.seed, r, blocks, &mult, &w);
    series(&mult, w, nullptr, boot.data() + static_cast<std::size_t>(r) * nt);
  }
  stderr_from_resamples(boot, nt, bs.n_resamples, &report.mc_stderr);
  return report;
}

namespace {

FormulaReport extended_stats(const ExtendedFunctional& f,
                             const PathBundle& xi, const CoefficientModel& xim,
                             const PathBundle& xp, const CoefficientModel& xm,
                             const BootstrapSpec& bs, int n_threads) {
  const ExtStatsForm& st = *f.stats;
  const int m = st.stat_dim;
  const int nt = xi.grid.n_steps + 1;
  const int n_steps = xi.grid.n_steps;
  const int d = f.dim;
  const int d1x = xi.noise_dim;
  const std::size_t nx = xp.n_paths;
  const std::size_t nxi = xi.n_paths;
  const double dt = xi.grid.dt();

  // X-ensemble reductions: block sums of [s | s_drift | s_diffusion].
  const Blocks xblocks = make_blocks(nx, bs.n_blocks);
  const std::size_t kx = xblocks.count;
  std::vector<double> xsum(static_cast<std::size_t>(nt) * kx * 3 * m, 0.0);
  {
    const int dd1 = xp.noise_dim;
    for (int i = 0; i < nt; ++i) {
      const bool left = i < n_steps;
      parallel_for_blocks(
          nx, xblocks.block_size,
          [&](std::size_t k, std::size_t begin, std::size_t end) {
            std::vector<double> buf(m), b(d),
                a(static_cast<std::size_t>(d) * d),
                sig(static_cast<std::size_t>(d) * dd1);
            double* cell =
                xsum.data() + (static_cast<std::size_t>(i) * kx + k) * 3 * m;
            for (std::size_t q = begin; q < end; ++q) {
              const double* y = xp.state(i, q);
              st.s(y, buf.data());
              for (int c = 0; c < m; ++c) cell[c] += buf[c];
              if (!left) continue;
              coeffs_at(xp, xm, q, i, b.data(), a.data(), sig.data());
              st.s_drift(y, b.data(), buf.data());
              for (int c = 0; c < m; ++c) cell[m + c] += buf[c];
              st.s_diffusion(y, a.data(), buf.data());
              for (int c = 0; c < m; ++c) cell[2 * m + c] += buf[c];
            }
          },
          n_threads);
    }
  }
  auto theta_at = [&](int i, int which, const std::vector<double>* mult,
                      double weight_total, double* out) {
    for (int c = 0; c < m; ++c) {
      std::vector<double> parts(kx);
      for (std::size_t k = 0; k < kx; ++k) {
        const double cm = mult ? (*mult)[k] : 1.0;
        parts[k] = cm * xsum[(static_cast<std::size_t>(i) * kx + k) * 3 * m +
                             which * m + c];
      }
      out[c] = pairwise_sum(parts) / weight_total;
    }
  };

  // Per xi-path primitives reused by every resample: drift eta, gamma dB,
  // and gamma gamma^T per left endpoint.
  std::vector<double> eta(static_cast<std::size_t>(n_steps) * nxi * d);
  std::vector<double> gdb(static_cast<std::size_t>(n_steps) * nxi * d);
  std::vector<double> gga(static_cast<std::size_t>(n_steps) * nxi * d * d);
  parallel_for_blocks(
      nxi, 1024,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> sig(static_cast<std::size_t>(d) * d1x), dw(d1x);
        for (std::size_t p = begin; p < end; ++p) {
          for (int i = 0; i < n_steps; ++i) {
            const std::size_t at = (static_cast<std::size_t>(i) * nxi + p);
            xi.drift_value(xim, p, i, eta.data() + at * d);
            xi.diffusion_value(xim, p, i, sig.data());
            gram(sig.data(), d, d1x, gga.data() + at * d * d);
            xi.increment(p, i, dw.data());
            mat_vec(sig.data(), dw.data(), d, d1x, gdb.data() + at * d);
          }
        }
      },
      n_threads);

  // One pass over the xi ensemble: series of every term plus per-path sup.
  // theta arrays for the point estimate.
  std::vector<double> theta_all(static_cast<std::size_t>(nt) * m);
  std::vector<double> thd_all(static_cast<std::size_t>(nt) * m, 0.0);
  std::vector<double> thf_all(static_cast<std::size_t>(nt) * m, 0.0);
  for (int i = 0; i < nt; ++i) {
    theta_at(i, 0, nullptr, static_cast<double>(nx), theta_all.data() + i * m);
    if (i < n_steps) {
      theta_at(i, 1, nullptr, static_cast<double>(nx), thd_all.data() + i * m);
      theta_at(i, 2, nullptr, static_cast<double>(nx), thf_all.data() + i * m);
    }
  }

  const Blocks xiblocks = make_blocks(nxi, bs.n_blocks);

  // Accumulates the report series for one joint (xi, x) resample.
  // mult_xi / mult_x of nullptr means the full-sample point estimate.
  auto series = [&](const std::vector<double>* mult_xi, double wxi,
                    const std::vector<double>* mult_x, double wx,
                    FormulaReport* full, double* residual_out,
                    double* mart_mean_out, double* sup_out) {
    std::vector<double> th(static_cast<std::size_t>(nt) * m),
        thd(static_cast<std::size_t>(nt) * m, 0.0),
        thf(static_cast<std::size_t>(nt) * m, 0.0);
    if (mult_x) {
      for (int i = 0; i < nt; ++i) {
        theta_at(i, 0, mult_x, wx, th.data() + i * m);
        if (i < n_steps) {
          theta_at(i, 1, mult_x, wx, thd.data() + i * m);
          theta_at(i, 2, mult_x, wx, thf.data() + i * m);
        }
      }
    } else {
      th = theta_all;
      thd = thd_all;
      thf = thf_all;
    }
    // Per-time accumulators over xi paths.
    std::vector<double> acc_lhs(nt, 0.0), acc_time(nt, 0.0), acc_sd(nt, 0.0),
        acc_sf(nt, 0.0), acc_td(nt, 0.0), acc_tf(nt, 0.0), acc_mart(nt, 0.0);
    std::vector<double> gx(d), hx(static_cast<std::size_t>(d) * d);
    double sup = 0.0;
    for (std::size_t p = 0; p < nxi; ++p) {
      const double cw =
          mult_xi ? (*mult_xi)[p / xiblocks.block_size] / wxi : 1.0 / nxi;
      if (cw == 0.0) continue;
      double mart = 0.0, rhs_cum = 0.0;
      double u0 = 0.0;
      for (int i = 0; i < nt; ++i) {
        const double t = xi.grid.time(i);
        const double* x = xi.state(i, p);
        const double* thi = th.data() + i * m;
        const double ui = st.value(t, x, thi);
        if (i == 0) u0 = ui;
        acc_lhs[i] += cw * (ui - u0);
        acc_mart[i] += cw * mart;
        if (!mult_xi && !mult_x) {
          sup = std::max(sup, std::abs(ui - u0 - rhs_cum - mart));
        }
        if (i >= n_steps) continue;
        const std::size_t at = (static_cast<std::size_t>(i) * nxi + p);
        const double tv = st.dt(t, x, thi);
        st.grad_x(t, x, thi, gx.data());
        const double sd = dot(gx.data(), eta.data() + at * d, d);
        st.hess_x(t, x, thi, hx.data());
        const double sf = 0.5 * mat_dot(hx.data(), gga.data() + at * d * d, d);
        const double td = st.tilde_drift(t, x, thi, thd.data() + i * m);
        const double tf = st.tilde_diffusion(t, x, thi, thf.data() + i * m);
        acc_time[i] += cw * tv;
        acc_sd[i] += cw * sd;
        acc_sf[i] += cw * sf;
        acc_td[i] += cw * td;
        acc_tf[i] += cw * tf;
        rhs_cum += dt * (tv + sd + sf + td + tf);
        mart += dot(gx.data(), gdb.data() + at * d, d);
      }
    }
    double time_cum = 0.0, sd_cum = 0.0, sf_cum = 0.0, td_cum = 0.0,
           tf_cum = 0.0;
    for (int i = 0; i < nt; ++i) {
      const double res = acc_lhs[i] - time_cum - sd_cum - sf_cum - td_cum -
                         tf_cum - acc_mart[i];
      residual_out[i] = res;
      if (full) {
        check_term(acc_lhs[i], "lhs", i);
        check_term(acc_mart[i], "martingale term", i);
        full->lhs[i] = acc_lhs[i];
        full->time_term[i] = time_cum;
        full->space_drift_term[i] = sd_cum;
        full->space_diffusion_term[i] = sf_cum;
        full->drift_term[i] = td_cum;
        full->diffusion_term[i] = tf_cum;
        full->martingale_term[i] = acc_mart[i];
        full->residual[i] = res;
      }
      if (i < n_steps) {
        check_term(acc_td[i], "tilde drift term", i);
        check_term(acc_tf[i], "tilde diffusion term", i);
        time_cum += dt * acc_time[i];
        sd_cum += dt * acc_sd[i];
        sf_cum += dt * acc_sf[i];
        td_cum += dt * acc_td[i];
        tf_cum += dt * acc_tf[i];
      }
    }
    residual_out[0] = 0.0;
    if (full) full->residual[0] = 0.0;
    if (mart_mean_out) *mart_mean_out = acc_mart[nt - 1];
    if (sup_out) *sup_out = sup;
  };

  FormulaReport report;
  report.scenario = "extended";
  report.functional_name = f.name;
  report.times.resize(nt);
  for (int i = 0; i < nt; ++i) report.times[i] = xi.grid.time(i);
  report.lhs.assign(nt, 0.0);
  report.time_term.assign(nt, 0.0);
  report.space_drift_term.assign(nt, 0.0);
  report.space_diffusion_term.assign(nt, 0.0);
  report.drift_term.assign(nt, 0.0);
  report.diffusion_term.assign(nt, 0.0);
  report.martingale_term.assign(nt, 0.0);
  report.residual.assign(nt, 0.0);
  std::vector<double> res_buf(nt);
  double mart_mean = 0.0, sup = 0.0;
  series(nullptr, 0.0, nullptr, 0.0, &report, res_buf.data(), &mart_mean,
         &sup);
  report.martingale_mean = mart_mean;
  report.per_path_residual_sup = sup;

  report.n_resamples = bs.n_resamples;
  std::vector<double> boot(static_cast<std::size_t>(std::max(bs.n_resamples, 0)) * nt);
  std::vector<double> mart_boot(std::max(bs.n_resamples, 0));
  std::vector<double> mult_xi, mult_x;
  for (int r = 0; r < bs.n_resamples; ++r) {
    double wxi = 0.0, wx = 0.0;
    draw_multiplicities(xi.seed, r, xiblocks, &mult_xi, &wxi);
    draw_multiplicities(xp.seed, r, xblocks, &mult_x, &wx);
    series(&mult_xi, wxi, &mult_x, wx, nullptr,
           boot.data() + static_cast<std::size_t>(r) * nt, &mart_boot[r],
           nullptr);
  }
  stderr_from_resamples(boot, nt, bs.n_resamples, &report.mc_stderr);
  if (bs.n_resamples >= 2) {
    double mean = 0.0;
    for (double v : mart_boot) mean += v;
    mean /= bs.n_resamples;
    double var = 0.0;
    for (double v : mart_boot) var += (v - mean) * (v - mean);
    report.martingale_mean_se = std::sqrt(var / (bs.n_resamples - 1));
  }
  return report;
}

FormulaReport extended_generic(const ExtendedFunctional& f,
                               const PathBundle& xi,
                               const CoefficientModel& xim,
                               const PathBundle& xp,
                               const CoefficientModel& xm,
                               const BootstrapSpec& bs, int n_threads) {
  const int nt = xi.grid.n_steps + 1;
  const int n_steps = xi.grid.n_steps;
  const int d = f.dim;
  const int d1x = xi.noise_dim;
  const std::size_t nx = xp.n_paths;
  const std::size_t nxi = xi.n_paths;
  const double dt = xi.grid.dt();
  (void)n_threads;
  if (static_cast<double>(nxi) * nx * nt > 5e8) {
    throw CapacityError(
        "verify_extended: nested Monte Carlo too large without a "
        "sufficient-statistic form");
  }

  // Per xi-path, per-time term values cached for the xi-block bootstrap.
  // Layout: [p][i][0..6] = lhs diff, time, space drift, space diff, tilde
  // drift, tilde diff (left-endpoint integrands), martingale level.
  std::vector<double> cache(nxi * static_cast<std::size_t>(nt) * 7, 0.0);

  std::vector<double> bq_all(nx * d), aq_all(nx * d * d);
  std::vector<double> gx(d), hx(static_cast<std::size_t>(d) * d),
      sig(static_cast<std::size_t>(d) * std::max(d1x, xp.noise_dim)),
      dw(d1x), eta(d), gga(static_cast<std::size_t>(d) * d), gr(d),
      hs(static_cast<std::size_t>(d) * d);
  std::vector<double> u0(nxi, 0.0), mart(nxi, 0.0);
  double sup = 0.0;
  for (int i = 0; i < nt; ++i) {
    const bool left = i < n_steps;
    const double t = xi.grid.time(i);
    const EmpiricalMeasure mu = marginal(xp, i);
    if (left) {
      for (std::size_t q = 0; q < nx; ++q) {
        coeffs_at(xp, xm, q, i, bq_all.data() + q * d, aq_all.data() + q * d * d,
                  sig.data());
      }
    }
    for (std::size_t p = 0; p < nxi; ++p) {
      double* row = cache.data() + (p * nt + i) * 7;
      const double* x = xi.state(i, p);
      const double ui = f.value(t, x, mu);
      if (i == 0) u0[p] = ui;
      row[0] = ui - u0[p];
      row[6] = mart[p];
      if (!left) continue;
      row[1] = f.time_deriv(t, x, mu);
      f.space_grad(t, x, mu, gx.data());
      f.space_hess(t, x, mu, hx.data());
      const std::size_t at = (static_cast<std::size_t>(i) * nxi + p);
      (void)at;
      xi.drift_value(xim, p, i, eta.data());
      xi.diffusion_value(xim, p, i, sig.data());
      gram(sig.data(), d, d1x, gga.data());
      row[2] = dot(gx.data(), eta.data(), d);
      row[3] = 0.5 * mat_dot(hx.data(), gga.data(), d);
      auto deriv = f.prepare(t, x, mu);
      std::vector<double> tdp(nx), tfp(nx);
      for (std::size_t q = 0; q < nx; ++q) {
        const double* y = xp.state(i, q);
        deriv->grad(y, gr.data());
        tdp[q] = dot(gr.data(), bq_all.data() + q * d, d);
        deriv->hess(y, hs.data());
        tfp[q] = 0.5 * mat_dot(hs.data(), aq_all.data() + q * d * d, d);
      }
      row[4] = pairwise_sum(tdp) / nx;
      row[5] = pairwise_sum(tfp) / nx;
      xi.increment(p, i, dw.data());
      mat_vec(sig.data(), dw.data(), d, d1x, gr.data());
      mart[p] += dot(gx.data(), gr.data(), d);
    }
  }
  // Per-path residual sup from the cache.
  for (std::size_t p = 0; p < nxi; ++p) {
    double rhs_cum = 0.0;
    for (int i = 0; i < nt; ++i) {
      const double* row = cache.data() + (p * nt + i) * 7;
      sup = std::max(sup, std::abs(row[0] - rhs_cum - row[6]));
      if (i < n_steps) {
        rhs_cum += dt * (row[1] + row[2] + row[3] + row[4] + row[5]);
      }
    }
  }

  const Blocks xiblocks = make_blocks(nxi, bs.n_blocks);
  auto series = [&](const std::vector<double>* mult, double wxi,
                    FormulaReport* full, double* residual_out,
                    double* mart_mean_out) {
    std::vector<double> acc(static_cast<std::size_t>(nt) * 7, 0.0);
    for (std::size_t p = 0; p < nxi; ++p) {
      const double cw =
          mult ? (*mult)[p / xiblocks.block_size] / wxi : 1.0 / nxi;
      if (cw == 0.0) continue;
      for (int i = 0; i < nt; ++i) {
        const double* row = cache.data() + (p * nt + i) * 7;
        double* a = acc.data() + static_cast<std::size_t>(i) * 7;
        for (int c = 0; c < 7; ++c) a[c] += cw * row[c];
      }
    }
    double cums[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < nt; ++i) {
      const double* a = acc.data() + static_cast<std::size_t>(i) * 7;
      double rhs = a[6];
      for (double cv : cums) rhs += cv;
      const double res = a[0] - rhs;
      residual_out[i] = res;
      if (full) {
        check_term(a[0], "lhs", i);
        full->lhs[i] = a[0];
        full->time_term[i] = cums[0];
        full->space_drift_term[i] = cums[1];
        full->space_diffusion_term[i] = cums[2];
        full->drift_term[i] = cums[3];
        full->diffusion_term[i] = cums[4];
        full->martingale_term[i] = a[6];
        full->residual[i] = res;
      }
      if (i < n_steps) {
        for (int c = 0; c < 5; ++c) {
          check_term(a[1 + c], "extended term", i);
          cums[c] += dt * a[1 + c];
        }
      }
    }
    residual_out[0] = 0.0;
    if (full) full->residual[0] = 0.0;
    if (mart_mean_out) *mart_mean_out = acc[(nt - 1) * 7 + 6];
  };

  FormulaReport report;
  report.scenario = "extended";
  report.functional_name = f.name;
  report.times.resize(nt);
  for (int i = 0; i < nt; ++i) report.times[i] = xi.grid.time(i);
  report.lhs.assign(nt, 0.0);
  report.time_term.assign(nt, 0.0);
  report.space_drift_term.assign(nt, 0.0);
  report.space_diffusion_term.assign(nt, 0.0);
  report.drift_term.assign(nt, 0.0);
  report.diffusion_term.assign(nt, 0.0);
  report.martingale_term.assign(nt, 0.0);
  report.residual.assign(nt, 0.0);
  std::vector<double> res_buf(nt);
  double mart_mean = 0.0;
  series(nullptr, 0.0, &report, res_buf.data(), &mart_mean);
  report.martingale_mean = mart_mean;
  report.per_path_residual_sup = sup;

  // Bootstrap over the xi ensemble only; without a sufficient-statistic
  // form the x-ensemble contribution to the SE is not resampled.
  report.n_resamples = bs.n_resamples;
  std::vector<double> boot(static_cast<std::size_t>(std::max(bs.n_resamples, 0)) * nt);
  std::vector<double> mart_boot(std::max(bs.n_resamples, 0));
  std::vector<double> mult;
  for (int r = 0; r < bs.n_resamples; ++r) {
    double wxi = 0.0;
    draw_multiplicities(xi.seed, r, xiblocks, &mult, &wxi);
    series(&mult, wxi, nullptr,
           boot.data() + static_cast<std::size_t>(r) * nt, &mart_boot[r]);
  }
  stderr_from_resamples(boot, nt, bs.n_resamples, &report.mc_stderr);
  if (bs.n_resamples >= 2) {
    double mean = 0.0;
    for (double v : mart_boot) mean += v;
    mean /= bs.n_resamples;
    double var = 0.0;
    for (double v : mart_boot) var += (v - mean) * (v - mean);
    report.martingale_mean_se = std::sqrt(var / (bs.n_resamples - 1));
  }
  return report;
}

}  // namespace

FormulaReport verify_extended(const ExtendedFunctional& f,
                              const PathBundle& xi_paths,
                              const CoefficientModel& xi_model,
                              const PathBundle& x_paths,
                              const CoefficientModel& x_model,
                              const BootstrapSpec& bootstrap, int n_threads) {
  if (f.dim != xi_paths.dim || f.dim != x_paths.dim) {
    throw std::invalid_argument("verify_extended: dimension mismatch");
  }
  if (!(xi_paths.grid == x_paths.grid)) {
    throw std::invalid_argument("verify_extended: time grid mismatch");
  }
  if (xi_paths.seed == x_paths.seed) {
    throw IndependenceError(
        "verify_extended: xi and x ensembles share a seed");
  }
  if (f.stats) {
    return extended_stats(f, xi_paths, xi_model, x_paths, x_model, bootstrap,
                          n_threads);
  }
  return extended_generic(f, xi_paths, xi_model, x_paths, x_model, bootstrap,
                          n_threads);
}

ConvergenceTable convergence_study(const MeasureFunctional& f,
                                   const CoefficientModel& model,
                                   const InitialLaw& init, double horizon,
                                   const std::vector<int>& n_steps_list,
                                   const std::vector<std::size_t>& n_paths_list,
                                   std::uint64_t seed, int replicates,
                                   int n_threads) {
  if (n_steps_list.empty() || n_paths_list.empty()) {
    throw std::invalid_argument("convergence_study: empty cell lists");
  }
  for (std::size_t i = 1; i < n_steps_list.size(); ++i) {
    if (n_steps_list[i] <= n_steps_list[i - 1]) {
      throw std::invalid_argument(
          "convergence_study: n_steps must increase (dt decreasing)");
    }
  }
  for (std::size_t i = 1; i < n_paths_list.size(); ++i) {
    if (n_paths_list[i] <= n_paths_list[i - 1]) {
      throw std::invalid_argument("convergence_study: n_paths must increase");
    }
  }
  ConvergenceTable table;
  table.n_steps_list = n_steps_list;
  table.n_paths_list = n_paths_list;
  table.max_residual.assign(n_steps_list.size(),
                            std::vector<double>(n_paths_list.size(), 0.0));
  const BootstrapSpec no_boot{0, 1};
  for (std::size_t si = 0; si < n_steps_list.size(); ++si) {
    for (std::size_t pi = 0; pi < n_paths_list.size(); ++pi) {
      double acc = 0.0;
      for (int rep = 0; rep < replicates; ++rep) {
        const TimeGrid grid{horizon, n_steps_list[si]};
        const PathBundle paths =
            simulate_paths(model, grid, n_paths_list[pi], init,
                           seed + 7919ull * rep, n_threads);
        acc += verify_measure_flow(f, paths, model, no_boot, n_threads)
                   .max_abs_residual();
      }
      table.max_residual[si][pi] = acc / replicates;
    }
  }
  // Slope in dt at the largest path count.
  if (n_steps_list.size() >= 2) {
    std::vector<double> lx, ly;
    for (std::size_t si = 0; si < n_steps_list.size(); ++si) {
      lx.push_back(std::log(horizon / n_steps_list[si]));
      ly.push_back(std::log(
          std::max(table.max_residual[si].back(), 1e-300)));
    }
    table.slope_dt = fit_slope(lx, ly);
  }
  // Slope in n_paths at the finest grid.
  if (n_paths_list.size() >= 2) {
    std::vector<double> lx, ly;
    for (std::size_t pi = 0; pi < n_paths_list.size(); ++pi) {
      lx.push_back(std::log(static_cast<double>(n_paths_list[pi])));
      ly.push_back(std::log(
          std::max(table.max_residual.back()[pi], 1e-300)));
    }
    table.slope_n_paths = fit_slope(lx, ly);
  }
  return table;
}

}  // namespace itoflow
