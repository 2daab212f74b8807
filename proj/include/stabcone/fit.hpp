// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "stabcone/common.hpp"
#include "stabcone/dataset.hpp"
#include "stabcone/soc.hpp"

namespace stabcone {

struct FitOptions {
  int cone_rows = -1;          // -1: one row per variable
  std::uint64_t seed = 0;
  long max_iterations = 2500;  // descent iterations per penalty round
  double mu_initial = 1.0;
  double mu_growth = 10.0;
  double mu_cap = 1e12;
  double epsilon_fit = 1e-6;   // working margin for the omega1 hinge
  double gradient_tol = 1e-14;
};

struct NuSchedule {
  double initial = std::numeric_limits<double>::quiet_NaN();  // NaN: 5% of the g interquartile range
  double growth = 1.5;
  double cap = std::numeric_limits<double>::quiet_NaN();      // NaN: initial * growth^19
};

namespace fitdetail {

// Flat parameter layout: [A row-major (j*p), b (j), c (p), d].
struct ConeView {
  int j;
  int p;

  Eigen::Map<const Eigen::MatrixXd> A(const Eigen::VectorXd& t) const {
    return {t.data(), j, p};
  }
  Eigen::Map<const Eigen::VectorXd> b(const Eigen::VectorXd& t) const {
    return {t.data() + j * p, j};
  }
  Eigen::Map<const Eigen::VectorXd> c(const Eigen::VectorXd& t) const {
    return {t.data() + j * p + j, p};
  }
  double d(const Eigen::VectorXd& t) const { return t(j * p + j + p); }
  int size() const { return j * p + j + p + 1; }
};

struct Groups {
  Eigen::MatrixXd u1;  // omega1 features (rows)
  Eigen::MatrixXd u2;  // omega2 features
  Eigen::VectorXd g2;  // omega2 targets
  Eigen::MatrixXd u3;  // omega3 features
};

inline Eigen::VectorXd surrogate_values(const ConeView& view, const Eigen::VectorXd& theta,
                                        const Eigen::MatrixXd& u) {
  const auto A = view.A(theta);
  const auto b = view.b(theta);
  const auto c = view.c(theta);
  Eigen::MatrixXd r = u * A.transpose();
  r.rowwise() += b.transpose();
  return (u * c).array() + view.d(theta) - r.rowwise().norm().array();
}

// Penalty-augmented loss. `w` below is dLoss/dg~ per sample; the cone-term
// chain rule uses rho = (A u + b)/|A u + b|.
inline double loss(const ConeView& view, const Eigen::VectorXd& theta, const Groups& gr,
                   double g_lim, double mu, double eps_fit, Eigen::VectorXd* grad) {
  double total = 0.0;
  if (grad != nullptr) grad->setZero(view.size());

  const auto accumulate = [&](const Eigen::MatrixXd& u, const Eigen::VectorXd& w) {
    if (grad == nullptr || u.rows() == 0) return;
    const auto A = view.A(theta);
    const auto b = view.b(theta);
    Eigen::MatrixXd r = u * A.transpose();
    r.rowwise() += b.transpose();
    Eigen::VectorXd nrm = r.rowwise().norm();
    for (Eigen::Index i = 0; i < nrm.size(); ++i) {
      if (nrm(i) < 1e-300) nrm(i) = 1.0;  // zero-norm kink: subgradient 0
    }
    const Eigen::MatrixXd rho = r.array().colwise() / nrm.array();
    const int j = view.j, p = view.p;
    Eigen::Map<Eigen::MatrixXd> gA(grad->data(), j, p);
    Eigen::Map<Eigen::VectorXd> gb(grad->data() + j * p, j);
    Eigen::Map<Eigen::VectorXd> gc(grad->data() + j * p + j, p);
    gA -= (rho.array().colwise() * w.array()).matrix().transpose() * u;
    gb -= rho.transpose() * w;
    gc += u.transpose() * w;
    (*grad)(j * p + j + p) += w.sum();
  };

  if (gr.u2.rows() > 0) {
    const Eigen::VectorXd gt = surrogate_values(view, theta, gr.u2);
    const Eigen::VectorXd res = gt - gr.g2;
    total += res.squaredNorm();
    accumulate(gr.u2, 2.0 * res);
  }
  if (gr.u1.rows() > 0) {
    const Eigen::VectorXd gt = surrogate_values(view, theta, gr.u1);
    const Eigen::VectorXd h = (gt.array() - (g_lim - eps_fit)).cwiseMax(0.0);
    total += mu * h.squaredNorm();
    accumulate(gr.u1, 2.0 * mu * h);
  }
  if (gr.u3.rows() > 0) {
    // aim eps_fit above the limit so the quadratic-penalty residual ~1/mu
    // still leaves these samples on the feasible side
    const Eigen::VectorXd gt = surrogate_values(view, theta, gr.u3);
    const Eigen::VectorXd h = ((g_lim + eps_fit) - gt.array()).cwiseMax(0.0);
    total += mu * h.squaredNorm();
    accumulate(gr.u3, -2.0 * mu * h);
  }
  return total;
}

// Gradient descent with Armijo backtracking; fully deterministic.
inline long descend(const ConeView& view, Eigen::VectorXd& theta, const Groups& gr, double g_lim,
                    double mu, double eps_fit, long max_iterations, double gradient_tol) {
  Eigen::VectorXd grad(view.size());
  double current = loss(view, theta, gr, g_lim, mu, eps_fit, &grad);
  double step = 1.0;
  long it = 0;
  for (; it < max_iterations; ++it) {
    const double gn2 = grad.squaredNorm();
    if (gn2 <= gradient_tol * (1.0 + current)) break;
    double t = step * 2.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    double cand_loss = 0.0;
    for (int back = 0; back < 60; ++back) {
      candidate = theta - t * grad;
      cand_loss = loss(view, candidate, gr, g_lim, mu, eps_fit, nullptr);
      if (cand_loss <= current - 1e-4 * t * gn2) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    theta = candidate;
    step = t;
    current = loss(view, theta, gr, g_lim, mu, eps_fit, &grad);
  }
  return it;
}

}  // namespace fitdetail

// ---------------------------------------------------------------------------
// Boundary-aware fit: least squares on the omega2 band under one-sided
// classification penalties on omega1/omega3, with geometric escalation of the
// penalty weight until both hinge sums vanish.
// ---------------------------------------------------------------------------

inline SocSurrogate fit_soc_boundary(const StabilityDataset& dataset, const FitOptions& options = {}) {
  const int p = static_cast<int>(dataset.variables.size());
  if (p == 0) throw DomainError("dataset has no variables");
  const int j = options.cone_rows > 0 ? options.cone_rows : p;
  const double g_lim = dataset.g_lim;

  // Standardize features over the full sample set; the cone parameters are
  // mapped back to raw coordinates at the end.
  const std::size_t n = dataset.samples.size();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(n), p);
  for (std::size_t i = 0; i < n; ++i) raw.row(static_cast<Eigen::Index>(i)) = dataset.samples[i].x;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  if (n > 0) mean = raw.colwise().mean().transpose();
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  if (n > 1) {
    for (int k = 0; k < p; ++k) {
      const double var = (raw.col(k).array() - mean(k)).square().sum() / static_cast<double>(n);
      scale(k) = std::sqrt(var);
      if (scale(k) < 1e-12) scale(k) = 1.0;
    }
  }

  fitdetail::Groups gr;
  {
    std::vector<Eigen::Index> i1, i2, i3;
    for (std::size_t i = 0; i < n; ++i) {
      switch (dataset.samples[i].label) {
        case OmegaLabel::omega1: i1.push_back(static_cast<Eigen::Index>(i)); break;
        case OmegaLabel::omega2: i2.push_back(static_cast<Eigen::Index>(i)); break;
        case OmegaLabel::omega3: i3.push_back(static_cast<Eigen::Index>(i)); break;
      }
    }
    const auto fill = [&](const std::vector<Eigen::Index>& idx, Eigen::MatrixXd& u) {
      u.resize(static_cast<Eigen::Index>(idx.size()), p);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        u.row(static_cast<Eigen::Index>(r)) =
            ((raw.row(idx[r]).transpose() - mean).array() / scale.array()).transpose();
      }
    };
    fill(i1, gr.u1);
    fill(i2, gr.u2);
    fill(i3, gr.u3);
    gr.g2.resize(static_cast<Eigen::Index>(i2.size()));
    for (std::size_t r = 0; r < i2.size(); ++r) gr.g2(static_cast<Eigen::Index>(r)) = dataset.samples[static_cast<std::size_t>(i2[r])].g;
  }

  fitdetail::ConeView view{j, p};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(view.size());
  {
    // identity-padded A with a tiny seeded jitter to break row symmetry
    Eigen::Map<Eigen::MatrixXd> A(theta.data(), j, p);
    for (int r = 0; r < j; ++r) A(r, r % p) = 1.0;
    SplitMix64 rng(options.seed);
    for (int r = 0; r < j; ++r) {
      for (int k = 0; k < p; ++k) A(r, k) += 1e-3 * rng.uniform(-1.0, 1.0);
    }
    // affine start: least squares of g + |A u + b| over the band samples
    if (gr.u2.rows() > 0) {
      Eigen::MatrixXd r = gr.u2 * A.transpose();
      r.rowwise() += Eigen::Map<Eigen::VectorXd>(theta.data() + j * p, j).transpose();
      const Eigen::VectorXd target = gr.g2 + r.rowwise().norm();
      Eigen::MatrixXd design(gr.u2.rows(), p + 1);
      design.leftCols(p) = gr.u2;
      design.col(p).setOnes();
      const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);
      Eigen::Map<Eigen::VectorXd>(theta.data() + j * p + j, p) = beta.head(p);
      theta(j * p + j + p) = beta(p);
    } else {
      // no band samples: start below the limit and let the penalties steer
      theta(j * p + j + p) = g_lim - 1.0;
    }
  }

  // The penalty residual of an active hinge shrinks like 1/mu but never
  // reaches zero, so "separated" means: the downward repair shift needed to
  // clear omega1 does not push any omega3 sample across the limit.
  long total_iterations = 0;
  double mu = options.mu_initial;
  bool separated = false;
  while (true) {
    total_iterations += fitdetail::descend(view, theta, gr, g_lim, mu, options.epsilon_fit,
                                           options.max_iterations, options.gradient_tol);
    double shift_needed = 0.0;
    if (gr.u1.rows() > 0) {
      shift_needed = std::max(0.0, fitdetail::surrogate_values(view, theta, gr.u1).maxCoeff() -
                                       (g_lim - kStrictMargin));
    }
    double omega3_margin = std::numeric_limits<double>::infinity();
    if (gr.u3.rows() > 0) {
      omega3_margin = fitdetail::surrogate_values(view, theta, gr.u3).minCoeff() - g_lim;
    }
    if (omega3_margin >= shift_needed) {
      separated = true;
      break;
    }
    mu *= options.mu_growth;
    if (mu > options.mu_cap) break;
  }
  if (!separated) {
    throw BandTooTightError("boundary fit for " + dataset.metric +
                            " could not separate omega1/omega3 at the penalty cap; widen nu");
  }

  // Map the standardized cone back to raw coordinates.
  SocSurrogate s;
  s.metric = dataset.metric;
  s.variables = dataset.variables;
  const Eigen::MatrixXd An = view.A(theta);
  const Eigen::VectorXd bn = view.b(theta);
  const Eigen::VectorXd cn = view.c(theta);
  s.A = An * scale.cwiseInverse().asDiagonal();
  s.b = bn - s.A * mean;
  s.c = cn.cwiseQuotient(scale);
  s.d = view.d(theta) - s.c.dot(mean);
  s.g_lim = g_lim;
  s.nu = dataset.nu;
  s.diagnostics.mu_final = mu;
  s.diagnostics.iterations = total_iterations;
  s.diagnostics.seed = options.seed;
  if (gr.u2.rows() > 0) {
    const Eigen::VectorXd gt = fitdetail::surrogate_values(view, theta, gr.u2);
    s.diagnostics.omega2_rms = std::sqrt((gt - gr.g2).squaredNorm() / gr.u2.rows());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Conservativeness repair: shift the affine offset down by the smallest
// amount that pushes every omega1 sample strictly below the limit, then make
// sure no omega3 sample crossed it on the way.
// ---------------------------------------------------------------------------

inline SocSurrogate repair_conservativeness(const SocSurrogate& fitted,
                                            const StabilityDataset& dataset) {
  SocSurrogate s = fitted;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& sample : dataset.samples) {
    if (sample.label != OmegaLabel::omega1) continue;
    worst = std::max(worst, s.evaluate(sample.x) - (s.g_lim - kStrictMargin));
  }
  const double shift = std::max(0.0, std::isfinite(worst) ? worst : 0.0);
  s.d -= shift;
  s.diagnostics.repair_shift += shift;
  for (const auto& sample : dataset.samples) {
    if (sample.label != OmegaLabel::omega3) continue;
    if (s.evaluate(sample.x) < s.g_lim) {
      throw RepairConflictError("repair of " + s.metric +
                                " pushed an omega3 sample infeasible; widen nu");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Read-only verification.
// ---------------------------------------------------------------------------

struct MarginHistogram {
  // fixed signed-margin bin edges, shared by every report
  static const std::vector<double>& edges() {
    static const std::vector<double> e = {-10.0, -1.0, -0.1, -0.01, -1e-4, 0.0,
                                          1e-4,  0.01, 0.1,  1.0,   10.0};
    return e;
  }
  std::vector<std::size_t> counts;  // edges.size() + 1 buckets
};

struct VerificationReport {
  DatasetCounts counts;
  std::size_t misclassified_omega1 = 0;  // omega1 samples the surrogate accepts
  std::size_t misclassified_omega2 = 0;  // omega2 samples on the wrong side of the true value
  std::size_t misclassified_omega3 = 0;  // omega3 samples the surrogate rejects
  double omega2_rms = std::numeric_limits<double>::quiet_NaN();
  MarginHistogram histogram;
  bool conservative = true;  // zero omega1 and omega3 misclassifications
  bool limit_mismatch = false;

  bool empty() const { return counts.total() == 0; }
};

inline VerificationReport verify(const SocSurrogate& s, const StabilityDataset& dataset) {
  VerificationReport rep;
  rep.counts = dataset.counts();
  rep.limit_mismatch = dataset.g_lim != s.g_lim;
  rep.histogram.counts.assign(MarginHistogram::edges().size() + 1, 0);
  if (dataset.samples.empty()) return rep;

  double sq = 0.0;
  std::size_t n2 = 0;
  for (const auto& sample : dataset.samples) {
    const double value = s.evaluate(sample.x);
    const bool accepted = value >= s.g_lim;
    const double margin = value - s.g_lim;
    const auto& edges = MarginHistogram::edges();
    std::size_t bucket = edges.size();
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (margin < edges[e]) {
        bucket = e;
        break;
      }
    }
    ++rep.histogram.counts[bucket];
    switch (sample.label) {
      case OmegaLabel::omega1:
        if (accepted) ++rep.misclassified_omega1;
        break;
      case OmegaLabel::omega2: {
        const bool truly_feasible = sample.g >= s.g_lim;
        if (accepted != truly_feasible) ++rep.misclassified_omega2;
        if (std::isfinite(sample.g)) {
          sq += (value - sample.g) * (value - sample.g);
          ++n2;
        }
        break;
      }
      case OmegaLabel::omega3:
        if (!accepted) ++rep.misclassified_omega3;
        break;
    }
  }
  if (n2 > 0) rep.omega2_rms = std::sqrt(sq / static_cast<double>(n2));
  rep.conservative = rep.misclassified_omega1 == 0 && rep.misclassified_omega3 == 0;
  return rep;
}

// ---------------------------------------------------------------------------
// Band tuning: repartition / fit / repair, widening nu geometrically until
// the pair succeeds.
// ---------------------------------------------------------------------------

struct TunedFit {
  SocSurrogate surrogate;
  double nu = 0.0;
  int attempts = 0;
};

inline double default_initial_nu(const StabilityDataset& dataset) {
  std::vector<double> values;
  values.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    if (std::isfinite(s.g)) values.push_back(s.g);
  }
  if (values.empty()) return 1e-3;
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  double spread = quantile(0.75) - quantile(0.25);
  if (spread <= 0.0) spread = values.back() - values.front();
  if (spread <= 0.0) return 1e-3;
  return 0.05 * spread;
}

inline TunedFit tune_nu(const StabilityDataset& dataset, const NuSchedule& schedule = {},
                        const FitOptions& options = {}) {
  if (!(schedule.growth > 1.0)) throw DomainError("nu growth factor must exceed 1");
  double nu = std::isnan(schedule.initial) ? default_initial_nu(dataset) : schedule.initial;
  if (!(nu > 0.0)) throw DomainError("initial nu must be positive");
  const double cap = std::isnan(schedule.cap) ? nu * std::pow(schedule.growth, 19) : schedule.cap;

  StabilityDataset work = dataset;
  int attempts = 0;
  std::string last_failure = "band never contained a sample";
  while (nu <= cap * (1.0 + 1e-12)) {
    ++attempts;
    partition(work, work.g_lim, nu);
    const auto c = work.counts();
    if (c.omega2 == 0) {
      last_failure = "omega2 empty at nu=" + format_double(nu);
      nu *= schedule.growth;
      continue;
    }
    try {
      SocSurrogate fitted = fit_soc_boundary(work, options);
      SocSurrogate repaired = repair_conservativeness(fitted, work);
      const auto rep = verify(repaired, work);
      repaired.diagnostics.count_omega1 = rep.counts.omega1;
      repaired.diagnostics.count_omega2 = rep.counts.omega2;
      repaired.diagnostics.count_omega3 = rep.counts.omega3;
      repaired.diagnostics.misclassified_omega1 = rep.misclassified_omega1;
      repaired.diagnostics.misclassified_omega2 = rep.misclassified_omega2;
      repaired.diagnostics.misclassified_omega3 = rep.misclassified_omega3;
      repaired.diagnostics.omega2_rms = rep.omega2_rms;
      repaired.diagnostics.nu_attempts = attempts;
      repaired.nu = nu;
      return TunedFit{std::move(repaired), nu, attempts};
    } catch (const BandTooTightError& e) {
      last_failure = e.what();
    } catch (const RepairConflictError& e) {
      last_failure = e.what();
    }
    nu *= schedule.growth;
  }
  throw UnfittableMetricError("metric " + dataset.metric + " unfittable after " +
                              std::to_string(attempts) + " band widenings (" + last_failure + ")");
}

}  // namespace stabcone
