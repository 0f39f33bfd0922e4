#include "rtpref/drift.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rtpref/errors.hpp"

namespace rtpref {

namespace {

void check_observations(const Dataset& data) {
  data.check();
  if (data.size() == 0)
    throw std::invalid_argument("estimators need at least one observation");
  for (double t : data.time)
    if (!(t > 0.0) || !std::isfinite(t))
      throw std::invalid_argument(
          "response times must be positive and finite");
}

void check_feature_input(const Dataset& data) {
  if (!data.has_features())
    throw std::invalid_argument("this estimator needs feature vectors");
  if (data.size() < data.dim)
    throw std::invalid_argument(
        "need at least as many observations as feature dimensions");
}

// Solves A x = rhs for symmetric positive definite A (row-major, clobbered)
// by an in-place Cholesky factorization.  The pivot tolerance is relative to
// the largest diagonal entry, so an exactly rank-deficient matrix fails even
// after rounding noise nudges its pivot slightly positive.
std::vector<double> spd_solve(std::vector<double> a, std::vector<double> rhs,
                              std::size_t d) {
  double diag_max = 0.0;
  for (std::size_t j = 0; j < d; ++j)
    diag_max = std::max(diag_max, std::abs(a[j * d + j]));
  const double tol = 64.0 * 2.220446049250313e-16 * diag_max;
  for (std::size_t j = 0; j < d; ++j) {
    double piv = a[j * d + j];
    for (std::size_t k = 0; k < j; ++k) piv -= a[j * d + k] * a[j * d + k];
    if (!(piv > tol)) {
      char msg[128];
      std::snprintf(msg, sizeof msg,
                    "normal equations lost positive definiteness at "
                    "dimension %zu",
                    j);
      throw SingularMatrixError(msg, static_cast<int>(j));
    }
    a[j * d + j] = std::sqrt(piv);
    for (std::size_t i = j + 1; i < d; ++i) {
      double x = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) x -= a[i * d + k] * a[j * d + k];
      a[i * d + j] = x / a[j * d + j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    double y = rhs[i];
    for (std::size_t k = 0; k < i; ++k) y -= a[i * d + k] * rhs[k];
    rhs[i] = y / a[i * d + i];
  }
  for (std::size_t i = d; i-- > 0;) {
    double y = rhs[i];
    for (std::size_t k = i + 1; k < d; ++k) y -= a[k * d + i] * rhs[k];
    rhs[i] = y / a[i * d + i];
  }
  return rhs;
}

// log(1 + exp(-u)) without overflow on either side.
double softplus_neg(double u) {
  if (u >= 0.0) return std::log1p(std::exp(-u));
  return -u + std::log1p(std::exp(u));
}

// sigma(-u) = 1 / (1 + exp(u)) without overflow.
double sigmoid_neg(double u) {
  if (u >= 0.0) {
    const double e = std::exp(-u);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(u));
}

}  // namespace

double EstimationReport::scalar() const {
  if (estimate.size() != 1)
    throw std::logic_error("scalar() called on a vector-valued report");
  return estimate[0];
}

EstimationReport plugin_mu(const Dataset& data, double boundary,
                           Truncation trunc, kernels::Exec exec) {
  check_observations(data);
  const WeightFn w{Boundary{boundary}, trunc};
  const double sum = kernels::chunked_sum(data.size(), exec, [&](std::size_t i) {
    return data.choice[i] * w(data.time[i]);
  });
  EstimationReport report;
  report.estimate = {sum / static_cast<double>(data.size())};
  report.boundary_used = boundary;
  report.n_used = data.size();
  report.method = "plugin_mu";
  return report;
}

EstimationReport plugin_mu(const Dataset& data,
                           const BoundaryEstimate& boundary, Truncation trunc,
                           kernels::Exec exec) {
  EstimationReport report = plugin_mu(data, boundary.boundary, trunc, exec);
  report.warnings.insert(report.warnings.end(), boundary.warnings.begin(),
                         boundary.warnings.end());
  return report;
}

EstimationReport plugin_mu_ndt(const Dataset& data, double boundary,
                               double ndt, double epsilon, Truncation trunc,
                               kernels::Exec exec) {
  check_observations(data);
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("trimming epsilon must be positive");
  if (!std::isfinite(ndt))
    throw std::invalid_argument("non-decision time must be finite");
  EstimationReport report;
  if (ndt < 0.0) {
    char msg[96];
    std::snprintf(msg, sizeof msg,
                  "negative non-decision time %.6g clamped to 0", ndt);
    report.warnings.push_back(msg);
    ndt = 0.0;
  }
  const WeightFn w{Boundary{boundary}, trunc};
  double acc[2];
  kernels::chunked_sum_vec(
      data.size(), 2, exec, acc, [&](std::size_t i, double* out) {
        const double t = data.time[i] - ndt;
        if (t >= epsilon) {
          out[0] = data.choice[i] * w(t);
          out[1] = 0.0;
        } else {
          out[0] = 0.0;
          out[1] = 1.0;
        }
      });
  report.estimate = {acc[0] / static_cast<double>(data.size())};
  report.boundary_used = boundary;
  report.ndt_used = ndt;
  report.n_used = data.size();
  report.n_trimmed = static_cast<std::size_t>(acc[1]);
  report.method = "plugin_mu_ndt";
  if (report.n_trimmed == data.size()) {
    report.estimate[0] = 0.0;
    report.warnings.push_back(
        "every observation fell inside the trimming margin; estimate set "
        "to 0");
  }
  return report;
}

EstimationReport plugin_mu_ndt(const Dataset& data,
                               const BoundaryEstimate& boundary,
                               double epsilon, Truncation trunc,
                               kernels::Exec exec) {
  EstimationReport report =
      plugin_mu_ndt(data, boundary.boundary, boundary.ndt.value_or(0.0),
                    epsilon, trunc, exec);
  report.warnings.insert(report.warnings.end(), boundary.warnings.begin(),
                         boundary.warnings.end());
  return report;
}

EstimationReport ols_theta(const Dataset& data, double boundary,
                           Truncation trunc, double ridge,
                           kernels::Exec exec) {
  check_observations(data);
  check_feature_input(data);
  if (!(ridge >= 0.0) || !std::isfinite(ridge))
    throw std::invalid_argument("ridge must be nonnegative and finite");
  const WeightFn w{Boundary{boundary}, trunc};
  const std::size_t d = data.dim;
  // acc layout: m-hat (d entries), then the upper triangle of Q row by row.
  const std::size_t m_acc = d + d * (d + 1) / 2;
  std::vector<double> acc(m_acc);
  kernels::chunked_sum_vec(
      data.size(), m_acc, exec, acc.data(), [&](std::size_t i, double* out) {
        const auto psi = data.psi(i);
        const double zw = data.choice[i] * w(data.time[i]);
        for (std::size_t j = 0; j < d; ++j) out[j] = zw * psi[j];
        std::size_t pos = d;
        for (std::size_t j = 0; j < d; ++j)
          for (std::size_t k = j; k < d; ++k) out[pos++] = psi[j] * psi[k];
      });
  const double n = static_cast<double>(data.size());
  std::vector<double> q(d * d);
  std::vector<double> rhs(d);
  for (std::size_t j = 0; j < d; ++j) rhs[j] = acc[j] / n;
  std::size_t pos = d;
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = j; k < d; ++k) {
      const double value = acc[pos++] / n;
      q[j * d + k] = value;
      q[k * d + j] = value;
    }
  for (std::size_t j = 0; j < d; ++j) q[j * d + j] += ridge;

  EstimationReport report;
  report.estimate = spd_solve(std::move(q), std::move(rhs), d);
  report.boundary_used = boundary;
  report.n_used = data.size();
  report.method = "ols_theta";
  return report;
}

EstimationReport ols_theta(const Dataset& data,
                           const BoundaryEstimate& boundary, Truncation trunc,
                           double ridge, kernels::Exec exec) {
  EstimationReport report =
      ols_theta(data, boundary.boundary, trunc, ridge, exec);
  report.warnings.insert(report.warnings.end(), boundary.warnings.begin(),
                         boundary.warnings.end());
  return report;
}

EstimationReport bt_tabular(const Dataset& data,
                            double calibration_boundary) {
  check_observations(data);
  Boundary calibration{calibration_boundary};
  double sum = 0.0;
  for (std::int8_t z : data.choice) sum += z;
  const double mean = sum / static_cast<double>(data.size());
  if (std::abs(mean) >= 1.0)
    throw SeparationError(
        "every choice points the same way; arctanh(mean choice) diverges");
  EstimationReport report;
  report.estimate = {std::atanh(mean) / calibration.value};
  report.boundary_used = calibration.value;
  report.n_used = data.size();
  report.method = "bt_tabular";
  return report;
}

EstimationReport bt_logistic(const Dataset& data, double calibration_boundary,
                             double l2_penalty, kernels::Exec exec) {
  check_observations(data);
  check_feature_input(data);
  if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty))
    throw std::invalid_argument("l2 penalty must be nonnegative and finite");
  const Boundary calibration{calibration_boundary};
  const double two_b = 2.0 * calibration.value;
  const std::size_t d = data.dim;
  const double n = static_cast<double>(data.size());

  // acc layout: [loss, gradient (d), Hessian upper triangle, nonpositive
  // margin count].  One fused pass per Newton iteration.
  const std::size_t m_acc = 1 + d + d * (d + 1) / 2 + 1;
  std::vector<double> theta(d, 0.0);
  std::vector<double> acc(m_acc);
  std::vector<double> grad(d);
  std::vector<double> hess(d * d);

  const auto evaluate = [&](const std::vector<double>& point) {
    kernels::chunked_sum_vec(
        data.size(), m_acc, exec, acc.data(),
        [&](std::size_t i, double* out) {
          const auto psi = data.psi(i);
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += psi[j] * point[j];
          const double margin = data.choice[i] * dot;
          const double u = two_b * margin;
          out[0] = softplus_neg(u);
          const double sn = sigmoid_neg(u);
          const double gscale = -two_b * data.choice[i] * sn;
          const double hscale = two_b * two_b * sn * (1.0 - sn);
          for (std::size_t j = 0; j < d; ++j) out[1 + j] = gscale * psi[j];
          std::size_t pos = 1 + d;
          for (std::size_t j = 0; j < d; ++j)
            for (std::size_t k = j; k < d; ++k)
              out[pos++] = hscale * psi[j] * psi[k];
          out[m_acc - 1] = margin <= 0.0 ? 1.0 : 0.0;
        });
    double loss = acc[0] / n;
    for (std::size_t j = 0; j < d; ++j)
      loss += 0.5 * l2_penalty * point[j] * point[j];
    return loss;
  };

  const auto throw_if_separated = [&]() {
    if (l2_penalty == 0.0 && acc[m_acc - 1] == 0.0)
      throw SeparationError(
          "unpenalized logistic fit found a direction separating the "
          "choices; no finite minimizer exists");
  };

  double loss = evaluate(theta);
  const int max_iter = 500;
  double grad_norm = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    grad_norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      grad[j] = acc[1 + j] / n + l2_penalty * theta[j];
      grad_norm += grad[j] * grad[j];
    }
    grad_norm = std::sqrt(grad_norm);
    if (grad_norm <= 1e-8) {
      throw_if_separated();
      EstimationReport report;
      report.estimate = theta;
      report.boundary_used = calibration.value;
      report.n_used = data.size();
      report.method = "bt_logistic";
      return report;
    }
    std::size_t pos = 1 + d;
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = j; k < d; ++k) {
        const double value = acc[pos++] / n;
        hess[j * d + k] = value;
        hess[k * d + j] = value;
      }
    for (std::size_t j = 0; j < d; ++j) hess[j * d + j] += l2_penalty;

    std::vector<double> rhs(d);
    for (std::size_t j = 0; j < d; ++j) rhs[j] = -grad[j];
    const std::vector<double> step = spd_solve(hess, std::move(rhs), d);
    double slope = 0.0;
    for (std::size_t j = 0; j < d; ++j) slope += grad[j] * step[j];

    double scale = 1.0;
    std::vector<double> candidate(d);
    bool moved = false;
    while (scale >= 1e-12) {
      for (std::size_t j = 0; j < d; ++j)
        candidate[j] = theta[j] + scale * step[j];
      const double next = evaluate(candidate);
      if (next <= loss + 1e-4 * scale * slope) {
        theta = candidate;
        loss = next;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) {
      evaluate(theta);
      throw_if_separated();
      char msg[96];
      std::snprintf(msg, sizeof msg,
                    "logistic solver stalled at gradient norm %.3e",
                    grad_norm);
      throw ConvergenceError(msg, grad_norm);
    }
  }
  throw_if_separated();
  char msg[96];
  std::snprintf(msg, sizeof msg,
                "logistic solver hit the iteration cap at gradient norm %.3e",
                grad_norm);
  throw ConvergenceError(msg, grad_norm);
}

}  // namespace rtpref
