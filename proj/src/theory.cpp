#include "slad/theory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "slad/error.hpp"
#include "slad/nn.hpp"
#include "slad/rng.hpp"

namespace slad::theory {

void SubspaceUsefulnessQuery::validate() const {
  if (features < 1 || effective < 1 || effective > features) {
    throw InvalidInput("usefulness query needs 1 <= G <= F");
  }
  if (min_effective < 1 || min_effective > effective) {
    throw InvalidInput("usefulness query needs 1 <= q <= G");
  }
}

SubspaceUsefulnessQuery SubspaceUsefulnessQuery::from_ratios(std::size_t features, double alpha, double beta) {
  if (!(alpha > 0.0 && alpha <= 1.0) || !(beta > 0.0 && beta <= 1.0)) {
    throw InvalidInput("alpha and beta must lie in (0, 1]");
  }
  const auto g = static_cast<std::size_t>(std::floor(beta * static_cast<double>(features) + 0.5));
  const auto q = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(g) - 1e-12));
  return {features, g, std::max<std::size_t>(q, 1)};
}

double pr_subspace_useful(const SubspaceUsefulnessQuery& query) {
  query.validate();
  const std::size_t f = query.features;
  if (f > kMaxClosedFormFeatures) {
    throw RangeError("closed form limited to F <= " + std::to_string(kMaxClosedFormFeatures));
  }
  const std::size_t q = query.min_effective;
  const double beta = query.beta();
  if (beta >= 1.0) {
    // every draw is effective: useful iff the cardinality reaches q
    return static_cast<double>(f - q + 1) / static_cast<double>(f);
  }
  const double log_b = std::log(beta);
  const double log_1b = std::log1p(-beta);
  double total = 0.0;
  for (std::size_t j = q; j <= f; ++j) {
    const double lj = std::lgamma(static_cast<double>(j) + 1.0);
    double tail = 0.0;
    for (std::size_t k = q; k <= j; ++k) {
      const double log_term = lj - std::lgamma(static_cast<double>(k) + 1.0) -
                              std::lgamma(static_cast<double>(j - k) + 1.0) +
                              static_cast<double>(k) * log_b + static_cast<double>(j - k) * log_1b;
      tail += std::exp(log_term);
    }
    total += std::min(tail, 1.0);
  }
  return std::clamp(total / static_cast<double>(f), 0.0, 1.0);
}

Estimate pr_subspace_useful_mc(const SubspaceUsefulnessQuery& query, std::size_t trials, Rng& rng,
                               SamplingRegime regime) {
  query.validate();
  if (trials == 0) throw InvalidInput("Monte-Carlo estimate needs at least one trial");
  const std::size_t f = query.features;
  const std::size_t g = query.effective;
  const std::size_t q = query.min_effective;
  const double beta = query.beta();
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(1, f));
    if (j < q) continue;
    std::size_t found = 0;
    if (regime == SamplingRegime::with_replacement) {
      for (std::size_t d = 0; d < j && found < q; ++d) found += rng.bernoulli(beta) ? 1 : 0;
    } else {
      std::size_t left_eff = g;
      std::size_t left = f;
      for (std::size_t d = 0; d < j && found < q; ++d, --left) {
        if (rng.uniform() * static_cast<double>(left) < static_cast<double>(left_eff)) {
          ++found;
          --left_eff;
        }
      }
    }
    if (found >= q) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(trials);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials))};
}

double theorem2_bound(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
  return 1.0 - alpha;
}

UsefulU pr_U_useful(std::size_t c, double alpha) {
  if (c < 1) throw InvalidInput("c must be at least 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
  UsefulU out;
  const double success = 1.0 - alpha;
  for (std::size_t k = 1; k <= c; ++k) {
    const double log_choose = std::lgamma(static_cast<double>(c) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                              std::lgamma(static_cast<double>(c - k) + 1.0);
    out.sum_form += std::exp(log_choose) * std::pow(success, static_cast<double>(k)) *
                    std::pow(alpha, static_cast<double>(c - k));
  }
  out.closed_form = 1.0 - std::pow(alpha, static_cast<double>(c));
  if (std::abs(out.sum_form - out.closed_form) > 1e-12) {
    throw std::logic_error("binomial sum and closed form of Pr(U useful) disagree");
  }
  return out;
}

std::vector<CurvePoint> prob_curve(double alpha, double beta, std::size_t max_features) {
  if (max_features < 1 || max_features > 400) throw InvalidInput("max features must lie in [1, 400]");
  if (!(alpha > 0.0 && alpha <= 1.0) || !(beta > 0.0 && beta <= 1.0)) {
    throw InvalidInput("alpha and beta must lie in (0, 1]");
  }
  std::vector<CurvePoint> curve;
  for (std::size_t f = 1; f <= max_features; ++f) {
    const auto q = SubspaceUsefulnessQuery::from_ratios(f, alpha, beta);
    if (q.effective < 1) continue;
    const double g_exact = beta * static_cast<double>(f);
    const double q_exact = alpha * static_cast<double>(q.effective);
    const bool exact = std::abs(g_exact - static_cast<double>(q.effective)) < 1e-9 &&
                       std::abs(q_exact - static_cast<double>(q.min_effective)) < 1e-9;
    curve.push_back({f, q.effective, q.min_effective, pr_subspace_useful(q), q.alpha(), exact});
  }
  return curve;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve, double alpha, double beta) {
  std::ostringstream out;
  out.precision(12);
  out << "alpha,beta,F,G,q,effective_alpha,exact,probability,bound\n";
  for (const auto& p : curve) {
    out << alpha << ',' << beta << ',' << p.features << ',' << p.effective << ',' << p.min_effective << ','
        << p.effective_alpha << ',' << (p.exact ? 1 : 0) << ',' << p.probability << ',' << 1.0 - alpha << '\n';
  }
  return out.str();
}

void InlierPriorityConfig::validate() const {
  if (penultimate_units < 1 || classes < 1 || n_inlier < 1 || n_anomaly < 1 || trials < 1 || input_dim < 1) {
    throw InvalidInput("inlier-priority counts must all be at least 1");
  }
  if (n_inlier < n_anomaly) throw InvalidInput("inlier-priority needs n_inlier >= n_anomaly");
  if (!(input_scale > 0.0)) throw InvalidInput("input scale must be positive");
}

namespace {

struct Network {
  std::vector<double> hidden;  // input_dim x u
  std::vector<double> output;  // u x c
};

// Adds the per-position gradient of the JSD loss term for slot k with respect
// to w_(s,k) into grad (u x c), for one sample with penultimate output h.
void accumulate_sample(const InlierPriorityConfig& cfg, const Network& net, Rng& rng, std::vector<double>& h,
                       std::vector<double>& grad) {
  const std::size_t u = cfg.penultimate_units;
  const std::size_t c = cfg.classes;
  std::vector<double> z(cfg.input_dim);
  for (double& v : z) v = cfg.input_scale * rng.normal();
  for (std::size_t s = 0; s < u; ++s) {
    double a = 0.0;
    for (std::size_t d = 0; d < cfg.input_dim; ++d) a += z[d] * net.hidden[d * u + s];
    h[s] = apply_activation(Activation::sigmoid, a);
  }
  std::vector<double> logits(c, 0.0);
  for (std::size_t s = 0; s < u; ++s)
    for (std::size_t k = 0; k < c; ++k) logits[k] += h[s] * net.output[s * c + k];
  const auto p = softmax(logits);
  const double target = 1.0 / static_cast<double>(c);
  for (std::size_t k = 0; k < c; ++k) {
    const double g = 0.5 * std::log(2.0 * p[k] / (p[k] + target)) * p[k] * (1.0 - p[k]);
    for (std::size_t s = 0; s < u; ++s) grad[s * c + k] += g * h[s];
  }
}

double mean_sq_norm(const std::vector<double>& grad, std::size_t c) {
  double total = 0.0;
  for (double v : grad) total += v * v;
  return total / static_cast<double>(c);
}

}  // namespace

InlierPriorityResult inlier_priority_experiment(const InlierPriorityConfig& cfg) {
  cfg.validate();
  const std::size_t u = cfg.penultimate_units;
  const std::size_t c = cfg.classes;
  Rng rng(derive_seed(cfg.seed, {0x494e4cu}));

  double sum_a = 0.0, sum_b = 0.0, sum_aa = 0.0, sum_bb = 0.0, sum_ab = 0.0;
  double m_hh = 0.0, m_h2h2 = 0.0, m_h3h = 0.0;
  std::size_t moment_count = 0;

  std::vector<double> h0(u), h1(u), grad(u * c);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    Network net{std::vector<double>(cfg.input_dim * u), std::vector<double>(u * c)};
    for (double& w : net.hidden) w = rng.uniform(-1.0, 1.0);
    for (double& w : net.output) w = rng.uniform(-1.0, 1.0);

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < cfg.n_inlier; ++i) {
      accumulate_sample(cfg, net, rng, i == 0 ? h0 : h1, grad);
      if (i == 1) {
        for (std::size_t s = 0; s < u; ++s) {
          m_hh += h0[s] * h1[s];
          m_h2h2 += h0[s] * h0[s] * h1[s] * h1[s];
          m_h3h += h0[s] * h0[s] * h0[s] * h1[s];
        }
        moment_count += u;
      }
    }
    const double a = mean_sq_norm(grad, c);

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < cfg.n_anomaly; ++i) accumulate_sample(cfg, net, rng, h1, grad);
    const double b = mean_sq_norm(grad, c);

    sum_a += a;
    sum_b += b;
    sum_aa += a * a;
    sum_bb += b * b;
    sum_ab += a * b;
  }

  const double n = static_cast<double>(cfg.trials);
  const double mu_a = sum_a / n;
  const double mu_b = sum_b / n;
  InlierPriorityResult r;
  r.mean_sq_norm_inlier = mu_a;
  r.mean_sq_norm_anomaly = mu_b;
  r.ratio = mu_a / mu_b;
  if (cfg.trials > 1) {
    const double var_a = (sum_aa - n * mu_a * mu_a) / (n - 1.0);
    const double var_b = (sum_bb - n * mu_b * mu_b) / (n - 1.0);
    const double cov = (sum_ab - n * mu_a * mu_b) / (n - 1.0);
    // delta method for a ratio of means
    const double var_r = (var_a / (mu_b * mu_b) + mu_a * mu_a * var_b / std::pow(mu_b, 4) -
                          2.0 * mu_a * cov / std::pow(mu_b, 3)) / n;
    r.ratio_std_error = std::sqrt(std::max(var_r, 0.0));
  }
  if (moment_count > 0) {
    r.moment_hh = m_hh / static_cast<double>(moment_count);
    r.moment_h2h2 = m_h2h2 / static_cast<double>(moment_count);
    r.moment_h3h = m_h3h / static_cast<double>(moment_count);
  }
  return r;
}

namespace {

double t_quantile_975(std::size_t dof) {
  static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                     2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086};
  if (dof == 0) return 0.0;
  if (dof <= std::size(table)) return table[dof - 1];
  return 1.96;
}

}  // namespace

SlopeFit fit_log_log(const std::vector<double>& population_ratios, const std::vector<double>& gradient_ratios) {
  if (population_ratios.size() != gradient_ratios.size() || population_ratios.size() < 2) {
    throw InvalidInput("log-log fit needs at least two paired points");
  }
  const std::size_t n = population_ratios.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(population_ratios[i] > 0.0) || !(gradient_ratios[i] > 0.0)) {
      throw InvalidInput("log-log fit needs positive values");
    }
    x[i] = std::log(population_ratios[i]);
    y[i] = std::log(gradient_ratios[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidInput("log-log fit needs distinct population ratios");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - (fit.intercept + fit.slope * x[i]);
      rss += e * e;
    }
    fit.slope_std_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  const double half = t_quantile_975(n - 2) * fit.slope_std_error;
  fit.ci_low = fit.slope - half;
  fit.ci_high = fit.slope + half;
  return fit;
}

}  // namespace slad::theory

namespace slad::theory {

std::vector<McCheckRow> mc_check(std::size_t queries, std::size_t max_features, std::size_t trials,
                                 std::uint64_t seed, double abs_tol, double se_multiple) {
  if (max_features < 2) throw InvalidInput("mc-check needs max_features >= 2");
  Rng pick(derive_seed(seed, {0x4d43u}));
  std::vector<McCheckRow> rows;
  rows.reserve(queries);
  for (std::size_t i = 0; i < queries; ++i) {
    SubspaceUsefulnessQuery q;
    q.features = static_cast<std::size_t>(pick.uniform_int(2, max_features));
    q.effective = static_cast<std::size_t>(pick.uniform_int(1, q.features));
    q.min_effective = static_cast<std::size_t>(pick.uniform_int(1, q.effective));
    Rng rng(derive_seed(seed, {0x4d43u, i}));
    McCheckRow row{q, pr_subspace_useful(q), pr_subspace_useful_mc(q, trials, rng), 0.0, false};
    row.delta = row.estimate.mean - row.closed_form;
    const double err = std::abs(row.delta);
    row.within_tolerance = err < abs_tol && err <= se_multiple * row.estimate.std_error + 1e-12;
    rows.push_back(row);
  }
  return rows;
}

InlierPriorityGrid inlier_priority_grid(const InlierPriorityConfig& base, const std::vector<double>& ratios) {
  InlierPriorityGrid grid;
  std::vector<double> xs, ys;
  for (double ratio : ratios) {
    InlierPriorityConfig cfg = base;
    cfg.n_inlier = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(base.n_anomaly)));
    cfg.seed = derive_seed(base.seed, {static_cast<std::uint64_t>(cfg.n_inlier)});
    grid.population_ratios.push_back(ratio);
    grid.results.push_back(inlier_priority_experiment(cfg));
    xs.push_back(ratio);
    ys.push_back(grid.results.back().ratio);
  }
  if (xs.size() >= 2) grid.fit = fit_log_log(xs, ys);
  return grid;
}

}  // namespace slad::theory
