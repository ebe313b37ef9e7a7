#include <algorithm>
#include <cmath>
#include <limits>

#include "mmvib/cluster/cluster.hpp"
#include "mmvib/core/error.hpp"
#include "mmvib/core/io.hpp"
#include "mmvib/core/rng.hpp"

namespace mmvib::cluster {
namespace {

constexpr double kEmptyComponent = 1e-8;  // responsibility mass below which a component is re-seeded

struct Model {
  RealMatrix means, variances;
  std::vector<double> weights;
};

std::vector<double> global_variance(const FeatureMatrix& x) {
  std::vector<double> mean(x.cols, 0.0), var(x.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t d = 0; d < x.cols; ++d) mean[d] += x.row(i)[d];
  for (auto& m : mean) m /= static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t d = 0; d < x.cols; ++d) var[d] += (x.row(i)[d] - mean[d]) * (x.row(i)[d] - mean[d]);
  for (auto& v : var) v /= static_cast<double>(x.rows);
  return var;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

std::vector<std::size_t> kmeans_plus_plus(const FeatureMatrix& x, std::size_t k, Rng& rng) {
  std::vector<std::size_t> centers = {rng.index(x.rows)};
  std::vector<double> d2(x.rows, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), x.row(centers.back())));
      total += d2[i];
    }
    std::size_t pick = rng.index(x.rows);
    if (total > 0.0) {
      double u = rng.uniform(0.0, total);
      for (std::size_t i = 0; i < x.rows; ++i) {
        u -= d2[i];
        if (u <= 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (u > 0.0)  // rounding left a remainder; take the last positive-weight point
        for (std::size_t i = x.rows; i-- > 0;)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
    }
    centers.push_back(pick);
  }
  return centers;
}

// log pi_k + log N(x_i | k) for every row and component.
RealMatrix log_joint(const FeatureMatrix& x, const Model& m) {
  const std::size_t k = m.weights.size();
  RealMatrix out(x.rows, k);
  std::vector<double> norm(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    double s = 0.0;
    for (std::size_t d = 0; d < x.cols; ++d) s += std::log(kTwoPi * m.variances(c, d));
    norm[c] = std::log(m.weights[c]) - 0.5 * s;
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = x.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      double q = 0.0;
      for (std::size_t d = 0; d < x.cols; ++d) {
        const double e = r[d] - m.means(c, d);
        q += e * e / m.variances(c, d);
      }
      out(i, c) = norm[c] - 0.5 * q;
    }
  }
  return out;
}

// Responsibilities in place of the log joint; returns the data log-likelihood.
double normalize_rows(RealMatrix& lj) {
  double ll = 0.0;
  for (std::size_t i = 0; i < lj.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < lj.cols; ++c) mx = std::max(mx, lj(i, c));
    double s = 0.0;
    for (std::size_t c = 0; c < lj.cols; ++c) s += std::exp(lj(i, c) - mx);
    const double lse = mx + std::log(s);
    ll += lse;
    for (std::size_t c = 0; c < lj.cols; ++c) lj(i, c) = std::exp(lj(i, c) - lse);
  }
  return ll;
}

double prior_term(const Model& m, double beta) {
  double s = 0.0;
  for (double v : m.variances.data) s += 1.0 / v;
  return -beta * s;
}

struct Run {
  Model model;
  RealMatrix resp;
  double ll = 0.0, objective = 0.0;
  std::vector<double> history;
  bool monotone = true;
  std::size_t reseeds = 0, iterations = 0;
};

Run fit_once(const FeatureMatrix& x, std::size_t k, Rng& rng, const GmmOptions& opt, const std::vector<double>& gvar) {
  const double beta = opt.variance_prior / 2.0;
  const double n = static_cast<double>(x.rows);
  Run run;
  Model& m = run.model;
  m.means = RealMatrix(k, x.cols);
  m.variances = RealMatrix(k, x.cols);
  m.weights.assign(k, 1.0 / static_cast<double>(k));
  const auto centers = kmeans_plus_plus(x, k, rng);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t d = 0; d < x.cols; ++d) {
      m.means(c, d) = x.row(centers[c])[d];
      m.variances(c, d) = gvar[d] + opt.variance_prior;
    }

  double previous = -std::numeric_limits<double>::infinity();
  bool comparable = false;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    run.resp = log_joint(x, m);
    run.ll = normalize_rows(run.resp);
    run.objective = run.ll + prior_term(m, beta);
    const double per_sample = run.objective / n;
    run.history.push_back(per_sample);
    if (comparable && per_sample < previous - 1e-12 * (1.0 + std::abs(previous))) run.monotone = false;
#ifdef MMVIB_ASSERT_EM_MONOTONE
    require(run.monotone, ErrorKind::Fitting, "EM objective decreased at iteration " + std::to_string(it));
#endif
    if (comparable && std::abs(per_sample - previous) < opt.tolerance) break;
    previous = per_sample;
    comparable = true;
    run.iterations = it + 1;

    // M-step: exact maximizer of the penalized objective, so EM ascends it.
    std::vector<double> mass(k, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t c = 0; c < k; ++c) mass[c] += run.resp(i, c);
    for (std::size_t c = 0; c < k; ++c) {
      if (mass[c] < kEmptyComponent) {
        // Re-seed at the worst-explained point; the objective is not
        // comparable across this jump.
        std::size_t worst = 0;
        double worst_score = std::numeric_limits<double>::infinity();
        const auto lj = log_joint(x, m);
        for (std::size_t i = 0; i < x.rows; ++i) {
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < k; ++j) best = std::max(best, lj(i, j));
          if (best < worst_score) {
            worst_score = best;
            worst = i;
          }
        }
        for (std::size_t d = 0; d < x.cols; ++d) {
          m.means(c, d) = x.row(worst)[d];
          m.variances(c, d) = gvar[d] + opt.variance_prior;
        }
        m.weights[c] = 1.0 / n;
        ++run.reseeds;
        comparable = false;
        continue;
      }
      for (std::size_t d = 0; d < x.cols; ++d) {
        double mu = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mu += run.resp(i, c) * x.row(i)[d];
        mu /= mass[c];
        double s = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) s += run.resp(i, c) * (x.row(i)[d] - mu) * (x.row(i)[d] - mu);
        m.means(c, d) = mu;
        m.variances(c, d) = (s + 2.0 * beta) / mass[c];
      }
      m.weights[c] = mass[c] / n;
    }
    double wsum = 0.0;
    for (double w : m.weights) wsum += w;
    for (auto& w : m.weights) w /= wsum;
  }
  return run;
}

}  // namespace

ClusterResult gmm_cluster(const FeatureMatrix& features, std::size_t components, std::uint64_t seed,
                          const GmmOptions& options) {
  require(components >= 1, ErrorKind::Parameter, "GMM needs at least one component");
  require(features.rows >= components, ErrorKind::InsufficientData, "fewer feature rows than GMM components");
  require(features.cols >= 1, ErrorKind::Parameter, "features are empty");
  require(options.restarts >= 1 && options.max_iterations >= 1, ErrorKind::Parameter, "invalid EM options");
  require(options.variance_prior > 0.0, ErrorKind::Parameter, "variance prior must be positive");
  for (double v : features.data) require(std::isfinite(v), ErrorKind::Parameter, "features must be finite");

  const auto gvar = global_variance(features);
  ClusterResult out;
  out.components = components;
  bool have = false;
  Run best;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    Rng rng(derive_seed(seed, "gmm-restart", r));
    Run run = fit_once(features, components, rng, options, gvar);
    out.monotone = out.monotone && run.monotone;
    out.reseeds += run.reseeds;
    require(std::isfinite(run.objective), ErrorKind::Fitting, "EM produced a non-finite objective");
    if (!have || run.objective > best.objective) {
      best = std::move(run);
      have = true;
    }
  }
  out.means = best.model.means;
  out.variances = best.model.variances;
  out.weights = best.model.weights;
  out.responsibilities = best.resp;
  out.log_likelihood = best.ll;
  out.objective = best.objective;
  out.objective_history = best.history;
  out.iterations = best.iterations;
  out.labels.resize(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    std::size_t arg = 0;
    for (std::size_t c = 1; c < components; ++c)
      if (best.resp(i, c) > best.resp(i, arg)) arg = c;
    out.labels[i] = static_cast<int>(arg);
  }
  return out;
}

double calinski_harabasz(const FeatureMatrix& x, std::span<const int> labels) {
  require(labels.size() == x.rows, ErrorKind::ShapeMismatch, "one label per feature row required");
  int max_label = -1;
  for (int l : labels) {
    require(l >= 0, ErrorKind::Parameter, "labels must be non-negative");
    max_label = std::max(max_label, l);
  }
  const auto k_all = static_cast<std::size_t>(max_label + 1);
  std::vector<double> count(k_all, 0.0);
  RealMatrix centroid(k_all, x.cols);
  std::vector<double> mean(x.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    count[l] += 1.0;
    for (std::size_t d = 0; d < x.cols; ++d) {
      centroid(l, d) += x.row(i)[d];
      mean[d] += x.row(i)[d];
    }
  }
  std::size_t populated = 0;
  for (std::size_t l = 0; l < k_all; ++l)
    if (count[l] > 0.0) {
      ++populated;
      for (std::size_t d = 0; d < x.cols; ++d) centroid(l, d) /= count[l];
    }
  for (auto& m : mean) m /= static_cast<double>(x.rows);
  if (populated < 2 || x.rows <= populated) return 0.0;

  double between = 0.0, within = 0.0;
  for (std::size_t l = 0; l < k_all; ++l)
    if (count[l] > 0.0)
      for (std::size_t d = 0; d < x.cols; ++d) between += count[l] * (centroid(l, d) - mean[d]) * (centroid(l, d) - mean[d]);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    for (std::size_t d = 0; d < x.cols; ++d) within += (x.row(i)[d] - centroid(l, d)) * (x.row(i)[d] - centroid(l, d));
  }
  const double k = static_cast<double>(populated), n = static_cast<double>(x.rows);
  if (within == 0.0) return between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return (between / (k - 1.0)) / (within / (n - k));
}

SpeakerCountEstimate estimate_num_speakers(const FeatureMatrix& features, std::size_t max_speakers, std::uint64_t seed,
                                           const GmmOptions& options) {
  require(max_speakers >= 2, ErrorKind::Parameter, "N_max must be >= 2");
  require(features.rows >= max_speakers + 1, ErrorKind::InsufficientData,
          "need at least N_max + 1 segments to choose the speaker count");
  SpeakerCountEstimate est;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 2; n <= max_speakers; ++n) {
    auto fit = gmm_cluster(features, n, derive_seed(seed, "speaker-count", n), options);
    const double ch = calinski_harabasz(features, fit.labels);
    est.candidates.push_back(n);
    est.ch_scores.push_back(ch);
    est.monotone = est.monotone && fit.monotone;
    if (ch > best) {
      best = ch;
      est.speakers = n;
      est.clustering = std::move(fit);
    }
  }
  return est;
}

void write_cluster_report(const std::filesystem::path& path, const ClusterResult& result) {
  io::CsvWriter csv(path);
  std::vector<std::string> cols = {"segment", "label"};
  for (std::size_t c = 0; c < result.components; ++c) cols.push_back("resp_" + std::to_string(c));
  csv.header(cols);
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    csv.cell(i).cell(result.labels[i]);
    for (std::size_t c = 0; c < result.components; ++c) csv.cell(result.responsibilities(i, c));
    csv.end_row();
  }
}

void write_ch_curve(const std::filesystem::path& path, const SpeakerCountEstimate& estimate) {
  io::CsvWriter csv(path);
  csv.header({"n", "ch", "chosen"});
  for (std::size_t i = 0; i < estimate.candidates.size(); ++i) {
    csv.cell(estimate.candidates[i]).cell(estimate.ch_scores[i]).cell(estimate.candidates[i] == estimate.speakers ? 1 : 0);
    csv.end_row();
  }
}

}  // namespace mmvib::cluster
