#include "gridfail/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "gridfail/parallel.hpp"
#include "gridfail/rng.hpp"

namespace gridfail {
namespace {

// Cyclic Jacobi eigendecomposition for symmetric matrices. Returns
// (eigenvalues, eigenvectors as rows), unsorted.
std::pair<std::vector<double>, Matrix> jacobi_eigen(Matrix a) {
  const std::size_t n = a.size();
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-22) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v[p][i], viq = v[q][i];
          v[p][i] = c * vip - s * viq;
          v[q][i] = s * vip + c * viq;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  return {eig, v};
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct LloydResult {
  Matrix centroids;
  std::vector<int> assignments;
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<double> iteration_inertia;
};

int nearest_centroid(const std::vector<double>& p, const Matrix& centroids) {
  int best = 0;
  double best_d = sq_dist(p, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = sq_dist(p, centroids[c]);
    if (d < best_d) {  // ties keep the lower index
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

LloydResult lloyd_once(const Matrix& points, int k, const CounterRng& rng,
                       int max_iter, double tol) {
  const std::size_t n = points.size();
  const std::size_t d = points[0].size();
  LloydResult res;

  // k-means++ seeding.
  Matrix centroids;
  centroids.push_back(points[rng.pick(0, n)]);
  std::vector<double> min_d(n);
  for (std::size_t i = 0; i < n; ++i) min_d[i] = sq_dist(points[i], centroids[0]);
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(min_d.begin(), min_d.end(), 0.0);
    std::size_t chosen = 0;
    if (total > 0.0) {
      double target = rng.uniform(static_cast<std::uint64_t>(c)) * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= min_d[i];
        if (target <= 0.0) {
          chosen = i;
          break;
        }
        chosen = i;
      }
    } else {
      chosen = rng.pick(static_cast<std::uint64_t>(c) + 1000, n);
    }
    centroids.push_back(points[chosen]);
    for (std::size_t i = 0; i < n; ++i)
      min_d[i] = std::min(min_d[i], sq_dist(points[i], centroids.back()));
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = nearest_centroid(points[i], centroids);
      inertia += sq_dist(points[i], centroids[assign[i]]);
    }
    res.iteration_inertia.push_back(inertia);

    Matrix next(k, std::vector<double>(d, 0.0));
    std::vector<int> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) next[assign[i]][j] += points[i][j];
      ++count[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dd = sq_dist(points[i], centroids[assign[i]]);
          if (dd > far_d) {
            far_d = dd;
            far = i;
          }
        }
        next[c] = points[far];
      } else {
        for (std::size_t j = 0; j < d; ++j) next[c][j] /= count[c];
      }
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) shift = std::max(shift, sq_dist(centroids[c], next[c]));
    centroids = std::move(next);
    if (std::sqrt(shift) < tol) break;
  }

  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    assign[i] = nearest_centroid(points[i], centroids);
    inertia += sq_dist(points[i], centroids[assign[i]]);
  }
  res.iteration_inertia.push_back(inertia);
  res.centroids = std::move(centroids);
  res.assignments = std::move(assign);
  res.inertia = inertia;
  return res;
}

}  // namespace

PcaModel pca_fit(const Matrix& rows, const std::vector<std::string>& names,
                 double variance_threshold) {
  if (rows.size() < 2) throw std::invalid_argument("pca_fit: need at least 2 rows");
  const std::size_t n = rows.size();
  const std::size_t d = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != d) throw std::invalid_argument("pca_fit: ragged input");

  PcaModel m;
  m.feature_names = names;
  m.variance_threshold = variance_threshold;
  m.means.assign(d, 0.0);
  m.sds.assign(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) m.means[j] += r[j];
  for (std::size_t j = 0; j < d; ++j) m.means[j] /= static_cast<double>(n);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j)
      m.sds[j] += (r[j] - m.means[j]) * (r[j] - m.means[j]);
  for (std::size_t j = 0; j < d; ++j) {
    m.sds[j] = std::sqrt(m.sds[j] / static_cast<double>(n));
    if (m.sds[j] == 0.0)
      throw std::invalid_argument(
          "pca_fit: constant column " +
          (j < names.size() ? names[j] : std::to_string(j)));
  }

  // Correlation matrix of the z-scored data.
  Matrix corr(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows) {
    std::vector<double> z(d);
    for (std::size_t j = 0; j < d; ++j) z[j] = (r[j] - m.means[j]) / m.sds[j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) corr[a][b] += z[a] * z[b];
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      corr[a][b] /= static_cast<double>(n);
      corr[b][a] = corr[a][b];
    }

  auto [eig, vecs] = jacobi_eigen(corr);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (eig[a] != eig[b]) return eig[a] > eig[b];
    return a < b;
  });

  const double trace = std::accumulate(eig.begin(), eig.end(), 0.0);
  m.components.resize(d);
  m.explained_ratios.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    m.explained_ratios[i] = std::max(0.0, eig[order[i]]) / trace;
    std::vector<double> comp = vecs[order[i]];
    // Sign convention: largest-magnitude coordinate positive.
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(comp[j]) > std::abs(comp[arg])) arg = j;
    if (comp[arg] < 0.0)
      for (double& x : comp) x = -x;
    m.components[i] = std::move(comp);
  }
  m.selected = 0;
  for (double r : m.explained_ratios)
    if (r >= variance_threshold) ++m.selected;
  return m;
}

namespace {

Matrix transform_impl(const PcaModel& m, const Matrix& rows, std::size_t n_comp) {
  const std::size_t d = m.means.size();
  Matrix out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != d)
      throw std::invalid_argument("pca_transform: column count mismatch");
    std::vector<double> z(d);
    for (std::size_t j = 0; j < d; ++j) z[j] = (r[j] - m.means[j]) / m.sds[j];
    std::vector<double> proj(n_comp, 0.0);
    for (std::size_t c = 0; c < n_comp; ++c)
      for (std::size_t j = 0; j < d; ++j) proj[c] += m.components[c][j] * z[j];
    out.push_back(std::move(proj));
  }
  return out;
}

}  // namespace

Matrix pca_transform(const PcaModel& m, const Matrix& rows) {
  return transform_impl(m, rows, static_cast<std::size_t>(m.selected));
}

Matrix pca_transform_full(const PcaModel& m, const Matrix& rows) {
  return transform_impl(m, rows, m.components.size());
}

Matrix pca_reconstruct(const PcaModel& m, const Matrix& proj) {
  const std::size_t d = m.means.size();
  Matrix out;
  out.reserve(proj.size());
  for (const auto& p : proj) {
    std::vector<double> z(d, 0.0);
    for (std::size_t c = 0; c < p.size(); ++c)
      for (std::size_t j = 0; j < d; ++j) z[j] += m.components[c][j] * p[c];
    out.push_back(std::move(z));
  }
  return out;
}

KMeansModel kmeans_fit(const Matrix& points, int k, std::uint64_t seed,
                       int n_restarts, int max_iter, double tol, int workers) {
  if (points.empty()) throw std::invalid_argument("kmeans_fit: no points");
  if (k < 1 || k > static_cast<int>(points.size()))
    throw std::invalid_argument("kmeans_fit: k must be in [1, n_points]");

  std::vector<LloydResult> results(n_restarts);
  const CounterRng base(seed);
  parallel_for(n_restarts, workers, [&](std::size_t r) {
    results[r] = lloyd_once(points, k, base.with("kmeans").with(r), max_iter, tol);
  });
  // Fixed reduction order: first restart with the minimal inertia wins.
  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r)
    if (results[r].inertia < results[best].inertia) best = r;

  KMeansModel m;
  m.k = k;
  m.centroids = std::move(results[best].centroids);
  m.inertia = results[best].inertia;
  m.seed = seed;
  m.n_restarts = n_restarts;
  m.assignments = std::move(results[best].assignments);
  m.iteration_inertia = std::move(results[best].iteration_inertia);
  return m;
}

std::vector<int> kmeans_assign(const KMeansModel& m, const Matrix& points) {
  std::vector<int> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    out[i] = nearest_centroid(points[i], m.centroids);
  return out;
}

double silhouette_score(const Matrix& points, const std::vector<int>& assignments) {
  const std::size_t n = points.size();
  if (n < 2 || assignments.size() != n)
    throw std::invalid_argument("silhouette_score: need >= 2 points with assignments");
  const int k = 1 + *std::max_element(assignments.begin(), assignments.end());
  std::vector<int> count(k, 0);
  for (int a : assignments) {
    if (a < 0) throw std::invalid_argument("silhouette_score: negative assignment");
    ++count[a];
  }
  int populated = 0;
  for (int c : count)
    if (c > 0) ++populated;
  if (populated < 2)
    throw std::invalid_argument("silhouette_score: need at least 2 clusters");

  double total = 0.0;
  std::vector<double> mean_d(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(mean_d.begin(), mean_d.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      mean_d[assignments[j]] += std::sqrt(sq_dist(points[i], points[j]));
    }
    const int own = assignments[i];
    if (count[own] == 1) continue;  // singleton contributes 0
    const double a = mean_d[own] / (count[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || count[c] == 0) continue;
      b = std::min(b, mean_d[c] / count[c]);
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

KSelection select_k(const Matrix& points, std::uint64_t seed, int k_lo, int k_hi,
                    int n_restarts, int workers) {
  if (k_lo < 2 || k_hi < k_lo || k_hi > static_cast<int>(points.size()))
    throw std::invalid_argument("select_k: k range must lie within [2, n_points]");
  KSelection sel;
  sel.diagnostics = Table({"k", "inertia", "silhouette"});
  double best_sil = -2.0;
  for (int k = k_lo; k <= k_hi; ++k) {
    const KMeansModel m = kmeans_fit(points, k, seed, n_restarts, 300, 1e-6, workers);
    const double sil = silhouette_score(points, m.assignments);
    sel.diagnostics.add_row({static_cast<double>(k), m.inertia, sil});
    if (sil > best_sil) {  // ties keep the smaller k
      best_sil = sil;
      sel.chosen_k = k;
    }
  }
  return sel;
}

double regularized_gamma_q(double s, double x) {
  if (x < 0.0 || s <= 0.0) throw std::invalid_argument("regularized_gamma_q domain");
  if (x == 0.0) return 1.0;
  const double log_prefix = s * std::log(x) - x - std::lgamma(s);
  if (x < s + 1.0) {
    // P(s,x) by series, Q = 1 - P.
    double term = 1.0 / s;
    double sum = term;
    for (int k = 1; k < 10000; ++k) {
      term *= x / (s + k);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return 1.0 - std::exp(log_prefix) * sum;
  }
  // Q(s,x) by Lentz continued fraction.
  const double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(log_prefix) * h;
}

ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& counts) {
  const std::size_t r = counts.size();
  if (r < 2) throw std::invalid_argument("chi_square: need at least 2 rows");
  const std::size_t c = counts[0].size();
  if (c < 2) throw std::invalid_argument("chi_square: need at least 2 columns");
  for (const auto& row : counts)
    if (row.size() != c) throw std::invalid_argument("chi_square: ragged table");

  std::vector<double> row_sum(r, 0.0), col_sum(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      if (counts[i][j] < 0) throw std::invalid_argument("chi_square: negative count");
      row_sum[i] += counts[i][j];
      col_sum[j] += counts[i][j];
      total += counts[i][j];
    }
  for (double s : row_sum)
    if (s == 0.0) throw std::invalid_argument("chi_square: zero marginal row");
  for (double s : col_sum)
    if (s == 0.0) throw std::invalid_argument("chi_square: zero marginal column");

  ChiSquareResult res;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double expected = row_sum[i] * col_sum[j] / total;
      const double diff = counts[i][j] - expected;
      res.statistic += diff * diff / expected;
    }
  res.dof = static_cast<int>((r - 1) * (c - 1));
  res.p_value = regularized_gamma_q(res.dof / 2.0, res.statistic / 2.0);
  res.p_value = std::clamp(res.p_value, 0.0, 1.0);
  return res;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - lo;
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

ClusterProfile profile_clusters(const std::vector<FailureFeatureRow>& rows,
                                const std::vector<int>& assignments,
                                std::vector<std::string> names) {
  if (rows.size() != assignments.size())
    throw std::invalid_argument("profile_clusters: row/assignment size mismatch");
  if (rows.empty()) throw std::invalid_argument("profile_clusters: empty input");
  const int k = 1 + *std::max_element(assignments.begin(), assignments.end());

  ClusterProfile p;
  p.k = k;
  if (names.empty())
    for (int c = 0; c < k; ++c) names.push_back("cluster_" + std::to_string(c));
  if (static_cast<int>(names.size()) != k)
    throw std::invalid_argument("profile_clusters: need one name per cluster");
  p.cluster_names = names;

  // Descriptor means per cluster.
  const auto& dn = descriptor_names();
  std::vector<std::string> cols = {"cluster", "count"};
  cols.insert(cols.end(), dn.begin(), dn.end());
  p.descriptor_means = Table(cols);
  std::vector<int> count(k, 0);
  Matrix sums(k, std::vector<double>(dn.size(), 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = descriptor_values(rows[i]);
    ++count[assignments[i]];
    for (std::size_t j = 0; j < v.size(); ++j) sums[assignments[i]][j] += v[j];
  }
  for (int c = 0; c < k; ++c) {
    Table::Row row = {names[c], static_cast<double>(count[c])};
    for (std::size_t j = 0; j < dn.size(); ++j)
      row.push_back(count[c] > 0 ? sums[c][j] / count[c] : 0.0);
    p.descriptor_means.add_row(std::move(row));
  }

  // Cluster x agent crosstab with per-agent-column percentages.
  std::vector<std::string> agents;
  std::map<std::string, int> agent_idx;
  for (const auto& r : rows) {
    const std::string a = r.agent.name();
    if (!agent_idx.count(a)) {
      agent_idx[a] = static_cast<int>(agents.size());
      agents.push_back(a);
    }
  }
  Matrix cross(k, std::vector<double>(agents.size(), 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i)
    cross[assignments[i]][agent_idx[rows[i].agent.name()]] += 1.0;
  std::vector<double> agent_total(agents.size(), 0.0);
  for (int c = 0; c < k; ++c)
    for (std::size_t a = 0; a < agents.size(); ++a) agent_total[a] += cross[c][a];
  std::vector<std::string> across = {"cluster"};
  for (const auto& a : agents) {
    across.push_back(a);
    across.push_back(a + "_pct");
  }
  across.push_back("total");
  p.agent_crosstab = Table(across);
  for (int c = 0; c < k; ++c) {
    Table::Row row = {names[c]};
    double tot = 0.0;
    for (std::size_t a = 0; a < agents.size(); ++a) {
      row.push_back(cross[c][a]);
      row.push_back(agent_total[a] > 0 ? 100.0 * cross[c][a] / agent_total[a] : 0.0);
      tot += cross[c][a];
    }
    row.push_back(tot);
    p.agent_crosstab.add_row(std::move(row));
  }

  // Survival five-number summary.
  p.survival_summary =
      Table({"cluster", "count", "min", "q1", "median", "q3", "max"});
  for (int c = 0; c < k; ++c) {
    std::vector<double> surv;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (assignments[i] == c) surv.push_back(rows[i].t_survived);
    std::sort(surv.begin(), surv.end());
    p.survival_summary.add_row({names[c], static_cast<double>(surv.size()),
                                surv.empty() ? 0.0 : surv.front(),
                                quantile_sorted(surv, 0.25), quantile_sorted(surv, 0.5),
                                quantile_sorted(surv, 0.75),
                                surv.empty() ? 0.0 : surv.back()});
  }

  // Error-type percentages per cluster.
  const std::vector<ErrorType> errs = {ErrorType::kDcInitSolverFactor,
                                       ErrorType::kAcTooManyIterations,
                                       ErrorType::kDcInitSolverSolve};
  std::vector<std::string> ecols = {"cluster"};
  for (ErrorType e : errs) ecols.push_back(to_string(e) + "_pct");
  p.error_type_percent = Table(ecols);
  for (int c = 0; c < k; ++c) {
    std::vector<double> ec(errs.size(), 0.0);
    double tot = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (assignments[i] != c) continue;
      for (std::size_t e = 0; e < errs.size(); ++e)
        if (rows[i].error_type == errs[e]) {
          ec[e] += 1.0;
          tot += 1.0;
        }
    }
    Table::Row row = {names[c]};
    for (double v : ec) row.push_back(tot > 0 ? 100.0 * v / tot : 0.0);
    p.error_type_percent.add_row(std::move(row));
  }

  // Independence test needs every marginal populated.
  bool testable = agents.size() >= 2 && k >= 2;
  for (int c = 0; c < k && testable; ++c)
    if (count[c] == 0) testable = false;
  if (testable) p.chi_square = chi_square_independence(cross);
  return p;
}

}  // namespace gridfail
