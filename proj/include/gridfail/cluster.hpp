#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridfail/features.hpp"
#include "gridfail/table.hpp"

namespace gridfail {

using Matrix = std::vector<std::vector<double>>;  // row-major

struct PcaModel {
  std::vector<std::string> feature_names;
  std::vector<double> means;
  std::vector<double> sds;
  Matrix components;                      // orthonormal rows, descending variance
  std::vector<double> explained_ratios;   // descending, sums to 1
  int selected = 0;                       // count of ratios >= threshold
  double variance_threshold = 0.05;
};

// Correlation-matrix PCA: z-score each column, eigendecompose, sort by
// descending eigenvalue. Sign convention: each component's largest-magnitude
// coordinate is positive. Throws on fewer than 2 rows or a constant column
// (naming it).
PcaModel pca_fit(const Matrix& rows, const std::vector<std::string>& names,
                 double variance_threshold = 0.05);

// Projects onto the selected components. Throws on column-count mismatch.
Matrix pca_transform(const PcaModel& m, const Matrix& rows);
// Projection onto all components, for reconstruction checks.
Matrix pca_transform_full(const PcaModel& m, const Matrix& rows);
Matrix pca_reconstruct(const PcaModel& m, const Matrix& full_projection);

struct KMeansModel {
  int k = 0;
  Matrix centroids;
  double inertia = 0.0;
  std::uint64_t seed = 0;
  int n_restarts = 0;
  std::vector<int> assignments;           // for the training points
  std::vector<double> iteration_inertia;  // best restart, after each assignment pass
};

// k-means++ initialization, Lloyd iterations, best of n_restarts by inertia.
// Deterministic given (seed, n_restarts) regardless of worker count. Empty
// clusters are re-seeded at the farthest point. Throws when k > n_points.
KMeansModel kmeans_fit(const Matrix& points, int k, std::uint64_t seed,
                       int n_restarts = 10, int max_iter = 300, double tol = 1e-6,
                       int workers = 1);

std::vector<int> kmeans_assign(const KMeansModel& m, const Matrix& points);

// Mean over points of (b - a) / max(a, b); singleton clusters contribute 0.
// Throws when fewer than 2 clusters are present.
double silhouette_score(const Matrix& points, const std::vector<int>& assignments);

struct KSelection {
  int chosen_k = 0;
  Table diagnostics;  // k, inertia, silhouette
};

// argmax silhouette over k_range, ties to the smaller k.
KSelection select_k(const Matrix& points, std::uint64_t seed, int k_lo = 2,
                    int k_hi = 10, int n_restarts = 10, int workers = 1);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// Pearson chi-square independence test on an r x c contingency table.
// Throws on zero marginal rows/columns.
ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& counts);

// Upper regularized incomplete gamma Q(s, x), series/continued-fraction.
double regularized_gamma_q(double s, double x);

struct ClusterProfile {
  int k = 0;
  std::vector<std::string> cluster_names;
  Table descriptor_means;     // per-cluster mean of every descriptor
  Table agent_crosstab;       // counts and per-agent-column percentages
  Table survival_summary;     // five-number summary per cluster
  Table error_type_percent;   // per-cluster error-type percentages
  ChiSquareResult chi_square; // cluster x agent independence test
};

// Cluster names default to "cluster_<i>"; pass labels to override.
ClusterProfile profile_clusters(const std::vector<FailureFeatureRow>& rows,
                                const std::vector<int>& assignments,
                                std::vector<std::string> names = {});

}  // namespace gridfail
