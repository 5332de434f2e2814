#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zpanel::econ {

// ---------------------------------------------------------------------------
// Dataset: row-aligned numeric columns over a (unit, year) panel index.
// NaN encodes a missing value; rows with any missing variable drop out of a
// fit. Rows are kept sorted by (unit, year) so lag construction is local.
// ---------------------------------------------------------------------------

class Dataset {
 public:
  static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

  Dataset() = default;
  Dataset(std::vector<std::string> unit, std::vector<int> year);

  size_t n() const { return unit_.size(); }
  const std::vector<std::string>& unit() const { return unit_; }
  const std::vector<int>& year() const { return year_; }

  void add_column(const std::string& name, std::vector<double> values);
  bool has_column(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
  std::vector<std::string> column_names() const;

  /// Integer key columns usable as fixed-effect dimensions or clusters.
  /// "unit" and "year" exist implicitly; more can be attached (e.g. industry).
  void add_key(const std::string& name, std::vector<long long> values);
  bool has_key(const std::string& name) const;
  std::vector<long long> key(const std::string& name) const;

  /// Value of `col` at the row `lag` consecutive calendar years earlier
  /// within the same unit; missing when the chain is broken by a gap.
  std::vector<double> lagged(const std::string& col, int lag) const;

 private:
  std::vector<std::string> unit_;
  std::vector<int> year_;
  std::vector<size_t> order_;  // row index sorted by (unit, year)
  std::map<std::string, std::vector<double>> cols_;
  std::map<std::string, std::vector<long long>> keys_;
};

// ---------------------------------------------------------------------------
// Specifications
// ---------------------------------------------------------------------------

struct Factor {
  std::string column;
  int lag = 0;
};

/// A regressor: the row-wise product of its (possibly lagged) factors.
/// A missing factor makes the product missing.
struct Term {
  std::vector<Factor> factors;
  std::string label() const;
};

Term make_term(std::initializer_list<Factor> factors);

struct FeOlsSpec {
  Factor dependent;
  std::vector<Term> regressors;
  std::vector<std::string> fixed_effects;  // key names, absorbed
  std::string cluster;                     // key name
  std::vector<std::string> filter_flags;   // keep rows where column == 1
  double scale = 1.0;                      // output multiplier on y
};

struct AbSpec {
  Factor dependent;
  std::vector<Term> exogenous;            // enter and instrument in differences
  std::string group = "unit";             // panel dimension; also the cluster
  int instrument_depth = 99;              // deepest level lag used as IV
  bool year_dummies = true;
  std::vector<std::string> filter_flags;
  double scale = 1.0;
};

struct RegressionResult {
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  std::vector<std::string> stars;
  long n_obs = 0;
  long n_units = 0;    // distinct panel units in the estimation sample
  long n_clusters = 0;
  double within_r2 = std::numeric_limits<double>::quiet_NaN();
  long dropped_singletons = 0;
  std::vector<std::string> dropped_collinear;
  std::vector<std::string> warnings;
};

std::string significance_stars(double t_stat);

// ---------------------------------------------------------------------------
// Engines
// ---------------------------------------------------------------------------

/// Demean columns of M in place by alternating projections over the listed
/// group-id vectors. Returns the number of sweeps used.
int absorb_fixed_effects(Eigen::MatrixXd& M,
                         const std::vector<std::vector<long long>>& groups,
                         double tol = 1e-10, int max_iter = 10000);

/// Cluster-robust sandwich covariance on an already-transformed design.
/// K is the total model degrees of freedom used in the finite-sample factor
/// G/(G-1) * (N-1)/(N-K).
Eigen::MatrixXd clustered_covariance(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& residuals,
                                     const std::vector<long long>& clusters,
                                     long k_model);

/// Model degrees of freedom absorbed by the fixed-effect dimensions:
/// exact for one and two dimensions (two-way uses connected components),
/// approximate beyond.
long absorbed_dof(const std::vector<std::vector<long long>>& groups);

RegressionResult fit_fe_ols(const Dataset& data, const FeOlsSpec& spec);

/// One-step Arellano-Bond difference GMM with group-clustered errors.
RegressionResult fit_arellano_bond(const Dataset& data, const AbSpec& spec);

/// Materialize interaction products as named columns on the dataset:
/// every base term crossed with every combination drawn from the dummy sets.
/// Returns the created column names.
std::vector<std::string> build_interactions(
    Dataset& data, const std::vector<std::string>& base_columns,
    const std::vector<std::vector<std::string>>& dummy_sets);

}  // namespace zpanel::econ
