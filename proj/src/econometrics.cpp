#include "zpanel/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace zpanel::econ {

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

Dataset::Dataset(std::vector<std::string> unit, std::vector<int> year)
    : unit_(std::move(unit)), year_(std::move(year)) {
  if (unit_.size() != year_.size())
    throw std::invalid_argument("unit/year length mismatch");
  order_.resize(unit_.size());
  std::iota(order_.begin(), order_.end(), size_t{0});
  std::sort(order_.begin(), order_.end(), [this](size_t a, size_t b) {
    if (unit_[a] != unit_[b]) return unit_[a] < unit_[b];
    return year_[a] < year_[b];
  });
  for (size_t i = 1; i < order_.size(); ++i) {
    size_t a = order_[i - 1], b = order_[i];
    if (unit_[a] == unit_[b] && year_[a] == year_[b])
      throw std::runtime_error("duplicate (unit, year) row: " + unit_[a] + "/" +
                               std::to_string(year_[a]));
  }
}

void Dataset::add_column(const std::string& name, std::vector<double> values) {
  if (values.size() != n())
    throw std::invalid_argument("column '" + name + "' length mismatch");
  cols_[name] = std::move(values);
}

bool Dataset::has_column(const std::string& name) const {
  return cols_.count(name) > 0;
}

const std::vector<double>& Dataset::column(const std::string& name) const {
  auto it = cols_.find(name);
  if (it == cols_.end())
    throw std::runtime_error("unknown column '" + name + "'");
  return it->second;
}

std::vector<std::string> Dataset::column_names() const {
  std::vector<std::string> out;
  out.reserve(cols_.size());
  for (const auto& [k, v] : cols_) out.push_back(k);
  return out;
}

void Dataset::add_key(const std::string& name, std::vector<long long> values) {
  if (values.size() != n())
    throw std::invalid_argument("key '" + name + "' length mismatch");
  keys_[name] = std::move(values);
}

bool Dataset::has_key(const std::string& name) const {
  if (name == "unit" || name == "year") return true;
  return keys_.count(name) > 0;
}

std::vector<long long> Dataset::key(const std::string& name) const {
  if (name == "year") {
    std::vector<long long> out(year_.begin(), year_.end());
    return out;
  }
  if (name == "unit") {
    // factorize unit labels over their sorted order
    std::vector<long long> out(n(), -1);
    long long next = 0;
    for (size_t i = 0; i < order_.size(); ++i) {
      if (i > 0 && unit_[order_[i]] == unit_[order_[i - 1]])
        out[order_[i]] = out[order_[i - 1]];
      else
        out[order_[i]] = next++;
    }
    return out;
  }
  auto it = keys_.find(name);
  if (it == keys_.end()) throw std::runtime_error("unknown key '" + name + "'");
  return it->second;
}

std::vector<double> Dataset::lagged(const std::string& col, int lag) const {
  const auto& v = column(col);
  if (lag == 0) return v;
  if (lag < 0) throw std::invalid_argument("negative lag");
  // previous consecutive calendar year within unit; gaps break the chain
  std::vector<long> prev(n(), -1);
  for (size_t i = 1; i < order_.size(); ++i) {
    size_t a = order_[i - 1], b = order_[i];
    if (unit_[a] == unit_[b] && year_[a] == year_[b] - 1)
      prev[b] = static_cast<long>(a);
  }
  std::vector<double> out(n(), kMissing);
  for (size_t i = 0; i < n(); ++i) {
    long j = static_cast<long>(i);
    for (int k = 0; k < lag && j >= 0; ++k) j = prev[j];
    if (j >= 0) out[i] = v[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

std::string Term::label() const {
  std::string s;
  for (size_t i = 0; i < factors.size(); ++i) {
    if (i) s += "*";
    s += factors[i].column;
    if (factors[i].lag > 0) s += "_l" + std::to_string(factors[i].lag);
  }
  return s;
}

Term make_term(std::initializer_list<Factor> factors) {
  Term t;
  t.factors.assign(factors);
  return t;
}

namespace {

std::vector<double> evaluate_term(const Dataset& data, const Term& term) {
  if (term.factors.empty()) throw std::invalid_argument("empty term");
  std::vector<double> acc = data.lagged(term.factors[0].column, term.factors[0].lag);
  for (size_t f = 1; f < term.factors.size(); ++f) {
    auto v = data.lagged(term.factors[f].column, term.factors[f].lag);
    for (size_t i = 0; i < acc.size(); ++i) acc[i] *= v[i];
  }
  return acc;
}

}  // namespace

std::string significance_stars(double t_stat) {
  double a = std::abs(t_stat);
  if (a >= 2.5758293035489004) return "***";
  if (a >= 1.959963984540054) return "**";
  if (a >= 1.6448536269514722) return "*";
  return "";
}

// ---------------------------------------------------------------------------
// Fixed-effect absorption
// ---------------------------------------------------------------------------

int absorb_fixed_effects(Eigen::MatrixXd& M,
                         const std::vector<std::vector<long long>>& groups,
                         double tol, int max_iter) {
  const long n = M.rows();
  const long p = M.cols();
  if (n == 0 || p == 0 || groups.empty()) return 0;

  // per dimension: rows of each group, precomputed
  struct Dim {
    std::vector<std::vector<int>> members;
  };
  std::vector<Dim> dims;
  dims.reserve(groups.size());
  for (const auto& g : groups) {
    if (static_cast<long>(g.size()) != n)
      throw std::invalid_argument("group vector length mismatch");
    std::unordered_map<long long, int> id;
    Dim d;
    for (long i = 0; i < n; ++i) {
      auto [it, fresh] = id.emplace(g[i], static_cast<int>(d.members.size()));
      if (fresh) d.members.emplace_back();
      d.members[it->second].push_back(static_cast<int>(i));
    }
    dims.push_back(std::move(d));
  }

  Eigen::VectorXd scale(p);
  for (long c = 0; c < p; ++c)
    scale[c] = std::max(1.0, M.col(c).cwiseAbs().maxCoeff());

  int iter = 0;
  int settled = 0;  // extra sweeps after reaching tolerance
  Eigen::VectorXd x0(n);
  for (; iter < max_iter; ++iter) {
    double worst = 0.0;
    for (long c = 0; c < p; ++c) {
      x0 = M.col(c);
      for (const auto& d : dims) {
        for (const auto& rowsv : d.members) {
          double s = 0.0;
          for (int r : rowsv) s += M(r, c);
          const double mean = s / static_cast<double>(rowsv.size());
          for (int r : rowsv) M(r, c) -= mean;
        }
      }
      const double delta = (M.col(c) - x0).cwiseAbs().maxCoeff() / scale[c];
      worst = std::max(worst, delta);
    }
    if (worst < tol) {
      if (++settled >= 2) break;
    } else {
      settled = 0;
    }
  }
  return iter;
}

long absorbed_dof(const std::vector<std::vector<long long>>& groups) {
  auto levels = [](const std::vector<long long>& g) {
    std::set<long long> s(g.begin(), g.end());
    return static_cast<long>(s.size());
  };
  if (groups.empty()) return 0;
  if (groups.size() == 1) return levels(groups[0]);

  // two-way: L1 + L2 - (connected components of the bipartite level graph)
  const auto& g1 = groups[0];
  const auto& g2 = groups[1];
  std::unordered_map<long long, int> id1, id2;
  for (auto v : g1) id1.emplace(v, static_cast<int>(id1.size()));
  for (auto v : g2) id2.emplace(v, static_cast<int>(id2.size()));
  const int n1 = static_cast<int>(id1.size());
  const int n2 = static_cast<int>(id2.size());
  std::vector<int> parent(n1 + n2);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (size_t i = 0; i < g1.size(); ++i) {
    int a = find(id1[g1[i]]);
    int b = find(n1 + id2[g2[i]]);
    if (a != b) parent[a] = b;
  }
  std::set<int> roots;
  for (int i = 0; i < n1 + n2; ++i) roots.insert(find(i));
  long dof = n1 + n2 - static_cast<long>(roots.size());

  // further dimensions: standard approximation, levels - 1 each
  for (size_t d = 2; d < groups.size(); ++d) dof += levels(groups[d]) - 1;
  return dof;
}

// ---------------------------------------------------------------------------
// Clustered covariance
// ---------------------------------------------------------------------------

Eigen::MatrixXd clustered_covariance(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& residuals,
                                     const std::vector<long long>& clusters,
                                     long k_model) {
  const long n = X.rows();
  const long k = X.cols();
  if (residuals.size() != n || static_cast<long>(clusters.size()) != n)
    throw std::invalid_argument("clustered_covariance: size mismatch");

  std::unordered_map<long long, Eigen::VectorXd> scores;
  for (long i = 0; i < n; ++i) {
    auto [it, fresh] = scores.try_emplace(clusters[i], Eigen::VectorXd::Zero(k));
    it->second += X.row(i).transpose() * residuals[i];
  }
  const long g = static_cast<long>(scores.size());
  if (g < 2) throw std::runtime_error("need at least 2 clusters");

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  // deterministic accumulation order
  std::vector<long long> ids;
  ids.reserve(scores.size());
  for (const auto& [cid, s] : scores) ids.push_back(cid);
  std::sort(ids.begin(), ids.end());
  for (auto cid : ids) {
    const auto& s = scores[cid];
    meat.noalias() += s * s.transpose();
  }

  Eigen::MatrixXd xtx = X.transpose() * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("singular bread matrix");
  Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(k, k));

  const double c = (static_cast<double>(g) / (g - 1.0)) *
                   ((n - 1.0) / static_cast<double>(n - k_model));
  Eigen::MatrixXd v = c * bread * meat * bread;
  // enforce exact symmetry
  return 0.5 * (v + v.transpose());
}

// ---------------------------------------------------------------------------
// Fixed-effects OLS
// ---------------------------------------------------------------------------

namespace {

struct SampleRows {
  std::vector<size_t> rows;
  long dropped_singletons = 0;
};

SampleRows select_rows(const std::vector<char>& usable,
                       const std::vector<std::vector<long long>>& fe_keys) {
  SampleRows out;
  for (size_t i = 0; i < usable.size(); ++i)
    if (usable[i]) out.rows.push_back(i);

  // iterative singleton removal over every fixed-effect dimension
  bool changed = true;
  while (changed && !fe_keys.empty()) {
    changed = false;
    for (const auto& keyv : fe_keys) {
      std::unordered_map<long long, int> count;
      for (size_t r : out.rows) ++count[keyv[r]];
      std::vector<size_t> next;
      next.reserve(out.rows.size());
      for (size_t r : out.rows) {
        if (count[keyv[r]] == 1) {
          ++out.dropped_singletons;
          changed = true;
        } else {
          next.push_back(r);
        }
      }
      out.rows.swap(next);
    }
  }
  return out;
}

}  // namespace

RegressionResult fit_fe_ols(const Dataset& data, const FeOlsSpec& spec) {
  const size_t n_all = data.n();

  std::vector<double> y = data.lagged(spec.dependent.column, spec.dependent.lag);
  if (spec.scale != 1.0)
    for (auto& v : y) v *= spec.scale;

  std::vector<std::vector<double>> xcols;
  std::vector<std::string> names;
  for (const auto& t : spec.regressors) {
    xcols.push_back(evaluate_term(data, t));
    names.push_back(t.label());
  }

  std::vector<std::vector<long long>> fe_keys;
  for (const auto& fe : spec.fixed_effects) fe_keys.push_back(data.key(fe));
  if (spec.cluster.empty()) throw std::runtime_error("cluster key required");
  std::vector<long long> cluster = data.key(spec.cluster);

  std::vector<char> usable(n_all, 1);
  for (size_t i = 0; i < n_all; ++i) {
    if (!std::isfinite(y[i])) usable[i] = 0;
    for (const auto& c : xcols)
      if (!std::isfinite(c[i])) usable[i] = 0;
  }
  for (const auto& flag : spec.filter_flags) {
    const auto& f = data.column(flag);
    for (size_t i = 0; i < n_all; ++i)
      if (!(f[i] == 1.0)) usable[i] = 0;
  }

  SampleRows sample = select_rows(usable, fe_keys);
  const long n = static_cast<long>(sample.rows.size());
  const long p = static_cast<long>(xcols.size());
  if (n == 0) throw std::runtime_error("empty estimation sample");
  if (n <= p) throw std::runtime_error("more regressors than observations");

  Eigen::MatrixXd M(n, p + 1);
  for (long i = 0; i < n; ++i) {
    M(i, 0) = y[sample.rows[i]];
    for (long j = 0; j < p; ++j) M(i, j + 1) = xcols[j][sample.rows[i]];
  }
  std::vector<std::vector<long long>> fe_sub;
  for (const auto& keyv : fe_keys) {
    std::vector<long long> sub(n);
    for (long i = 0; i < n; ++i) sub[i] = keyv[sample.rows[i]];
    fe_sub.push_back(std::move(sub));
  }

  absorb_fixed_effects(M, fe_sub);

  Eigen::VectorXd yt = M.col(0);
  Eigen::MatrixXd Xt = M.rightCols(p);

  // collinearity after absorption: keep the pivoted-QR basis columns
  RegressionResult res;
  std::vector<long> kept;
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xt);
    const long rank = qr.rank();
    auto perm = qr.colsPermutation().indices();
    std::vector<char> keep(p, 0);
    for (long i = 0; i < rank; ++i) keep[perm[i]] = 1;
    for (long j = 0; j < p; ++j) {
      if (keep[j])
        kept.push_back(j);
      else
        res.dropped_collinear.push_back(names[j]);
    }
  }
  const long pk = static_cast<long>(kept.size());
  if (pk == 0) throw std::runtime_error("all regressors collinear with fixed effects");
  Eigen::MatrixXd Xk(n, pk);
  for (long j = 0; j < pk; ++j) Xk.col(j) = Xt.col(kept[j]);

  Eigen::VectorXd beta = Xk.householderQr().solve(yt);
  Eigen::VectorXd resid = yt - Xk * beta;

  const long k_model = pk + absorbed_dof(fe_sub);
  if (n - k_model < 1)
    throw std::runtime_error("no residual degrees of freedom");

  std::vector<long long> clus(n);
  for (long i = 0; i < n; ++i) clus[i] = cluster[sample.rows[i]];
  Eigen::MatrixXd vcov = clustered_covariance(Xk, resid, clus, k_model);

  res.names.clear();
  for (long j : kept) res.names.push_back(names[j]);
  res.coef = beta;
  res.se = vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.stars.resize(pk);
  for (long j = 0; j < pk; ++j) {
    const double t = res.se[j] > 0 ? beta[j] / res.se[j]
                                   : (beta[j] == 0 ? 0.0
                                                   : std::numeric_limits<double>::infinity());
    res.stars[j] = significance_stars(t);
  }
  res.n_obs = n;
  res.dropped_singletons = sample.dropped_singletons;
  {
    std::set<std::string> units;
    for (long i = 0; i < n; ++i) units.insert(data.unit()[sample.rows[i]]);
    res.n_units = static_cast<long>(units.size());
    std::set<long long> cl(clus.begin(), clus.end());
    res.n_clusters = static_cast<long>(cl.size());
  }
  const double mean_y = yt.mean();
  const double tss = (yt.array() - mean_y).square().sum();
  const double ssr = resid.squaredNorm();
  res.within_r2 = tss > 0 ? 1.0 - ssr / tss : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Arellano-Bond one-step difference GMM
// ---------------------------------------------------------------------------

RegressionResult fit_arellano_bond(const Dataset& data, const AbSpec& spec) {
  if (spec.instrument_depth < 1)
    throw std::invalid_argument("instrument_depth must be >= 1");

  const size_t n_all = data.n();
  std::vector<double> y = data.lagged(spec.dependent.column, spec.dependent.lag);
  if (spec.scale != 1.0)
    for (auto& v : y) v *= spec.scale;

  std::vector<std::vector<double>> xcols;
  std::vector<std::string> exog_names;
  for (const auto& t : spec.exogenous) {
    xcols.push_back(evaluate_term(data, t));
    exog_names.push_back(t.label());
  }

  std::vector<char> filtered(n_all, 1);
  for (const auto& flag : spec.filter_flags) {
    const auto& f = data.column(flag);
    for (size_t i = 0; i < n_all; ++i)
      if (!(f[i] == 1.0)) filtered[i] = 0;
  }

  std::vector<long long> group = data.key(spec.group);

  // per group: year -> row, for level lookups
  std::map<long long, std::map<int, size_t>> by_group;
  for (size_t i = 0; i < n_all; ++i) {
    if (!filtered[i]) continue;
    auto [it, fresh] = by_group[group[i]].emplace(data.year()[i], i);
    if (!fresh)
      throw std::runtime_error("duplicate (group, year) in Arellano-Bond panel");
  }

  struct Equation {
    long long group;
    int year;
    double dy;       // Δy_t
    double dy_lag;   // Δy_{t-1}
    std::vector<double> dx;
    std::vector<size_t> iv_rows;  // rows of instrument levels, deepest last
  };
  std::vector<Equation> eqs;
  std::set<int> eq_years;

  for (const auto& [g, years] : by_group) {
    for (const auto& [t, row] : years) {
      auto it1 = years.find(t - 1);
      auto it2 = years.find(t - 2);
      if (it1 == years.end() || it2 == years.end()) continue;
      const size_t r0 = row, r1 = it1->second, r2 = it2->second;
      if (!std::isfinite(y[r0]) || !std::isfinite(y[r1]) || !std::isfinite(y[r2]))
        continue;
      Equation e;
      e.group = g;
      e.year = t;
      e.dy = y[r0] - y[r1];
      e.dy_lag = y[r1] - y[r2];
      bool ok = true;
      for (const auto& c : xcols) {
        const double d = c[r0] - c[r1];
        if (!std::isfinite(d)) {
          ok = false;
          break;
        }
        e.dx.push_back(d);
      }
      if (!ok) continue;
      // instrument levels y_{t-2}, y_{t-3}, ... within depth
      for (int s = t - 2; s >= t - 1 - spec.instrument_depth; --s) {
        auto its = years.find(s);
        if (its == years.end()) continue;
        if (!std::isfinite(y[its->second])) continue;
        e.iv_rows.push_back(its->second);
      }
      if (e.iv_rows.empty()) continue;
      eqs.push_back(std::move(e));
      eq_years.insert(t);
    }
  }
  if (eqs.empty())
    throw std::runtime_error("Arellano-Bond: no usable differenced equations");

  // regressor layout: lagged dependent difference, exogenous, year dummies
  std::vector<std::string> names;
  names.push_back(spec.dependent.column + "_l1");
  for (const auto& nm : exog_names) names.push_back(nm);
  std::vector<int> dummy_years;
  if (spec.year_dummies) {
    // the differenced equation has no intercept, so the full set of
    // equation-period dummies is identified
    for (int t : eq_years) {
      dummy_years.push_back(t);
      names.push_back("year=" + std::to_string(t));
    }
  }
  const long k = static_cast<long>(names.size());

  // GMM-style instrument columns: one per (equation year, level year)
  std::map<std::pair<int, int>, long> gmm_col;
  for (auto& e : eqs)
    for (size_t r : e.iv_rows)
      gmm_col.emplace(std::make_pair(e.year, data.year()[r]), 0);
  {
    long next = 0;
    for (auto& [key, col] : gmm_col) col = next++;
  }
  const long n_gmm = static_cast<long>(gmm_col.size());
  const long zc = n_gmm + (k - 1);  // exogenous block instruments itself

  RegressionResult res;
  // group the equations
  std::map<long long, std::vector<size_t>> eq_of_group;
  for (size_t i = 0; i < eqs.size(); ++i) eq_of_group[eqs[i].group].push_back(i);
  const long n_groups = static_cast<long>(eq_of_group.size());
  if (zc >= n_groups)
    res.warnings.push_back("instrument count (" + std::to_string(zc) +
                           ") >= group count (" + std::to_string(n_groups) +
                           "): overfitting risk");

  auto fill_rows = [&](const std::vector<size_t>& idx, Eigen::MatrixXd& Z,
                       Eigen::MatrixXd& X, Eigen::VectorXd& dy,
                       Eigen::MatrixXd& H) {
    const long m = static_cast<long>(idx.size());
    Z.setZero(m, zc);
    X.setZero(m, k);
    dy.resize(m);
    H.setZero(m, m);
    for (long a = 0; a < m; ++a) {
      const Equation& e = eqs[idx[a]];
      dy[a] = e.dy;
      X(a, 0) = e.dy_lag;
      for (size_t j = 0; j < e.dx.size(); ++j) X(a, 1 + j) = e.dx[j];
      for (size_t j = 0; j < dummy_years.size(); ++j)
        if (e.year == dummy_years[j]) X(a, 1 + e.dx.size() + j) = 1.0;
      for (size_t r : e.iv_rows)
        Z(a, gmm_col.at({e.year, data.year()[r]})) = y[r];
      // exogenous block instruments itself in differences
      for (long j = 1; j < k; ++j) Z(a, n_gmm + j - 1) = X(a, j);
      for (long b = 0; b < m; ++b) {
        const int gap = std::abs(e.year - eqs[idx[b]].year);
        if (gap == 0)
          H(a, b) = 2.0;
        else if (gap == 1)
          H(a, b) = -1.0;
      }
    }
  };

  Eigen::MatrixXd szx = Eigen::MatrixXd::Zero(zc, k);
  Eigen::VectorXd szy = Eigen::VectorXd::Zero(zc);
  Eigen::MatrixXd zhz = Eigen::MatrixXd::Zero(zc, zc);
  for (const auto& [g, idx] : eq_of_group) {
    Eigen::MatrixXd Z, X, H;
    Eigen::VectorXd dy;
    fill_rows(idx, Z, X, dy, H);
    szx.noalias() += Z.transpose() * X;
    szy.noalias() += Z.transpose() * dy;
    zhz.noalias() += Z.transpose() * H * Z;
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> w_dec(zhz);
  Eigen::MatrixXd w = w_dec.pseudoInverse();
  Eigen::MatrixXd a_mat = szx.transpose() * w * szx;
  Eigen::LDLT<Eigen::MatrixXd> a_ldlt(a_mat);
  if (a_ldlt.info() != Eigen::Success)
    throw std::runtime_error("Arellano-Bond: singular GMM system");
  Eigen::VectorXd theta = a_ldlt.solve(szx.transpose() * w * szy);

  // cluster-robust covariance at the group level
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(zc, zc);
  for (const auto& [g, idx] : eq_of_group) {
    Eigen::MatrixXd Z, X, H;
    Eigen::VectorXd dy;
    fill_rows(idx, Z, X, dy, H);
    Eigen::VectorXd u = dy - X * theta;
    Eigen::VectorXd zu = Z.transpose() * u;
    meat.noalias() += zu * zu.transpose();
  }
  Eigen::MatrixXd a_inv = a_ldlt.solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd mid = szx.transpose() * w * meat * w * szx;
  const double g_factor =
      n_groups > 1 ? static_cast<double>(n_groups) / (n_groups - 1.0) : 1.0;
  Eigen::MatrixXd vcov = g_factor * a_inv * mid * a_inv;

  res.names = names;
  res.coef = theta;
  res.se = vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.stars.resize(k);
  for (long j = 0; j < k; ++j) {
    const double t = res.se[j] > 0 ? theta[j] / res.se[j] : 0.0;
    res.stars[j] = significance_stars(t);
  }
  res.n_obs = static_cast<long>(eqs.size());
  res.n_units = n_groups;
  res.n_clusters = n_groups;
  return res;
}

// ---------------------------------------------------------------------------
// Interactions
// ---------------------------------------------------------------------------

std::vector<std::string> build_interactions(
    Dataset& data, const std::vector<std::string>& base_columns,
    const std::vector<std::vector<std::string>>& dummy_sets) {
  for (const auto& b : base_columns)
    if (!data.has_column(b))
      throw std::runtime_error("unknown base column '" + b + "'");
  for (const auto& set : dummy_sets)
    for (const auto& d : set)
      if (!d.empty() && !data.has_column(d))
        throw std::runtime_error("unknown dummy column '" + d + "'");

  // cartesian product over dummy sets; "" is the identity element
  std::vector<std::vector<std::string>> combos{{}};
  for (const auto& set : dummy_sets) {
    std::vector<std::vector<std::string>> next;
    for (const auto& c : combos)
      for (const auto& d : set) {
        auto e = c;
        if (!d.empty()) e.push_back(d);
        next.push_back(std::move(e));
      }
    combos.swap(next);
  }

  std::vector<std::string> created;
  const size_t n = data.n();
  for (const auto& base : base_columns) {
    for (const auto& combo : combos) {
      if (combo.empty()) continue;  // the bare base column already exists
      std::vector<double> prod = data.column(base);
      std::string name = base;
      for (const auto& d : combo) {
        const auto& v = data.column(d);
        for (size_t i = 0; i < n; ++i) prod[i] *= v[i];
        name += "*" + d;
      }
      data.add_column(name, std::move(prod));
      created.push_back(name);
    }
  }
  return created;
}

}  // namespace zpanel::econ
