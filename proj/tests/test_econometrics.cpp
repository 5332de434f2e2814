#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "oracles.hpp"
#include "zpanel/econometrics.hpp"

using namespace zpanel::econ;

namespace {

Dataset from_rows(const oracle::PanelRows& rows) {
  Dataset d(rows.unit, rows.year);
  const long p = rows.x.cols();
  for (long j = 0; j < p; ++j) {
    std::vector<double> col(rows.unit.size());
    for (size_t i = 0; i < col.size(); ++i) col[i] = rows.x(i, j);
    d.add_column("x" + std::to_string(j), std::move(col));
  }
  std::vector<double> y(rows.unit.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = rows.y[i];
  d.add_column("y", std::move(y));
  d.add_key("per", rows.fe[1]);
  return d;
}

FeOlsSpec basic_spec(long p) {
  FeOlsSpec spec;
  spec.dependent = {"y", 0};
  for (long j = 0; j < p; ++j)
    spec.regressors.push_back(make_term({{"x" + std::to_string(j), 0}}));
  spec.fixed_effects = {"unit", "per"};
  spec.cluster = "unit";
  return spec;
}

}  // namespace

TEST_CASE("dataset lags respect calendar gaps within units") {
  Dataset d({"A", "A", "A", "B", "B"}, {2001, 2002, 2004, 2001, 2002});
  d.add_column("v", {1, 2, 3, 10, 20});
  auto l1 = d.lagged("v", 1);
  CHECK(std::isnan(l1[0]));
  CHECK(l1[1] == 1);
  CHECK(std::isnan(l1[2]));  // 2003 missing breaks the chain
  CHECK(std::isnan(l1[3]));
  CHECK(l1[4] == 10);
  auto l2 = d.lagged("v", 2);
  CHECK(std::isnan(l2[1]));  // needs both prior years
}

TEST_CASE("toy 6-firm 3-year panel equals dense dummy OLS") {
  oracle::RandomPanelConfig cfg;
  cfg.n_firms = 6;
  cfg.n_years = 3;
  cfg.n_slopes = 2;
  cfg.seed = 42;
  auto rows = oracle::random_panel(cfg);
  auto dense = oracle::dense_fe_ols(rows);

  auto data = from_rows(rows);
  auto res = fit_fe_ols(data, basic_spec(2));
  REQUIRE(res.coef.size() == dense.coef.size());
  for (long j = 0; j < res.coef.size(); ++j) {
    CHECK(std::abs(res.coef[j] - dense.coef[j]) /
              std::max(1.0, std::abs(dense.coef[j])) <
          1e-8);
    CHECK(std::abs(res.se[j] - dense.se[j]) /
              std::max(1.0, std::abs(dense.se[j])) <
          1e-8);
  }
  CHECK(res.n_obs == dense.n);
  CHECK(res.within_r2 == doctest::Approx(dense.within_r2).epsilon(1e-8));
}

TEST_CASE("absorbed estimation equals dense dummy OLS on random panels") {
  // the library route (alternating projections) against the dense
  // projection oracle, firm+year and firm+industry-year designs
  for (unsigned long long seed = 1; seed <= 25; ++seed) {
    oracle::RandomPanelConfig cfg;
    cfg.seed = seed;
    cfg.n_firms = 20 + static_cast<int>(seed % 30);
    cfg.n_years = 4 + static_cast<int>(seed % 4);
    cfg.n_slopes = 2 + static_cast<int>(seed % 3);
    cfg.industry_year = seed % 2 == 0;
    cfg.missing_rate = seed % 3 == 0 ? 0.15 : 0.0;
    auto rows = oracle::random_panel(cfg);
    auto dense = oracle::dense_fe_ols(rows);
    auto data = from_rows(rows);
    auto res = fit_fe_ols(data, basic_spec(cfg.n_slopes));
    REQUIRE(res.coef.size() == dense.coef.size());
    for (long j = 0; j < res.coef.size(); ++j) {
      CHECK(std::abs(res.coef[j] - dense.coef[j]) /
                std::max(1.0, std::abs(dense.coef[j])) <
            1e-8);
      CHECK(std::abs(res.se[j] - dense.se[j]) /
                std::max(1.0, std::abs(dense.se[j])) <
            1e-8);
    }
    CHECK(res.n_obs == dense.n);
  }
}

TEST_CASE("dependent duplicated as regressor gives unit coefficient") {
  oracle::RandomPanelConfig cfg;
  cfg.seed = 9;
  auto rows = oracle::random_panel(cfg);
  auto data = from_rows(rows);
  std::vector<double> y(data.column("y"));
  data.add_column("y_copy", std::move(y));

  FeOlsSpec spec;
  spec.dependent = {"y", 0};
  spec.regressors.push_back(make_term({{"y_copy", 0}}));
  spec.fixed_effects = {"unit", "per"};
  spec.cluster = "unit";
  auto res = fit_fe_ols(data, spec);
  CHECK(res.coef[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(res.within_r2 == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("planted coefficient recovered inside the Monte Carlo interval") {
  const double planted = -0.5;
  std::vector<double> estimates;
  for (unsigned long long rep = 0; rep < 200; ++rep) {
    oracle::RandomPanelConfig cfg;
    cfg.seed = 1000 + rep;
    cfg.n_firms = 30;
    cfg.n_years = 5;
    cfg.n_slopes = 2;
    auto rows = oracle::random_panel(cfg);
    // overwrite y with the planted equation
    std::mt19937_64 rng(rep + 7);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::map<long long, double> firm_fx, per_fx;
    for (long i = 0; i < rows.y.size(); ++i) {
      auto [fit, f1] = firm_fx.try_emplace(rows.fe[0][i], nd(rng));
      auto [pit, f2] = per_fx.try_emplace(rows.fe[1][i], nd(rng));
      rows.y[i] = 0.3 * rows.x(i, 0) + planted * rows.x(i, 1) + fit->second +
                  pit->second + 0.4 * nd(rng);
    }
    auto data = from_rows(rows);
    auto res = fit_fe_ols(data, basic_spec(2));
    estimates.push_back(res.coef[1]);
  }
  std::sort(estimates.begin(), estimates.end());
  const double lo = estimates[4];    // ~2.5% of 200
  const double hi = estimates[194];  // ~97.5%
  CHECK(lo <= planted);
  CHECK(hi >= planted);
  double mean = 0;
  for (double e : estimates) mean += e;
  mean /= estimates.size();
  CHECK(std::abs(mean - planted) < 0.02);
}

TEST_CASE("estimates invariant to firm-constant shifts of a regressor") {
  oracle::RandomPanelConfig cfg;
  cfg.seed = 31;
  auto rows = oracle::random_panel(cfg);
  auto data = from_rows(rows);
  auto base = fit_fe_ols(data, basic_spec(cfg.n_slopes));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 3.0);
  std::map<std::string, double> shift;
  std::vector<double> x0 = data.column("x0");
  for (size_t i = 0; i < x0.size(); ++i) {
    auto [it, fresh] = shift.try_emplace(data.unit()[i], nd(rng));
    x0[i] += it->second;
  }
  Dataset d2(data.unit(), data.year());
  d2.add_key("per", data.key("per"));
  d2.add_column("x0", std::move(x0));
  d2.add_column("x1", data.column("x1"));
  d2.add_column("x2", data.column("x2"));
  d2.add_column("y", data.column("y"));
  auto shifted = fit_fe_ols(d2, basic_spec(cfg.n_slopes));
  for (long j = 0; j < base.coef.size(); ++j)
    CHECK(std::abs(shifted.coef[j] - base.coef[j]) < 1e-8);
}

TEST_CASE("positive scaling of the dependent scales coefficients and SEs") {
  oracle::RandomPanelConfig cfg;
  cfg.seed = 77;
  auto rows = oracle::random_panel(cfg);
  auto data = from_rows(rows);
  auto spec = basic_spec(cfg.n_slopes);
  auto base = fit_fe_ols(data, spec);
  spec.scale = 100.0;
  auto scaled = fit_fe_ols(data, spec);
  for (long j = 0; j < base.coef.size(); ++j) {
    CHECK(scaled.coef[j] == doctest::Approx(100.0 * base.coef[j]));
    CHECK(scaled.se[j] == doctest::Approx(100.0 * base.se[j]));
    CHECK(scaled.stars[j] == base.stars[j]);
  }
}

TEST_CASE("filter flags restrict the estimation sample") {
  oracle::RandomPanelConfig cfg;
  cfg.seed = 57;
  auto rows = oracle::random_panel(cfg);
  auto data = from_rows(rows);
  std::vector<double> keep(data.n());
  for (size_t i = 0; i < keep.size(); ++i) keep[i] = i % 2 == 0 ? 1.0 : 0.0;
  data.add_column("keep", std::move(keep));

  auto spec = basic_spec(cfg.n_slopes);
  auto full = fit_fe_ols(data, spec);
  spec.filter_flags = {"keep"};
  auto filtered = fit_fe_ols(data, spec);
  CHECK(filtered.n_obs < full.n_obs);
  CHECK(filtered.n_obs <= (long)(data.n() / 2));
}

TEST_CASE("perfect collinearity is dropped and reported") {
  oracle::RandomPanelConfig cfg;
  cfg.seed = 13;
  auto rows = oracle::random_panel(cfg);
  auto data = from_rows(rows);
  std::vector<double> dup = data.column("x0");
  for (auto& v : dup) v *= 2.0;
  data.add_column("x0_twice", std::move(dup));

  FeOlsSpec spec = basic_spec(cfg.n_slopes);
  spec.regressors.push_back(make_term({{"x0_twice", 0}}));
  auto res = fit_fe_ols(data, spec);
  REQUIRE(res.dropped_collinear.size() == 1);
  CHECK(res.coef.size() == cfg.n_slopes);
}

TEST_CASE("clustered covariance formula checks") {
  SUBCASE("one observation per cluster equals the robust formula") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    const long n = 60, p = 2;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd e(n);
    std::vector<long long> cl(n);
    for (long i = 0; i < n; ++i) {
      x(i, 0) = nd(rng);
      x(i, 1) = nd(rng);
      e[i] = nd(rng);
      cl[i] = i;  // singleton clusters
    }
    const long k = p;
    auto v = clustered_covariance(x, e, cl, k);

    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
    for (long i = 0; i < n; ++i)
      meat += e[i] * e[i] * x.row(i).transpose() * x.row(i);
    Eigen::MatrixXd bread =
        (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    const double c = (double(n) / (n - 1.0)) * ((n - 1.0) / double(n - k));
    Eigen::MatrixXd expect = c * bread * meat * bread;
    CHECK((v - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("hand-built 3-cluster example equals the explicit formula") {
    Eigen::MatrixXd x(6, 1);
    x << 1, 2, 3, 4, 5, 6;
    Eigen::VectorXd e(6);
    e << 0.5, -0.2, 0.1, 0.4, -0.6, 0.3;
    std::vector<long long> cl = {0, 0, 1, 1, 2, 2};
    auto v = clustered_covariance(x, e, cl, 1);
    // scores: 1*0.5 + 2*(-0.2) = 0.1; 3*0.1 + 4*0.4 = 1.9;
    // 5*(-0.6) + 6*0.3 = -1.2
    const double meat = 0.1 * 0.1 + 1.9 * 1.9 + 1.2 * 1.2;
    const double xtx = 1 + 4 + 9 + 16 + 25 + 36;
    const double c = (3.0 / 2.0) * (5.0 / 5.0);
    CHECK(v(0, 0) == doctest::Approx(c * meat / (xtx * xtx)).epsilon(1e-12));
  }

  SUBCASE("homoskedastic independent errors approach classical OLS") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 1.0);
    const long g = 500, per = 4, n = g * per, p = 2;
    double ratio[2] = {0, 0};
    const int reps = 5;
    for (int rep = 0; rep < reps; ++rep) {
      Eigen::MatrixXd x(n, p);
      Eigen::VectorXd e(n);
      std::vector<long long> cl(n);
      for (long i = 0; i < n; ++i) {
        x(i, 0) = nd(rng);
        x(i, 1) = nd(rng);
        e[i] = nd(rng);
        cl[i] = i / per;
      }
      auto v = clustered_covariance(x, e, cl, p);
      const double sigma2 = e.squaredNorm() / (n - p);
      Eigen::MatrixXd classical =
          sigma2 *
          (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
      for (long j = 0; j < p; ++j) ratio[j] += v(j, j) / classical(j, j);
    }
    for (long j = 0; j < p; ++j)
      CHECK(std::abs(ratio[j] / reps - 1.0) < 0.10);
  }

  SUBCASE("cluster covariance is symmetric positive semidefinite") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd(0.0, 1.0);
    const long n = 80, p = 3;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd e(n);
    std::vector<long long> cl(n);
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < p; ++j) x(i, j) = nd(rng);
      e[i] = nd(rng);
      cl[i] = i % 9;
    }
    auto v = clustered_covariance(x, e, cl, p);
    CHECK((v - v.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
  }

  SUBCASE("fewer than two clusters is an error") {
    Eigen::MatrixXd x(3, 1);
    x << 1, 2, 3;
    Eigen::VectorXd e(3);
    e << 0.1, 0.2, 0.3;
    std::vector<long long> cl = {7, 7, 7};
    CHECK_THROWS(clustered_covariance(x, e, cl, 1));
  }
}

TEST_CASE("arellano-bond recovers the autoregressive parameter") {
  // quick per-rho check; the acceptance suite runs the full replication grid
  for (double rho : {0.0, 0.5}) {
    double mean = 0;
    const int reps = 25;
    for (int rep = 0; rep < reps; ++rep) {
      auto p = oracle::ar1_panel(200, 8, rho, 500 + rep * 7 + int(rho * 10));
      Dataset d(p.unit, p.year);
      d.add_column("y", p.y);
      AbSpec spec;
      spec.dependent = {"y", 0};
      spec.year_dummies = false;
      auto res = fit_arellano_bond(d, spec);
      mean += res.coef[0];
    }
    mean /= reps;
    CHECK(std::abs(mean - rho) < 0.05);
  }
}

TEST_CASE("within-group OLS shows the larger Nickell bias") {
  const double rho = 0.5;
  double ab_bias = 0, ols_bias = 0;
  const int reps = 30;
  for (int rep = 0; rep < reps; ++rep) {
    auto p = oracle::ar1_panel(200, 8, rho, 9000 + rep);
    Dataset d(p.unit, p.year);
    d.add_column("y", p.y);
    AbSpec spec;
    spec.dependent = {"y", 0};
    spec.year_dummies = false;
    auto res = fit_arellano_bond(d, spec);
    ab_bias += res.coef[0] - rho;
    ols_bias += oracle::within_ols_rho(p) - rho;
  }
  ab_bias = std::abs(ab_bias / reps);
  ols_bias = std::abs(ols_bias / reps);
  CHECK(ab_bias < ols_bias);
  CHECK(ols_bias > 0.1);  // the bias this design is known for
}

TEST_CASE("arellano-bond handles exogenous regressors and unbalanced panels") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double rho = 0.4, beta = 0.8;
  std::vector<std::string> unit;
  std::vector<int> year;
  std::vector<double> y, x;
  for (int g = 0; g < 300; ++g) {
    const double alpha = nd(rng);
    double yl = alpha / (1 - rho);
    for (int t = 0; t < 10; ++t) {
      const double xv = nd(rng);
      const double yv = rho * yl + beta * xv + alpha + 0.5 * nd(rng);
      yl = yv;
      if (t >= 1 && ud(rng) < 0.1) continue;  // unbalanced panel
      unit.push_back("G" + std::to_string(g));
      year.push_back(2000 + t);
      y.push_back(yv);
      x.push_back(xv);
    }
  }
  Dataset d(unit, year);
  d.add_column("y", y);
  d.add_column("x", x);
  AbSpec spec;
  spec.dependent = {"y", 0};
  spec.exogenous.push_back(make_term({{"x", 0}}));
  spec.year_dummies = true;
  auto res = fit_arellano_bond(d, spec);
  CHECK(std::abs(res.coef[0] - rho) < 0.08);
  CHECK(std::abs(res.coef[1] - beta) < 0.05);
}

TEST_CASE("arellano-bond warns when instruments crowd the group count") {
  auto p = oracle::ar1_panel(12, 9, 0.5, 3);
  Dataset d(p.unit, p.year);
  d.add_column("y", p.y);
  AbSpec spec;
  spec.dependent = {"y", 0};
  spec.year_dummies = false;
  auto res = fit_arellano_bond(d, spec);
  REQUIRE(!res.warnings.empty());
  CHECK(res.warnings[0].find("overfitting") != std::string::npos);
}

TEST_CASE("interaction builder") {
  Dataset d({"A", "A", "B"}, {2000, 2001, 2000});
  d.add_column("base", {2.0, 3.0, 4.0});
  d.add_column("sm", {1.0, 0.0, 1.0});
  d.add_column("dep", {0.0, 1.0, Dataset::kMissing});

  auto created = build_interactions(d, {"base"}, {{"", "sm"}, {"", "dep"}});
  // combos: sm, dep, sm*dep (the identity-only combo is the base column)
  REQUIRE(created.size() == 3);
  CHECK(d.column("base*sm")[0] == 2.0);
  CHECK(d.column("base*sm")[1] == 0.0);
  CHECK(d.column("base*dep")[0] == 0.0);
  CHECK(std::isnan(d.column("base*dep")[2]));  // missing factor -> missing
  CHECK(std::isnan(d.column("base*sm*dep")[2]));
  CHECK(d.column("base*sm*dep")[1] == 0.0);

  SUBCASE("unknown dummy name errors") {
    CHECK_THROWS(build_interactions(d, {"base"}, {{"nope"}}));
  }

  SUBCASE("products equal a column-wise oracle") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::string> u;
    std::vector<int> yr;
    std::vector<double> a, b, c;
    for (int i = 0; i < 50; ++i) {
      u.push_back("U" + std::to_string(i));
      yr.push_back(2000);
      a.push_back(nd(rng));
      b.push_back(nd(rng));
      c.push_back(nd(rng));
    }
    Dataset dd(u, yr);
    dd.add_column("a", a);
    dd.add_column("b", b);
    dd.add_column("c", c);
    build_interactions(dd, {"a"}, {{"", "b"}, {"", "c"}});
    for (int i = 0; i < 50; ++i) {
      CHECK(dd.column("a*b")[i] == doctest::Approx(a[i] * b[i]));
      CHECK(dd.column("a*b*c")[i] == doctest::Approx(a[i] * b[i] * c[i]));
    }
  }
}
