#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "zpanel/tfp.hpp"

using namespace zpanel::tfp;

namespace {

// Cobb-Douglas DGP with persistent productivity, investment responding to
// productivity, and capital accumulating from investment.
struct DgpResult {
  std::vector<TfpInput> rows;
  double beta_free;
  double beta_k;
  std::vector<double> omega;  // true productivity per row
};

DgpResult cobb_douglas_panel(int n_firms, int n_years, unsigned long long seed,
                             double beta_free = 0.6, double beta_k = 0.4,
                             int n_industries = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double rho = 0.7, sd_xi = 0.2, delta = 0.1;
  const double inv_c0 = -2.0, inv_ck = 0.1, inv_cw = 1.0;

  DgpResult out;
  out.beta_free = beta_free;
  out.beta_k = beta_k;
  for (int f = 0; f < n_firms; ++f) {
    double omega = sd_xi / std::sqrt(1 - rho * rho) * nd(rng);
    double k = 2.0 + 0.5 * nd(rng);  // log capital
    for (int t = 0; t < n_years; ++t) {
      const double i = inv_c0 + inv_ck * k + inv_cw * omega;  // log investment
      const double m = 1.0 + 0.3 * k + 0.5 * omega + 0.3 * nd(rng);
      const double y = beta_free * m + beta_k * k + omega + 0.1 * nd(rng);
      TfpInput row;
      row.firm_id = "F" + std::to_string(f);
      row.year = 2000 + t;
      row.naics2 = 30 + f % n_industries;
      row.log_sale = y;
      row.log_cogs = m;
      row.log_ppent = k;
      row.log_capx = i;
      out.rows.push_back(row);
      out.omega.push_back(omega);
      // transition
      k = std::log((1 - delta) * std::exp(k) + std::exp(i));
      omega = rho * omega + sd_xi * nd(rng);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("olley-pakes recovers both elasticities on the simulated DGP") {
  // a few replications at desk scale; the acceptance suite runs the full grid
  double err_free = 0, err_k = 0;
  const int reps = 6;
  for (int rep = 0; rep < reps; ++rep) {
    auto dgp = cobb_douglas_panel(2000, 10, 100 + rep);
    TfpConfig cfg;
    cfg.min_obs_per_industry = 100;
    auto res = estimate_tfp(dgp.rows, cfg);
    REQUIRE(res.fits.size() == 1);
    err_free += std::abs(res.fits[0].beta_free - dgp.beta_free);
    err_k += std::abs(res.fits[0].beta_k - dgp.beta_k);
    CHECK(res.fits[0].converged);
  }
  CHECK(err_free / reps < 0.05);
  CHECK(err_k / reps < 0.05);
}

TEST_CASE("mean absolute elasticity error shrinks with sample size") {
  auto run = [](int firms, unsigned long long seed) {
    auto dgp = cobb_douglas_panel(firms, 10, seed);
    TfpConfig cfg;
    cfg.min_obs_per_industry = 50;
    auto res = estimate_tfp(dgp.rows, cfg);
    return std::abs(res.fits[0].beta_free - 0.6) +
           std::abs(res.fits[0].beta_k - 0.4);
  };
  double small = 0, large = 0;
  const int reps = 5;
  for (int rep = 0; rep < reps; ++rep) {
    small += run(200, 40 + rep);   // ~2,000 firm-years
    large += run(2000, 80 + rep);  // ~20,000 firm-years
  }
  CHECK(large / reps < small / reps);
}

TEST_CASE("degenerate exact fit: sale = 0.5 cogs with constant capital") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<TfpInput> rows;
  for (int f = 0; f < 50; ++f)
    for (int t = 0; t < 5; ++t) {
      TfpInput r;
      r.firm_id = "F" + std::to_string(f);
      r.year = 2000 + t;
      r.naics2 = 31;
      r.log_cogs = nd(rng);
      r.log_sale = 0.5 * r.log_cogs;
      r.log_ppent = 1.7;  // constant capital stock
      r.log_capx = nd(rng);
      rows.push_back(r);
    }
  TfpConfig cfg;
  cfg.min_obs_per_industry = 100;
  auto res = estimate_tfp(rows, cfg);
  REQUIRE(res.fits.size() == 1);
  CHECK(res.fits[0].beta_free == doctest::Approx(0.5).epsilon(1e-9));
  // productivity residual collapses to a constant
  double lo = res.rows[0].tfp, hi = res.rows[0].tfp;
  for (const auto& r : res.rows) {
    lo = std::min(lo, r.tfp);
    hi = std::max(hi, r.tfp);
  }
  CHECK(hi - lo < 1e-8);
}

TEST_CASE("scale equivariance: scaling sales shifts tfp by log c only") {
  auto dgp = cobb_douglas_panel(300, 8, 9);
  TfpConfig cfg;
  cfg.min_obs_per_industry = 50;
  auto base = estimate_tfp(dgp.rows, cfg);

  const double log_c = std::log(3.0);
  auto scaled_rows = dgp.rows;
  for (auto& r : scaled_rows) r.log_sale += log_c;
  auto scaled = estimate_tfp(scaled_rows, cfg);

  CHECK(scaled.fits[0].beta_free ==
        doctest::Approx(base.fits[0].beta_free).epsilon(1e-6));
  CHECK(std::abs(scaled.fits[0].beta_k - base.fits[0].beta_k) <=
        2 * cfg.tol + 1e-9);
  for (size_t i = 0; i < base.rows.size(); ++i)
    CHECK(scaled.rows[i].tfp - base.rows[i].tfp ==
          doctest::Approx(log_c).epsilon(1e-4));
}

TEST_CASE("stage-1 normal equations hold to 1e-8") {
  auto dgp = cobb_douglas_panel(500, 8, 21);
  TfpConfig cfg;
  cfg.min_obs_per_industry = 50;
  auto res = estimate_tfp(dgp.rows, cfg);
  for (const auto& f : res.fits) CHECK(f.stage1_orthogonality < 1e-8);
}

TEST_CASE("deterministic: identical inputs give bit-identical results") {
  auto dgp = cobb_douglas_panel(200, 6, 5);
  TfpConfig cfg;
  cfg.min_obs_per_industry = 50;
  auto a = estimate_tfp(dgp.rows, cfg);
  auto b = estimate_tfp(dgp.rows, cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i)
    CHECK(a.rows[i].tfp == b.rows[i].tfp);
  CHECK(a.fits[0].beta_k == b.fits[0].beta_k);
}

TEST_CASE("per-industry estimation with pooled fallback for thin industries") {
  auto big = cobb_douglas_panel(400, 8, 11, 0.6, 0.4, 1);
  auto thin = cobb_douglas_panel(5, 8, 12, 0.6, 0.4, 1);
  for (auto& r : thin.rows) r.naics2 = 99;
  std::vector<TfpInput> rows = big.rows;
  rows.insert(rows.end(), thin.rows.begin(), thin.rows.end());

  TfpConfig cfg;
  cfg.min_obs_per_industry = 200;
  auto res = estimate_tfp(rows, cfg);
  bool has_pooled = false, has_30 = false;
  for (const auto& f : res.fits) {
    if (f.naics2 == -1) has_pooled = true;
    if (f.naics2 == 30) has_30 = true;
  }
  CHECK(has_pooled);
  CHECK(has_30);
  for (const auto& r : res.rows)
    if (r.naics2 == 99) CHECK(r.fit_industry == -1);
}

TEST_CASE("non-convergence is flagged but productivity is still emitted") {
  auto dgp = cobb_douglas_panel(200, 8, 31);
  TfpConfig cfg;
  cfg.min_obs_per_industry = 50;
  cfg.max_iter = 1;
  auto res = estimate_tfp(dgp.rows, cfg);
  CHECK(!res.fits[0].converged);
  CHECK(!res.fits[0].warning.empty());
  CHECK(res.rows.size() == dgp.rows.size());
}

TEST_CASE("rank-deficient stage 1 names the industry") {
  // the free variable is an exact function of the controls
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<TfpInput> rows;
  for (int f = 0; f < 60; ++f)
    for (int t = 0; t < 5; ++t) {
      TfpInput r;
      r.firm_id = "F" + std::to_string(f);
      r.year = 2000 + t;
      r.naics2 = 45;
      r.log_ppent = nd(rng);
      r.log_capx = nd(rng);
      r.log_cogs = 0.3 * r.log_ppent + 0.5 * r.log_capx;
      r.log_sale = 0.6 * r.log_cogs + 0.4 * r.log_ppent + nd(rng);
      rows.push_back(r);
    }
  TfpConfig cfg;
  cfg.min_obs_per_industry = 100;
  CHECK_THROWS_WITH_AS(estimate_tfp(rows, cfg), doctest::Contains("45"),
                       std::runtime_error);
}

TEST_CASE("config validation") {
  std::vector<TfpInput> rows(1);
  TfpConfig cfg;
  cfg.poly_degree = 5;
  CHECK_THROWS(estimate_tfp(rows, cfg));
  cfg.poly_degree = 3;
  cfg.tol = 0;
  CHECK_THROWS(estimate_tfp(rows, cfg));
  cfg.tol = 1e-6;
  CHECK_THROWS(estimate_tfp({}, cfg));
}

TEST_CASE("threaded industry estimation matches the serial run") {
  auto dgp = cobb_douglas_panel(600, 7, 55, 0.6, 0.4, 4);
  TfpConfig serial;
  serial.min_obs_per_industry = 100;
  TfpConfig parallel = serial;
  parallel.threads = 4;
  auto a = estimate_tfp(dgp.rows, serial);
  auto b = estimate_tfp(dgp.rows, parallel);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].firm_id == b.rows[i].firm_id);
    CHECK(a.rows[i].tfp == b.rows[i].tfp);
  }
}
