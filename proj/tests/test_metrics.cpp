#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "zpanel/metrics.hpp"

using namespace zpanel;

TEST_CASE("interest coverage flag") {
  CHECK(*interest_coverage_flag(5.0, 4.0) == true);   // ICR 1.25
  CHECK(*interest_coverage_flag(5.0, -2.0) == true);  // cannot cover
  CHECK(*interest_coverage_flag(5.0, 6.0) == false);
  CHECK(!interest_coverage_flag(std::nullopt, 4.0).has_value());
  CHECK(!interest_coverage_flag(5.0, std::nullopt).has_value());
  CHECK(!interest_coverage_flag(0.0, 4.0).has_value());
  CHECK(!interest_coverage_flag(-1.0, 4.0).has_value());

  SUBCASE("scale invariance") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_real_distribution<double> c(0.01, 100.0);
    for (int i = 0; i < 500; ++i) {
      const double xint = u(rng), ebitda = u(rng), k = c(rng);
      auto a = interest_coverage_flag(xint, ebitda);
      auto b = interest_coverage_flag(k * xint, k * ebitda);
      CHECK(a == b);
    }
  }
}

TEST_CASE("symmetric growth") {
  CHECK(*symmetric_growth(110, 100) == doctest::Approx(0.0952380952));
  CHECK(*symmetric_growth(5, 0) == doctest::Approx(2.0));
  CHECK(*symmetric_growth(0, 5) == doctest::Approx(-2.0));
  CHECK(!symmetric_growth(0, 0).has_value());
  CHECK_THROWS(symmetric_growth(-1, 5));

  SUBCASE("antisymmetry, bounds, first-order equivalence") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (int i = 0; i < 1000; ++i) {
      const double a = u(rng), b = u(rng);
      if (a == 0 && b == 0) continue;
      const double g = *symmetric_growth(a, b);
      CHECK(g == doctest::Approx(-*symmetric_growth(b, a)));
      CHECK(g >= -2.0);
      CHECK(g <= 2.0);
    }
    // sym -> classic growth as a -> b
    const double b = 100.0;
    double prev_gap = 1.0;
    for (double eps : {10.0, 1.0, 0.1, 0.01}) {
      const double a = b + eps;
      const double gap = std::abs(*symmetric_growth(a, b) - (a - b) / b);
      CHECK(gap < prev_gap);
      prev_gap = gap;
    }
  }
}

TEST_CASE("value added follows the expense decomposition") {
  LaborCostTable labor;
  labor.cost_per_capita[2005] = 40.0;

  FirmYear fy;
  fy.firm_id = "A";
  fy.year = 2005;
  fy.sale = 100.0;
  fy.ebitda = 20.0;  // OIBDP proxy: total expenses 80
  fy.xlr = 30.0;     // materials 50, VA 50
  CHECK(*value_added(fy, labor) == doctest::Approx(50.0));

  SUBCASE("labor proxy from employees when staff expense is absent") {
    fy.xlr.reset();
    fy.emp = 0.5;  // 500 employees
    // labor costs 0.5 * 1000 * 40 = 20000
    const double expected = 100.0 - ((100.0 - 20.0) - 20000.0);
    CHECK(*value_added(fy, labor) == doctest::Approx(expected));
  }
  SUBCASE("absent when inputs insufficient") {
    fy.xlr.reset();
    fy.emp.reset();
    CHECK(!value_added(fy, labor).has_value());
    fy.emp = 0.5;
    fy.year = 1999;  // no labor cost series coverage
    CHECK(!value_added(fy, labor).has_value());
  }
  SUBCASE("xlr present never consults the table") {
    LaborCostTable empty;
    FirmYear g = fy;
    g.xlr = 30.0;
    CHECK(value_added(g, empty).has_value());
  }
  SUBCASE("fixture rows equal a hand-computed sheet") {
    // (sale, oibdp, xlr, emp) -> VA = sale - ((sale - oibdp) - labor)
    struct Row {
      double sale, oibdp;
      std::optional<double> xlr, emp;
      double expect;
    };
    const Row rows[] = {
        {200, 50, 80, std::nullopt, 130},       // materials 70
        {500, -20, 100, std::nullopt, 80},      // negative oibdp
        {50, 10, std::nullopt, 0.1, 4010},      // proxy labor 4000
        {1000, 300, 250, 5.0, 550},             // xlr beats proxy
    };
    for (const auto& r : rows) {
      FirmYear x;
      x.year = 2005;
      x.sale = r.sale;
      x.ebitda = r.oibdp;
      x.xlr = r.xlr;
      x.emp = r.emp;
      CHECK(*value_added(x, labor) == doctest::Approx(r.expect));
    }
  }
}

TEST_CASE("tobins q proxy") {
  CHECK(*tobins_q_proxy(100.0, 100.0, 100.0) == doctest::Approx(1.0));
  CHECK(*tobins_q_proxy(100.0, 150.0, 50.0) == doctest::Approx(2.0));
  CHECK(!tobins_q_proxy(100.0, std::nullopt, 50.0).has_value());
  CHECK(!tobins_q_proxy(0.0, 150.0, 50.0).has_value());
  CHECK(!tobins_q_proxy(-5.0, 150.0, 50.0).has_value());
}

TEST_CASE("economic impact reproduces the published arithmetic") {
  CHECK(economic_impact(0.059, -0.539, 1.0) == doctest::Approx(-0.032).epsilon(0.01));
  CHECK(economic_impact(0.040, -0.815, 100.0) == doctest::Approx(-3.26));
  CHECK(economic_impact(3.147, -0.415, 0.01) ==
        doctest::Approx(-0.0131).epsilon(0.01));
}

TEST_CASE("derive_metrics fills ratios, logs and growth fields") {
  LaborCostTable labor;
  labor.cost_per_capita[2005] = 40.0;
  labor.cost_per_capita[2006] = 41.0;

  std::vector<FirmYear> rows;
  FirmYear a;
  a.firm_id = "A";
  a.year = 2005;
  a.naics2 = 31;
  a.at = 200.0;
  a.sale = 100.0;
  a.cogs = 60.0;
  a.ppent = 50.0;
  a.capx = 10.0;
  a.dltt = 40.0;
  a.dlc = 10.0;
  a.ib = 6.0;
  a.che = 20.0;
  a.lt = 100.0;
  a.xrd = 4.0;
  a.emp = 2.0;
  a.first_listed_year = 1995;
  FirmYear b = a;
  b.year = 2006;
  b.ppent = 55.0;
  b.emp = 2.2;
  b.sale = 110.0;
  rows.push_back(a);
  rows.push_back(b);

  // a second firm with a gap: growth fields stay absent across the gap
  FirmYear c = a;
  c.firm_id = "B";
  c.year = 2005;
  FirmYear d = a;
  d.firm_id = "B";
  d.year = 2007;
  rows.push_back(c);
  rows.push_back(d);

  Panel p(std::move(rows));
  auto derived = derive_metrics(p, labor);
  REQUIRE(derived.size() == 4);

  const auto& d05 = derived[0];
  CHECK(*d05.leverage == doctest::Approx(50.0 / 200.0));
  CHECK(*d05.asset_tangibility == doctest::Approx(0.25));
  CHECK(*d05.capx_over_assets == doctest::Approx(0.05));
  CHECK(*d05.roa == doctest::Approx(0.03));
  CHECK(*d05.rd_intensity == doctest::Approx(0.02));
  CHECK(*d05.cash_ratio == doctest::Approx(0.2));
  CHECK(d05.age == 10);
  CHECK(*d05.log_at == doctest::Approx(std::log(200.0)));
  CHECK(!d05.emp_growth_sym.has_value());  // no prior year

  const auto& d06 = derived[1];
  CHECK(*d06.emp_growth_sym ==
        doctest::Approx((2.2 - 2.0) / (0.5 * (2.2 + 2.0))));
  CHECK(*d06.dlog_k == doctest::Approx(std::log(55.0) - std::log(50.0)));
  CHECK(*d06.dlog_sale == doctest::Approx(std::log(110.0) - std::log(100.0)));

  const auto& gap = derived[3];
  CHECK(gap.firm_id == "B");
  CHECK(gap.year == 2007);
  CHECK(!gap.dlog_k.has_value());  // 2006 missing breaks the chain

  SUBCASE("ratios absent on nonpositive denominators, never NaN") {
    std::vector<FirmYear> bad(1);
    bad[0].firm_id = "Z";
    bad[0].year = 2005;
    bad[0].naics2 = 31;
    bad[0].at = 0.0;
    bad[0].dltt = 5.0;
    bad[0].dlc = 5.0;
    bad[0].ib = 1.0;
    bad[0].first_listed_year = 2000;
    Panel q(std::move(bad));
    auto out = derive_metrics(q, labor);
    CHECK(!out[0].leverage.has_value());
    CHECK(!out[0].roa.has_value());
    CHECK(!out[0].log_at.has_value());
  }

  SUBCASE("raw q governs even when proxy inputs exist") {
    std::vector<FirmYear> r(1);
    r[0].firm_id = "Q";
    r[0].year = 2005;
    r[0].naics2 = 31;
    r[0].at = 100.0;
    r[0].lt = 40.0;
    r[0].market_equity = 90.0;
    r[0].tobins_q = 3.0;
    r[0].first_listed_year = 2000;
    Panel q(std::move(r));
    auto out = derive_metrics(q, labor);
    CHECK(*out[0].tobins_q_filled == 3.0);
    CHECK(!out[0].tobins_q_is_proxy);
  }

  SUBCASE("proxy fills only when raw q is absent") {
    std::vector<FirmYear> r(1);
    r[0].firm_id = "Q";
    r[0].year = 2005;
    r[0].naics2 = 31;
    r[0].at = 100.0;
    r[0].lt = 40.0;
    r[0].market_equity = 90.0;  // book equity 60 -> q = 1.3
    r[0].first_listed_year = 2000;
    Panel q(std::move(r));
    auto out = derive_metrics(q, labor);
    CHECK(*out[0].tobins_q_filled == doctest::Approx(1.3));
    CHECK(out[0].tobins_q_is_proxy);
  }
}
