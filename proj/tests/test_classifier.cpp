#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "zpanel/classifier.hpp"
#include "zpanel/metrics.hpp"

using namespace zpanel;

namespace {

// compact firm-year builder for classification fixtures
struct FY {
  std::string firm;
  int year;
  std::optional<double> xint = 1.0;
  std::optional<double> ebitda = 2.0;  // healthy default: covered interest
  std::optional<double> q = 1.5;
  std::optional<double> emp = 5.0;
  int listed = 1990;
  bool exit_flag = false;
};

Panel build_panel(const std::vector<FY>& fys) {
  std::vector<FirmYear> rows;
  for (const auto& f : fys) {
    FirmYear r;
    r.firm_id = f.firm;
    r.year = f.year;
    r.naics2 = 31;
    r.at = 100.0;
    r.xint = f.xint;
    r.ebitda = f.ebitda;
    r.tobins_q = f.q;
    r.emp = f.emp;
    r.first_listed_year = f.listed;
    r.exit_flag = f.exit_flag;
    rows.push_back(std::move(r));
  }
  return Panel(std::move(rows));
}

std::vector<ClassifiedFirmYear> classify(
    const Panel& p, const std::vector<DebtInstrument>& instruments = {},
    int threads = 1) {
  LaborCostTable labor;
  auto derived = derive_metrics(p, labor);
  return classify_panel(p, derived, instruments, threads);
}

const ClassifiedFirmYear& at(const std::vector<ClassifiedFirmYear>& v,
                             const std::string& firm, int year) {
  for (const auto& c : v)
    if (c.firm_id == firm && c.year == year) return c;
  throw std::runtime_error("row not found " + firm);
}

constexpr double kZ = 0.5;  // ebitda below xint: low coverage flag

}  // namespace

TEST_CASE("classify_broad rule table") {
  // flags (t-2, t-1, t) all true and age >= 10
  CHECK(*classify_broad({2004, 2005, 2006}, {true, true, true},
                        {10, 11, 12})[2] == true);
  // age gate
  CHECK(*classify_broad({2004, 2005, 2006}, {true, true, true},
                        {6, 7, 8})[2] == false);
  // broken streak by missing data: undetermined
  CHECK(!classify_broad({2004, 2005, 2006}, {true, std::nullopt, true},
                        {10, 11, 12})[2]
             .has_value());
  // an absent flag dominates a false one
  CHECK(!classify_broad({2004, 2005, 2006}, {std::nullopt, false, true},
                        {10, 11, 12})[2]
             .has_value());
  // all present with one false: determined false
  CHECK(*classify_broad({2004, 2005, 2006}, {true, false, true},
                        {10, 11, 12})[2] == false);
  // calendar gap in the history breaks the streak
  auto with_gap = classify_broad({2004, 2006, 2007}, {true, true, true},
                                 {10, 12, 13});
  CHECK(!with_gap[2].has_value());  // 2005 flag not observed
}

TEST_CASE("classify_narrow branch table") {
  auto s = classify_narrow(true, 0.8, 1.1);
  CHECK(*s.z_narrow_x == true);
  CHECK(*s.z_nar == true);

  s = classify_narrow(true, std::nullopt, 1.1);
  CHECK(!s.z_narrow_x.has_value());
  CHECK(*s.z_nar == true);  // fails to report Q

  s = classify_narrow(true, 1.5, 1.1);
  CHECK(*s.z_narrow_x == false);
  CHECK(*s.z_nar == false);

  s = classify_narrow(false, 0.8, 1.1);
  CHECK(*s.z_narrow_x == false);
  CHECK(*s.z_nar == false);

  s = classify_narrow(std::nullopt, 0.8, 1.1);
  CHECK(!s.z_narrow_x.has_value());
  CHECK(!s.z_nar.has_value());

  // no median (zero reporters): comparison impossible
  s = classify_narrow(true, 0.8, std::nullopt);
  CHECK(!s.z_narrow_x.has_value());
  CHECK(!s.z_nar.has_value());
}

TEST_CASE("12-firm fixture matches the hand-derived truth table") {
  std::vector<FY> fys;
  auto add_years = [&fys](const std::string& firm, auto&& fn) {
    for (int y = 2002; y <= 2007; ++y) {
      FY f;
      f.firm = firm;
      f.year = y;
      fn(f, y);
      fys.push_back(f);
    }
  };

  // F01 textbook zombie: low coverage all years, old, Q below median
  add_years("F01", [](FY& f, int) {
    f.ebitda = kZ;
    f.q = 0.5;
  });
  // F02 low coverage, young at first (listed 1996: age 10 reached in 2006)
  add_years("F02", [](FY& f, int) {
    f.ebitda = kZ;
    f.listed = 1996;
    f.q = 0.5;
  });
  // F03 low coverage but EBITDA missing in 2003
  add_years("F03", [](FY& f, int y) {
    f.ebitda = y == 2003 ? std::optional<double>() : std::optional<double>(kZ);
    f.q = 0.5;
  });
  // F04 healthy throughout
  add_years("F04", [](FY&, int) {});
  // F05 zombie conditions, never reports Q
  add_years("F05", [](FY& f, int) {
    f.ebitda = kZ;
    f.q = std::nullopt;
  });
  // F06 zombie conditions, Q above median
  add_years("F06", [](FY& f, int) {
    f.ebitda = kZ;
    f.q = 3.0;
  });
  // F07 healthy, exits 2005 by liquidation, stops reporting Q from 2003
  for (int y = 2002; y <= 2005; ++y) {
    FY f;
    f.firm = "F07";
    f.year = y;
    if (y >= 2003) f.q = std::nullopt;
    f.exit_flag = y == 2005;
    fys.push_back(f);
  }
  // F08 healthy, leaves the panel in 2006 without liquidation
  for (int y = 2002; y <= 2006; ++y) {
    FY f;
    f.firm = "F08";
    f.year = y;
    fys.push_back(f);
  }
  // F09 small firm with employment missing in 2004
  add_years("F09", [](FY& f, int y) {
    f.emp = y == 2004 ? std::optional<double>() : std::optional<double>(0.5);
  });
  // F10 medium-sized firm at the 250-employee boundary
  add_years("F10", [](FY& f, int) { f.emp = 0.25; });
  // F11 large bank-dependent firm (instruments below)
  add_years("F11", [](FY& f, int) { f.emp = 5.0; });
  // F12 capital-market firm with one long bond (instruments below)
  add_years("F12", [](FY& f, int) {});

  std::vector<DebtInstrument> instruments = {
      {"F11", "C1", 2004, DebtType::BL, 10.0, 4},
      {"F11", "C2", 2005, DebtType::BN, 5.0, 30},
      {"F12", "C3", 2004, DebtType::BN, 7.0, 30},
  };

  Panel p = build_panel(fys);
  auto out = classify(p, instruments);

  // --- zombie statuses ---
  // first two years are undetermined for every firm: flag years precede
  // panel coverage
  for (const std::string f : {"F01", "F02", "F04", "F05", "F06"}) {
    CHECK(!at(out, f, 2002).z_broad.has_value());
    CHECK(!at(out, f, 2003).z_broad.has_value());
    CHECK(!at(out, f, 2002).z_nar.has_value());
  }
  for (int y = 2004; y <= 2007; ++y) {
    CHECK(*at(out, "F01", y).z_broad == true);
    CHECK(*at(out, "F01", y).z_narrow_x == true);
    CHECK(*at(out, "F01", y).z_nar == true);
    CHECK(*at(out, "F04", y).z_broad == false);
    CHECK(*at(out, "F04", y).z_narrow_x == false);
    CHECK(*at(out, "F04", y).z_nar == false);
  }
  // F02: age reaches 10 only in 2006
  CHECK(*at(out, "F02", 2004).z_broad == false);
  CHECK(*at(out, "F02", 2005).z_broad == false);
  CHECK(*at(out, "F02", 2006).z_broad == true);
  CHECK(*at(out, "F02", 2007).z_broad == true);
  // F03: 2003 gap leaves 2004 and 2005 undetermined; 2006 determined
  CHECK(!at(out, "F03", 2004).z_broad.has_value());
  CHECK(!at(out, "F03", 2005).z_broad.has_value());
  CHECK(*at(out, "F03", 2006).z_broad == true);
  CHECK(!at(out, "F03", 2004).z_nar.has_value());
  // F05: missing Q puts it in the nar set but not in narrow_x
  CHECK(*at(out, "F05", 2004).z_nar == true);
  CHECK(!at(out, "F05", 2004).z_narrow_x.has_value());
  // F06: above-median Q: a broad zombie that the narrow sets exclude
  CHECK(*at(out, "F06", 2004).z_broad == true);
  CHECK(*at(out, "F06", 2004).z_narrow_x == false);
  CHECK(*at(out, "F06", 2004).z_nar == false);

  // --- exit and newbie flags ---
  CHECK(at(out, "F07", 2005).e_exit == true);
  CHECK(at(out, "F07", 2004).e_exit == false);
  CHECK(at(out, "F08", 2006).e_exit == false);  // no liquidation flag
  for (const auto& c : out) CHECK(c.nb == (c.year == 2002));

  // --- SME ---
  CHECK(!at(out, "F09", 2004).sm.has_value());
  CHECK(*at(out, "F09", 2005).sm == true);  // 500 employees
  CHECK(*at(out, "F10", 2004).sm == true);  // 250 employees: medium, SME
  CHECK(*at(out, "F11", 2004).sm == false);

  // --- dependence and bond access ---
  CHECK(at(out, "F11", 2004).bank_dep == true);    // 10 > 5
  CHECK(at(out, "F11", 2004).capm_dep == false);
  CHECK(at(out, "F11", 2004).has_instruments == true);
  CHECK(at(out, "F12", 2004).bank_dep == false);   // 0 > 7 fails
  CHECK(at(out, "F12", 2004).capm_dep == true);
  CHECK(at(out, "F12", 2004).bond_long == true);
  CHECK(at(out, "F12", 2004).bond_short == false);
  CHECK(at(out, "F04", 2004).has_instruments == false);
  CHECK(at(out, "F04", 2004).bank_dep == false);
  CHECK(at(out, "F04", 2004).capm_dep == true);  // complement convention
}

TEST_CASE("industry medians computed over reporting firms per year") {
  std::vector<FY> fys;
  for (int i = 0; i < 4; ++i) {
    FY f;
    f.firm = "F" + std::to_string(i);
    f.year = 2004;
    f.q = 1.0 + i;  // 1, 2, 3, 4 -> median 2.5
    fys.push_back(f);
  }
  FY noq;
  noq.firm = "F9";
  noq.year = 2004;
  noq.q = std::nullopt;
  fys.push_back(noq);
  Panel p = build_panel(fys);
  LaborCostTable labor;
  auto derived = derive_metrics(p, labor);
  auto med = industry_median_q(derived);
  CHECK(med.at({31, 2004}) == doctest::Approx(2.5));
}

TEST_CASE("nesting invariant on random panels") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> listed(1985, 2003);
  int determined_triples = 0;
  for (int panel_i = 0; panel_i < 1000; ++panel_i) {
    std::vector<FY> fys;
    const int firms = 4 + panel_i % 5;
    for (int f = 0; f < firms; ++f) {
      const int first = 2002 + int(u(rng) * 3);
      const int last = first + 2 + int(u(rng) * 4);
      for (int y = first; y <= last; ++y) {
        FY r;
        r.firm = "F" + std::to_string(f);
        r.year = y;
        r.listed = listed(rng);
        r.ebitda = u(rng) < 0.15 ? std::optional<double>()
                                 : std::optional<double>(u(rng) < 0.5 ? kZ : 2.0);
        r.q = u(rng) < 0.3 ? std::optional<double>()
                           : std::optional<double>(0.2 + 3.0 * u(rng));
        fys.push_back(r);
      }
    }
    Panel p = build_panel(fys);
    auto out = classify(p);
    for (const auto& c : out) {
      // z_narrow_x => z_nar => z_broad whenever determined
      if (c.z_narrow_x && *c.z_narrow_x) {
        REQUIRE(c.z_nar.has_value());
        CHECK(*c.z_nar);
      }
      if (c.z_nar && *c.z_nar) {
        REQUIRE(c.z_broad.has_value());
        CHECK(*c.z_broad);
      }
      if (c.z_broad && c.z_narrow_x && c.z_nar) ++determined_triples;
    }
    // per-year prevalence ordering with determinable denominators
    std::map<int, std::array<long, 4>> counts;  // det_b, z_b, det_n, z_n
    for (const auto& c : out) {
      auto& a = counts[c.year];
      if (c.z_broad) {
        ++a[0];
        if (*c.z_broad) ++a[1];
      }
      if (c.z_nar) {
        ++a[2];
        if (*c.z_nar) ++a[3];
      }
    }
    for (const auto& [y, a] : counts) {
      if (a[0] == 0 || a[2] == 0) continue;
      const double share_b = double(a[1]) / a[0];
      const double share_n = double(a[3]) / a[2];
      CHECK(share_n <= share_b + 1e-12);
    }
  }
  CHECK(determined_triples > 1000);  // the property was actually exercised
}

TEST_CASE("lowering Q never flips z_nar from true to false") {
  std::vector<FY> fys;
  for (int f = 0; f < 6; ++f)
    for (int y = 2002; y <= 2006; ++y) {
      FY r;
      r.firm = "F" + std::to_string(f);
      r.year = y;
      r.ebitda = f < 3 ? kZ : 2.0;
      r.q = 1.0 + 0.3 * f;
      fys.push_back(r);
    }
  Panel p = build_panel(fys);
  LaborCostTable labor;
  auto derived = derive_metrics(p, labor);
  auto med = industry_median_q(derived);

  for (int f = 0; f < 6; ++f)
    for (int y = 2004; y <= 2006; ++y) {
      const auto m = med.at({31, y});
      for (double q0 : {0.5, 1.2, 2.0}) {
        auto hi = classify_narrow(true, q0, m);
        auto lo = classify_narrow(true, q0 * 0.5, m);
        if (hi.z_nar && *hi.z_nar) {
          REQUIRE(lo.z_nar.has_value());
          CHECK(*lo.z_nar);  // lowering keeps it a zombie
        }
      }
    }
}

TEST_CASE("exit and missingness phi") {
  SUBCASE("brute-force oracle on a fixture") {
    std::vector<FY> fys;
    // 10 firms; 3 liquidate and stop reporting Q beforehand; 1 liquidates
    // while reporting; healthy firms always report
    for (int f = 0; f < 10; ++f) {
      const bool liq = f < 3 || f == 5;
      const bool hide = f < 3;
      const int last = liq ? 2006 : 2007;
      for (int y = 2002; y <= last; ++y) {
        FY r;
        r.firm = "F" + std::to_string(f);
        r.year = y;
        if (hide && y >= last - 2) r.q = std::nullopt;
        r.exit_flag = liq && y == last;
        fys.push_back(r);
      }
    }
    Panel p = build_panel(fys);
    auto diag = exit_and_missingness(p, "tobins_q");
    REQUIRE(diag.correlation.has_value());

    // oracle: recompute phi directly
    std::vector<int> e, vb;
    for (const auto& [firm, range] : p.firms()) {
      const auto& rows = p.rows();
      for (size_t i = range.begin; i < range.end; ++i) {
        const bool exit_now =
            rows[i].exit_flag && i == range.end - 1;
        bool miss = false;
        for (int back = 0; back < 3; ++back) {
          const FirmYear* fy = p.find(firm, rows[i].year - back);
          if (!fy || !fy->tobins_q) miss = true;
        }
        e.push_back(exit_now);
        vb.push_back(exit_now && miss);
      }
    }
    const double n = double(e.size());
    double me = 0, mv = 0;
    for (size_t i = 0; i < e.size(); ++i) {
      me += e[i];
      mv += vb[i];
    }
    me /= n;
    mv /= n;
    double cov = 0, ve = 0, vv = 0;
    for (size_t i = 0; i < e.size(); ++i) {
      cov += (e[i] - me) * (vb[i] - mv);
      ve += (e[i] - me) * (e[i] - me);
      vv += (vb[i] - mv) * (vb[i] - mv);
    }
    CHECK(*diag.correlation ==
          doctest::Approx(cov / std::sqrt(ve * vv)).epsilon(1e-12));
    CHECK(*diag.correlation > 0.5);  // hides dominate the exits
  }

  SUBCASE("variable never missing: zero variance, absent with note") {
    std::vector<FY> fys;
    for (int f = 0; f < 4; ++f)
      for (int y = 2002; y <= 2007; ++y) {
        FY r;
        r.firm = "F" + std::to_string(f);
        r.year = y;
        r.exit_flag = f == 0 && y == 2007;
        fys.push_back(r);
      }
    // Q reported everywhere, but the first two years of each firm have an
    // incomplete 3-year window; use xint which is also always present
    Panel p = build_panel(fys);
    auto diag = exit_and_missingness(p, "xint");
    // xint present in every covered year, but early years look back
    // beyond coverage; the 2007 exit occurs late so V^B == 0
    CHECK(!diag.correlation.has_value());
    CHECK(!diag.note.empty());
  }
}

TEST_CASE("dependence flags ignore instruments that fail acceptance") {
  std::vector<FY> fys;
  for (int y = 2002; y <= 2006; ++y) {
    FY f;
    f.firm = "F1";
    f.year = y;
    fys.push_back(f);
  }
  std::vector<FirmYear> rows;
  for (const auto& f : fys) {
    FirmYear r;
    r.firm_id = f.firm;
    r.year = f.year;
    r.naics2 = 31;
    r.at = 100.0;
    r.dltt = 30.0;
    r.dlc = 10.0;
    r.xint = f.xint;
    r.ebitda = f.ebitda;
    r.tobins_q = f.q;
    r.emp = f.emp;
    r.first_listed_year = f.listed;
    rows.push_back(std::move(r));
  }
  Panel p(std::move(rows));

  std::vector<DebtInstrument> instruments = {
      {"F1", "C1", 2003, DebtType::BN, 20.0, 30},
  };
  AcceptanceReport rep;
  auto accepted = accept_by_face_value(instruments, p, rep);
  auto base = classify(p, accepted);

  // a bank loan whose face exceeds total debt is rejected upstream and
  // must leave every firm flag unchanged
  instruments.push_back({"F1", "C2", 2003, DebtType::BL, 500.0, 4});
  auto accepted2 = accept_by_face_value(instruments, p, rep);
  CHECK(accepted2.size() == accepted.size());
  auto with_rejected = classify(p, accepted2);
  REQUIRE(base.size() == with_rejected.size());
  for (size_t i = 0; i < base.size(); ++i) {
    CHECK(base[i].bank_dep == with_rejected[i].bank_dep);
    CHECK(base[i].capm_dep == with_rejected[i].capm_dep);
    CHECK(base[i].bond_long == with_rejected[i].bond_long);
    CHECK(base[i].has_instruments == with_rejected[i].has_instruments);
  }
}

TEST_CASE("threaded classification matches the serial run") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FY> fys;
  for (int f = 0; f < 200; ++f)
    for (int y = 2002; y <= 2009; ++y) {
      FY r;
      r.firm = "F" + std::to_string(f);
      r.year = y;
      r.ebitda = u(rng) < 0.3 ? kZ : 2.0;
      r.q = u(rng) < 0.2 ? std::optional<double>()
                         : std::optional<double>(0.3 + 2.0 * u(rng));
      fys.push_back(r);
    }
  Panel p = build_panel(fys);
  auto a = classify(p, {}, 1);
  auto b = classify(p, {}, 8);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].firm_id == b[i].firm_id);
    CHECK(a[i].z_nar == b[i].z_nar);
    CHECK(a[i].sm == b[i].sm);
  }
}
