#include "zpanel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "zpanel/csv.hpp"

namespace zpanel::synth {

namespace {

const std::vector<int> kIndustryCodes = {21, 23, 31, 32, 33, 42, 44, 45, 48,
                                         49, 51, 53, 54, 56, 61, 62, 71, 72};

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(unsigned long long seed) : eng(seed) {}
  double uniform(double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(eng);
  }
  double normal(double sd) {
    return sd > 0 ? std::normal_distribution<double>(0.0, sd)(eng) : 0.0;
  }
  bool bern(double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(eng) < p;
  }
  int poisson(double lambda) {
    return std::poisson_distribution<int>(lambda)(eng);
  }
  int uniform_int(int a, int b) {
    return std::uniform_int_distribution<int>(a, b)(eng);
  }
};

enum class Tri { False, True, Undet };

std::optional<bool> tri_opt(Tri t) {
  if (t == Tri::Undet) return std::nullopt;
  return t == Tri::True;
}

struct FirmDraft {
  std::string id;
  int naics2 = 0;
  int entry = 0;
  int last = 0;
  int first_listed_year = 0;
  bool zombie_prone = false;
  bool small = false;
  bool liquidates = false;
  bool hide_q_at_exit = false;
  int distress_start = -1, distress_len = 0;
  double fe_tfp = 0, fe_cap = 0, fe_emp = 0, fe_nbg = 0;
  // per-year series, index k = year - entry
  std::vector<double> at, dltt, dlc, ib, che, lt, xrd, xint;
  std::vector<std::optional<double>> ebitda, q, market_equity, xlr;
  std::vector<double> emp, ppent, capx, sale, cogs;
  int n_years() const { return last - entry + 1; }
};

struct CellKey {
  int s = 0, t = 0;
  bool operator<(const CellKey& o) const {
    return std::tie(s, t) < std::tie(o.s, o.t);
  }
};

struct CellAgg {
  double bc_num = 0, bc_den = 0, bn_num = 0, bn_den = 0;
  double bc_all = 0, bn_all = 0;
  double bc_zvol = 0, bn_zvol = 0;
};

struct Generator {
  const DgpConfig& cfg;
  Rng rng;
  std::vector<int> industries;
  std::vector<FirmDraft> firms;
  std::vector<DebtInstrument> reported;   // includes duplicate re-reports
  std::vector<DebtInstrument> effective;  // first reporting only
  std::vector<std::vector<Tri>> z_broad, z_narrow_x, z_nar;
  std::map<CellKey, CellAgg> cells_short, cells_long;
  std::map<CellKey, double> median_q;
  TruthManifest truth;
  long component_counter = 0;

  explicit Generator(const DgpConfig& c) : cfg(c), rng(c.seed) {}

  int end_year() const { return cfg.start_year + cfg.n_years - 1; }

  void validate() const {
    if (cfg.n_firms < 10 || cfg.n_years < 6)
      throw std::runtime_error(
          "infeasible config: need >= 10 firms and >= 6 years");
    if (cfg.n_industries < 1 ||
        cfg.n_industries > static_cast<int>(kIndustryCodes.size()))
      throw std::runtime_error("infeasible config: 1..18 industries supported");
    if (cfg.zombie_rate < 0 || cfg.zombie_rate > 0.6)
      throw std::runtime_error(
          "infeasible config: zombie_rate outside [0, 0.6] cannot be planted "
          "with determinable histories");
    if (cfg.planted.tfp && cfg.planted.capital)
      throw std::runtime_error(
          "infeasible config: tfp and capital effects cannot be planted "
          "together (the exact productivity chain pins the capital stock)");
    if (cfg.planted.employment && cfg.planted.newbie_growth)
      throw std::runtime_error(
          "infeasible config: employment and newbie-growth effects both "
          "drive the employment path");
    if (cfg.planted.tfp && cfg.planted.newbie_growth)
      throw std::runtime_error(
          "infeasible config: the newbie-growth sales control and the "
          "productivity chain are mutually recursive");
  }

  // -----------------------------------------------------------------------
  // roster and statements
  // -----------------------------------------------------------------------

  double death_prob() const {
    return 1.0 - std::pow(1.0 - cfg.exit_rate, 1.0 / cfg.n_years);
  }

  // Zombie-prone firm share hitting the target prevalence: 3/4 of a prone
  // firm's determinable years classify as zombies (half hide Q, a quarter
  // report below the median), while hidden-EBITDA spells shrink the healthy
  // determinable denominator by about 6%.
  double prone_probability() const {
    return std::min(0.95,
                    0.94 * cfg.zombie_rate / (0.75 - 0.06 * cfg.zombie_rate));
  }

  // share of liquidating firms made to hide Q, solving
  // phi^2 ~= q_eff with q_eff = q_hide + (1 - q_hide) * baseline, where the
  // baseline covers zombie non-reporting and sub-3-year histories
  double hide_probability() const {
    const double baseline =
        std::min(0.9, prone_probability() * 0.875 + 2.0 / cfg.n_years);
    const double target = cfg.phi_target * cfg.phi_target;
    return std::clamp((target - baseline) / (1.0 - baseline), 0.0, 1.0);
  }

  size_t make_firm(int industry, int entry_year) {
    FirmDraft f;
    f.id = "F" + std::to_string(10000 + static_cast<int>(firms.size()));
    f.naics2 = industry;
    f.entry = entry_year;
    int last = entry_year;
    const double p = death_prob();
    while (last < end_year() && !rng.bern(p)) ++last;
    f.last = last;
    const bool exits_early = last < end_year();
    f.liquidates = exits_early && rng.bern(cfg.liquidation_rate);
    f.hide_q_at_exit = f.liquidates && rng.bern(hide_probability());

    f.zombie_prone = rng.bern(prone_probability());
    if (f.zombie_prone) {
      f.first_listed_year = entry_year - 10 - rng.uniform_int(0, 12);
    } else {
      f.first_listed_year = entry_year - rng.uniform_int(0, 25);
      if (rng.bern(0.08)) {
        // short distress spell; never long enough to complete a streak
        f.distress_start =
            entry_year + rng.uniform_int(0, std::max(0, f.last - f.entry));
        f.distress_len = rng.uniform_int(1, 2);
      }
    }
    f.small = rng.bern(cfg.sme_rate);
    f.fe_tfp = rng.uniform(-0.25, 0.25);
    f.fe_cap = rng.uniform(-0.2, 0.2);
    f.fe_emp = rng.uniform(-0.2, 0.2);
    f.fe_nbg = rng.uniform(-0.15, 0.15);
    firms.push_back(std::move(f));
    draw_statements(firms.back());
    draw_instruments(firms.back());
    return firms.size() - 1;
  }

  bool icr_fail(const FirmDraft& f, int year) const {
    if (f.zombie_prone) return true;
    return f.distress_start >= 0 && year >= f.distress_start &&
           year < f.distress_start + f.distress_len;
  }

  void draw_statements(FirmDraft& f) {
    const int n = f.n_years();
    f.at.resize(n);
    f.dltt.resize(n);
    f.dlc.resize(n);
    f.ib.resize(n);
    f.che.resize(n);
    f.lt.resize(n);
    f.xrd.resize(n);
    f.xint.resize(n);
    f.ebitda.resize(n);
    f.q.resize(n);
    f.market_equity.resize(n);
    f.xlr.resize(n);
    const double base = rng.uniform(0.3, 6.0);
    for (int k = 0; k < n; ++k) {
      const int year = f.entry + k;
      f.at[k] = std::exp(base + 0.04 * k + rng.normal(0.08));
      f.dltt[k] = rng.uniform(0.15, 0.35) * f.at[k];
      f.dlc[k] = rng.uniform(0.05, 0.2) * f.at[k];
      const double roa =
          f.zombie_prone ? rng.uniform(-0.15, 0.0) : rng.uniform(-0.05, 0.1);
      f.ib[k] = roa * f.at[k];
      f.che[k] = rng.uniform(0.05, 0.3) * f.at[k];
      f.lt[k] = rng.uniform(0.4, 0.8) * f.at[k];
      f.xrd[k] = rng.uniform(0.005, 0.1) * f.at[k];
      f.xint[k] = 0.02 * f.at[k];
      // a thin slice of healthy firm-years hides EBITDA, leaving the ICR
      // streak undetermined
      if (!f.zombie_prone && rng.bern(0.02))
        f.ebitda[k] = std::nullopt;
      else
        f.ebitda[k] = (icr_fail(f, year) ? 0.5 : 2.0) * f.xint[k];

      const bool hide = f.hide_q_at_exit && year >= f.last - 2;
      if (hide) continue;
      if (f.zombie_prone) {
        const double u = rng.uniform(0.0, 1.0);
        if (u < 0.5) continue;
        f.q[k] = u < 0.75 ? rng.uniform(0.05, 0.45) : rng.uniform(2.5, 4.0);
      } else {
        f.q[k] = rng.uniform(1.0, 2.0);
      }
      f.market_equity[k] = *f.q[k] * f.at[k] - (f.at[k] - f.lt[k]);
    }
  }

  void draw_instruments(FirmDraft& f) {
    for (int k = 0; k < f.n_years(); ++k) {
      const int year = f.entry + k;
      const int count = rng.poisson(cfg.instruments_per_firm_year);
      for (int j = 0; j < count; ++j) {
        DebtInstrument d;
        d.firm_id = f.id;
        d.component_id = "K" + std::to_string(1000000 + component_counter++);
        d.report_year = year;
        const double u = rng.uniform(0.0, 1.0);
        d.debt_type =
            u < 0.20 ? DebtType::BL : (u < 0.40 ? DebtType::RC : DebtType::BN);
        d.face_value = rng.uniform(0.05, 0.4) * (f.dltt[k] + f.dlc[k]);
        const double m = rng.uniform(0.0, 1.0);
        if (m < 0.16)
          d.maturity_quarters = rng.uniform_int(1, 4);
        else if (m < 0.28)
          d.maturity_quarters = rng.uniform_int(5, 8);
        else if (m < 0.61)
          d.maturity_quarters = rng.uniform_int(9, 20);
        else if (m < 0.87)
          d.maturity_quarters = rng.uniform_int(21, 40);
        else if (m < 0.96)
          d.maturity_quarters = rng.uniform_int(41, 100);
        else if (m < 0.99)
          d.maturity_quarters = rng.uniform_int(101, 120);
        else
          d.maturity_quarters = rng.uniform_int(121, 200);
        effective.push_back(d);
        reported.push_back(d);
        if (year + 1 <= f.last && rng.bern(cfg.duplicate_component_rate)) {
          DebtInstrument dup = d;
          dup.report_year = year + 1;
          dup.face_value = 0.8 * d.face_value;
          reported.push_back(dup);
        }
      }
    }
  }

  // -----------------------------------------------------------------------
  // the generator's own copy of the classification rules (planted truth)
  // -----------------------------------------------------------------------

  void derive_statuses() {
    median_q.clear();
    std::map<CellKey, std::vector<double>> qs;
    for (const auto& f : firms)
      for (int k = 0; k < f.n_years(); ++k)
        if (f.q[k]) qs[{f.naics2, f.entry + k}].push_back(*f.q[k]);
    for (auto& [key, v] : qs) {
      std::sort(v.begin(), v.end());
      const size_t m = v.size();
      median_q[key] = (m % 2) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    }

    z_broad.assign(firms.size(), {});
    z_narrow_x.assign(firms.size(), {});
    z_nar.assign(firms.size(), {});
    for (size_t i = 0; i < firms.size(); ++i) {
      const auto& f = firms[i];
      const int n = f.n_years();
      z_broad[i].assign(n, Tri::Undet);
      z_narrow_x[i].assign(n, Tri::Undet);
      z_nar[i].assign(n, Tri::Undet);
      for (int k = 0; k < n; ++k) {
        const int year = f.entry + k;
        // any of the three flag years outside coverage or unreported:
        // undetermined
        if (k < 2 || !f.ebitda[k] || !f.ebitda[k - 1] || !f.ebitda[k - 2])
          continue;
        const bool streak = (*f.ebitda[k] < f.xint[k]) &&
                            (*f.ebitda[k - 1] < f.xint[k - 1]) &&
                            (*f.ebitda[k - 2] < f.xint[k - 2]);
        const bool broad = streak && (year - f.first_listed_year) >= 10;
        z_broad[i][k] = broad ? Tri::True : Tri::False;
        if (!broad) {
          z_narrow_x[i][k] = Tri::False;
          z_nar[i][k] = Tri::False;
          continue;
        }
        if (!f.q[k]) {
          z_narrow_x[i][k] = Tri::Undet;
          z_nar[i][k] = Tri::True;
          continue;
        }
        const bool below = *f.q[k] < median_q.at({f.naics2, year});
        z_narrow_x[i][k] = below ? Tri::True : Tri::False;
        z_nar[i][k] = z_narrow_x[i][k];
      }
    }
  }

  Tri status(size_t i, int year) const {
    const auto& f = firms[i];
    if (year < f.entry || year > f.last) return Tri::Undet;
    return z_nar[i][year - f.entry];
  }

  void aggregate_cells() {
    cells_short.clear();
    cells_long.clear();
    std::unordered_map<std::string, size_t> firm_of;
    for (size_t i = 0; i < firms.size(); ++i) firm_of[firms[i].id] = i;
    for (const auto& d : effective) {
      const auto cm = coarse_maturity(maturity_bucket(d.maturity_quarters));
      if (cm == CoarseMaturity::None) continue;
      const size_t i = firm_of.at(d.firm_id);
      auto& cell =
          (cm == CoarseMaturity::Short ? cells_short : cells_long)[{firms[i].naics2,
                                                                    d.report_year}];
      const bool bank = d.debt_type != DebtType::BN;
      (bank ? cell.bc_all : cell.bn_all) += d.face_value;
      const Tri z = status(i, d.report_year - 1);
      if (z == Tri::Undet) continue;
      if (bank) {
        cell.bc_den += d.face_value;
        if (z == Tri::True) {
          cell.bc_num += d.face_value;
          cell.bc_zvol += d.face_value;
        }
      } else {
        cell.bn_den += d.face_value;
        if (z == Tri::True) {
          cell.bn_num += d.face_value;
          cell.bn_zvol += d.face_value;
        }
      }
    }
  }

  std::optional<double> share(const std::map<CellKey, CellAgg>& cells, int s,
                              int t, bool bank) const {
    auto it = cells.find({s, t});
    if (it == cells.end()) return std::nullopt;
    const double den = bank ? it->second.bc_den : it->second.bn_den;
    if (den <= 0) return std::nullopt;
    return (bank ? it->second.bc_num : it->second.bn_num) / den;
  }

  std::optional<double> dlog_zvol(const std::map<CellKey, CellAgg>& cells,
                                  int s, int t, bool bank) const {
    auto cur = cells.find({s, t});
    auto prev = cells.find({s, t - 1});
    if (cur == cells.end() || prev == cells.end()) return std::nullopt;
    const double v1 = bank ? cur->second.bc_zvol : cur->second.bn_zvol;
    const double v0 = bank ? prev->second.bc_zvol : prev->second.bn_zvol;
    if (v1 <= 0 || v0 <= 0) return std::nullopt;
    return std::log(v1) - std::log(v0);
  }

  // -----------------------------------------------------------------------
  // entry process
  // -----------------------------------------------------------------------

  void build_roster() {
    const int S = static_cast<int>(industries.size());
    if (!cfg.planted.dynamism) {
      const int initial = static_cast<int>(0.85 * cfg.n_firms);
      for (int j = 0; j < initial; ++j)
        make_firm(industries[j % S], cfg.start_year);
      for (int j = initial; j < cfg.n_firms; ++j)
        make_firm(industries[rng.uniform_int(0, S - 1)],
                  rng.uniform_int(cfg.start_year + 1, end_year()));
      derive_statuses();
      aggregate_cells();
      return;
    }

    // planted entry dynamics: newbie share follows the dynamic industry
    // equation, entries rounded to the firm grid. Every first-window firm
    // is a newbie, so the lagged share in the second year is 1 across all
    // industries; that rho * 1 term is a common shift the year effect
    // carries, and the recursion starts from the third year.
    int budget = cfg.n_firms;
    std::map<int, double> alpha_s;
    std::map<int, double> delta_t;
    for (int s : industries) alpha_s[s] = rng.uniform(0.03, 0.08);
    for (int t = cfg.start_year; t <= end_year(); ++t)
      delta_t[t] = rng.uniform(-0.01, 0.01);

    const int initial_per_ind =
        std::max(2, static_cast<int>(0.35 * cfg.n_firms) / S);
    std::map<int, double> prev_share;
    for (int s : industries) {
      for (int j = 0; j < initial_per_ind && budget > 0; ++j, --budget)
        make_firm(s, cfg.start_year);
      prev_share[s] = -1.0;  // marks the common first-year share
    }
    for (int t = cfg.start_year + 1; t <= end_year(); ++t) {
      derive_statuses();
      aggregate_cells();
      std::map<int, double> new_share;
      for (int s : industries) {
        long survivors = 0;
        for (const auto& f : firms)
          if (f.naics2 == s && f.entry < t && f.last >= t) ++survivors;
        double v = alpha_s[s] + delta_t[t];
        if (prev_share[s] >= 0) v += cfg.ab_rho * prev_share[s];
        if (auto bc = share(cells_short, s, t - 1, true)) {
          v += cfg.ab_beta_bc * *bc;
          auto it = cells_short.find({s, t - 1});
          const bool dep = it != cells_short.end() &&
                           it->second.bc_all > it->second.bn_all;
          if (dep) v += cfg.ab_beta_bc_dep * *bc;
          if (auto bn = share(cells_short, s, t - 1, false)) {
            v += cfg.ab_beta_bn * *bn;
            if (!dep) v += cfg.ab_beta_bn_dep * *bn;
          }
        }
        v += rng.normal(0.01 * cfg.noise);
        v = std::clamp(v, 0.002, 0.40);
        long entrants = std::lround(v * survivors / (1.0 - v));
        entrants = std::min<long>(entrants, budget);
        for (long j = 0; j < entrants; ++j, --budget) make_firm(s, t);
        const long active = survivors + entrants;
        new_share[s] = active > 0 ? double(entrants) / active : 0.0;
      }
      prev_share = std::move(new_share);
    }
    derive_statuses();
    aggregate_cells();
  }

  // -----------------------------------------------------------------------
  // outcome paths
  // -----------------------------------------------------------------------

  // c1 NZ + c2 NZ*SM + b_bc NZ*SM*x_bc + b_bn NZ*SM*x_bn with flags at t-1
  double interaction_block(size_t i, int k, double c1, double c2, double b_bc,
                           double b_bn, std::optional<double> x_bc,
                           std::optional<double> x_bn) const {
    const auto& f = firms[i];
    if (k < 1) return 0.0;
    const Tri z = z_nar[i][k - 1];
    if (z == Tri::Undet) return 0.0;
    const double nz = z == Tri::False ? 1.0 : 0.0;
    const double sm = f.emp[k - 1] * 1000.0 < 1000.0 ? 1.0 : 0.0;
    double v = c1 * nz + c2 * nz * sm;
    if (x_bc) v += b_bc * nz * sm * *x_bc;
    if (x_bn) v += b_bn * nz * sm * *x_bn;
    return v;
  }

  void build_paths() {
    std::map<CellKey, double> d_tfp, d_cap, d_emp, d_nbg;
    for (int s : industries)
      for (int t = cfg.start_year; t <= end_year(); ++t) {
        d_tfp[{s, t}] = rng.uniform(-0.15, 0.15);
        d_cap[{s, t}] = rng.uniform(-0.10, 0.10);
        d_emp[{s, t}] = rng.uniform(-0.10, 0.10);
        d_nbg[{s, t}] = rng.uniform(-0.08, 0.08);
      }

    for (size_t i = 0; i < firms.size(); ++i) {
      auto& f = firms[i];
      const int n = f.n_years();
      f.emp.resize(n);
      f.ppent.resize(n);
      f.capx.resize(n);
      f.sale.resize(n);
      f.cogs.resize(n);

      for (int k = 0; k < n; ++k)
        f.cogs[k] = std::exp(0.6 * std::log(f.at[k]) + rng.normal(0.7));

      // per-firm draws shared across the year loop
      const double k_const = std::exp(rng.uniform(0.5, 2.5));
      const double tau = rng.uniform(0.1, 0.6);
      const double emp_base =
          f.small ? rng.uniform(0.08, 0.7) : rng.uniform(1.5, 30.0);
      double ar_omega = rng.normal(0.4);

      // one pass per year; every planted equation only reads values dated
      // k-1 of the other series plus the same-year capital stock
      for (int k = 0; k < n; ++k) {
        const int year = f.entry + k;

        // capital stock
        if (cfg.planted.tfp) {
          f.ppent[k] = k_const;  // firm-constant: absorbed by firm effects
        } else if (cfg.planted.capital) {
          if (k == 0) {
            f.ppent[0] = tau * f.at[0];
          } else {
            const double v =
                f.fe_cap + d_cap.at({f.naics2, year}) +
                interaction_block(i, k, 0.05, -0.01, cfg.beta_bc, cfg.beta_bn,
                                  share(cells_short, f.naics2, year - 1, true),
                                  share(cells_short, f.naics2, year - 1, false)) +
                0.01 * std::log(f.at[k - 1]) +
                0.02 * (f.ppent[k - 1] / f.at[k - 1]) +
                rng.normal(0.15 * cfg.noise);
            f.ppent[k] = f.ppent[k - 1] * std::exp(v);
          }
        } else {
          f.ppent[k] = tau * f.at[k];
        }

        // production: sales, materials and the productivity instrument
        if (cfg.planted.tfp) {
          double omega =
              f.fe_tfp + d_tfp.at({f.naics2, year}) +
              interaction_block(i, k, 0.05, -0.02, cfg.beta_bc, cfg.beta_bn,
                                share(cells_short, f.naics2, year - 1, true),
                                share(cells_short, f.naics2, year - 1, false)) +
              rng.normal(0.25 * cfg.noise);
          if (k >= 1) {
            omega += 0.01 * std::log(f.at[k - 1]);
            omega += 0.10 * (f.xrd[k - 1] / f.at[k - 1]);
          }
          // investment reveals productivity exactly: stage 1 has no
          // approximation error
          f.capx[k] = std::exp(omega);
          f.sale[k] = std::exp(0.6 * std::log(f.cogs[k]) +
                               0.4 * std::log(f.ppent[k]) + omega +
                               rng.normal(0.03 * cfg.noise));
        } else {
          ar_omega = 0.7 * ar_omega + rng.normal(0.3);
          f.capx[k] =
              std::exp(-2.0 + 0.8 * ar_omega + 0.3 * std::log(f.ppent[k]) +
                       rng.normal(0.3));
          f.sale[k] = std::exp(0.6 * std::log(f.cogs[k]) +
                               0.4 * std::log(f.ppent[k]) + ar_omega +
                               rng.normal(0.05 * cfg.noise));
        }

        // employment
        if (k == 0) {
          f.emp[0] = emp_base;
        } else if (cfg.planted.employment) {
          const double v = std::clamp(
              f.fe_emp + d_emp.at({f.naics2, year}) +
                  interaction_block(
                      i, k, 0.03, 0.01, 0.05 * cfg.beta_bc, 0.05 * cfg.beta_bn,
                      dlog_zvol(cells_short, f.naics2, year, true),
                      dlog_zvol(cells_short, f.naics2, year, false)) +
                  0.002 * std::log(f.at[k - 1]) +
                  0.002 * (f.che[k - 1] / f.lt[k - 1]) +
                  0.002 * (f.ib[k - 1] / f.at[k - 1]) +
                  0.002 * (f.ppent[k - 1] / f.at[k - 1]) +
                  rng.normal(0.10 * cfg.noise),
              -1.8, 1.8);
          f.emp[k] = f.emp[k - 1] * (1.0 + v / 2.0) / (1.0 - v / 2.0);
        } else if (cfg.planted.newbie_growth) {
          const double nb_l1 = (k == 1) ? 1.0 : 0.0;
          double v = f.fe_nbg + d_nbg.at({f.naics2, year}) + 0.04 * nb_l1;
          auto gbc = dlog_zvol(cells_short, f.naics2, year, true);
          auto gbn = dlog_zvol(cells_short, f.naics2, year, false);
          if (gbc) v += 0.05 * cfg.beta_bc * nb_l1 * *gbc;
          if (gbn) v += 0.05 * cfg.beta_bn * nb_l1 * *gbn;
          v += 0.002 * std::log(f.at[k - 1]);
          v += 0.002 * (f.ppent[k - 1] / f.at[k - 1]);
          v += 0.01 * (std::log(f.sale[k]) - std::log(f.sale[k - 1]));
          v += rng.normal(0.10 * cfg.noise);
          f.emp[k] = f.emp[k - 1] * std::exp(v);
        } else {
          f.emp[k] = f.emp[k - 1] * std::exp(rng.normal(0.08));
        }
      }

      // staff expense reported for part of the sample
      for (int k = 0; k < n; ++k)
        if (rng.bern(0.6)) f.xlr[k] = 0.15 * f.sale[k];
    }
  }

  // -----------------------------------------------------------------------
  // assembly
  // -----------------------------------------------------------------------

  SynthData assemble() {
    SynthData out;
    std::vector<FirmYear> rows;
    for (const auto& f : firms) {
      for (int k = 0; k < f.n_years(); ++k) {
        FirmYear fy;
        fy.firm_id = f.id;
        fy.year = f.entry + k;
        fy.naics2 = f.naics2;
        fy.at = f.at[k];
        fy.sale = f.sale[k];
        fy.cogs = f.cogs[k];
        fy.ppent = f.ppent[k];
        fy.capx = f.capx[k];
        fy.xint = f.xint[k];
        fy.ebitda = f.ebitda[k];
        fy.dltt = f.dltt[k];
        fy.dlc = f.dlc[k];
        fy.ib = f.ib[k];
        fy.che = f.che[k];
        fy.lt = f.lt[k];
        fy.xrd = f.xrd[k];
        fy.emp = f.emp[k];
        fy.xlr = f.xlr[k];
        fy.tobins_q = f.q[k];
        fy.first_listed_year = f.first_listed_year;
        fy.exit_flag = f.liquidates && (f.entry + k) == f.last;
        fy.market_equity = f.market_equity[k];
        rows.push_back(std::move(fy));
      }
    }
    out.panel = Panel(std::move(rows));
    out.instruments = reported;

    for (int s : industries)
      for (int t = cfg.start_year; t <= end_year(); ++t) {
        const int s_idx =
            static_cast<int>(std::find(industries.begin(), industries.end(), s) -
                             industries.begin());
        out.deflators.index[{s, t}] =
            1.0 + 0.015 * (t - cfg.start_year) + 0.002 * s_idx;
      }
    for (int t = cfg.start_year; t <= end_year(); ++t)
      out.labor.cost_per_capita[t] = 5e-5 * (1.0 + 0.02 * (t - cfg.start_year));

    // intended classification, the oracle for tests
    std::unordered_map<std::string, size_t> firm_of;
    for (size_t i = 0; i < firms.size(); ++i) firm_of[firms[i].id] = i;
    struct FirmTotals {
      double bc = 0, bn = 0;
      bool any = false, bond_s = false, bond_l = false;
    };
    std::unordered_map<std::string, FirmTotals> totals;
    for (const auto& d : effective) {
      auto& t = totals[d.firm_id];
      t.any = true;
      if (d.debt_type == DebtType::BN) {
        t.bn += d.face_value;
        const auto cm = coarse_maturity(maturity_bucket(d.maturity_quarters));
        if (cm == CoarseMaturity::Short) t.bond_s = true;
        if (cm == CoarseMaturity::Long) t.bond_l = true;
      } else {
        t.bc += d.face_value;
      }
    }
    long det = 0, det_true = 0, det_broad = 0, det_broad_true = 0;
    for (size_t i = 0; i < firms.size(); ++i) {
      const auto& f = firms[i];
      const FirmTotals ft = [&] {
        auto it = totals.find(f.id);
        return it == totals.end() ? FirmTotals{} : it->second;
      }();
      for (int k = 0; k < f.n_years(); ++k) {
        ClassifiedFirmYear c;
        c.firm_id = f.id;
        c.year = f.entry + k;
        c.naics2 = f.naics2;
        c.z_broad = tri_opt(z_broad[i][k]);
        c.z_narrow_x = tri_opt(z_narrow_x[i][k]);
        c.z_nar = tri_opt(z_nar[i][k]);
        c.sm = f.emp[k] * 1000.0 < 1000.0;
        c.nb = k == 0;
        c.e_exit = f.liquidates && (f.entry + k) == f.last;
        c.bank_dep = ft.bc > ft.bn;
        c.capm_dep = !c.bank_dep;
        c.has_instruments = ft.any;
        c.bond_short = ft.bond_s;
        c.bond_long = ft.bond_l;
        out.intended.push_back(std::move(c));
        if (z_nar[i][k] != Tri::Undet) {
          ++det;
          if (z_nar[i][k] == Tri::True) ++det_true;
        }
        if (z_broad[i][k] != Tri::Undet) {
          ++det_broad;
          if (z_broad[i][k] == Tri::True) ++det_broad_true;
        }
      }
    }

    // realized exit/missing-Q phi, by brute force over the assembled panel
    {
      std::vector<char> e, vb;
      for (const auto& f : firms) {
        for (int k = 0; k < f.n_years(); ++k) {
          const bool exit_now = f.liquidates && (f.entry + k) == f.last;
          bool miss = false;
          for (int back = 0; back < 3; ++back) {
            const int kk = k - back;
            if (kk < 0 || !f.q[kk]) {
              miss = true;
              break;
            }
          }
          e.push_back(exit_now ? 1 : 0);
          vb.push_back(exit_now && miss ? 1 : 0);
        }
      }
      double me = 0, mv = 0;
      for (size_t j = 0; j < e.size(); ++j) {
        me += e[j];
        mv += vb[j];
      }
      me /= e.size();
      mv /= e.size();
      double cov = 0, ve = 0, vv = 0;
      for (size_t j = 0; j < e.size(); ++j) {
        cov += (e[j] - me) * (vb[j] - mv);
        ve += (e[j] - me) * (e[j] - me);
        vv += (vb[j] - mv) * (vb[j] - mv);
      }
      if (ve > 0 && vv > 0)
        truth.set("realized_phi_tobins_q", cov / std::sqrt(ve * vv));
    }

    truth.set("seed", static_cast<double>(cfg.seed));
    truth.set("noise", cfg.noise);
    truth.set("n_firms", static_cast<double>(firms.size()));
    truth.set("n_rows", static_cast<double>(out.panel.size()));
    truth.set("zombie_rate_target", cfg.zombie_rate);
    truth.set("realized_prevalence_nar",
              det ? static_cast<double>(det_true) / det : 0.0);
    truth.set("realized_prevalence_broad",
              det_broad ? static_cast<double>(det_broad_true) / det_broad : 0.0);
    if (cfg.planted.tfp) {
      truth.set("planted.EQ4.m1.bc", cfg.beta_bc);
      truth.set("planted.EQ4.m1.bn", cfg.beta_bn);
      truth.set("planted.EQ4.m1.nz", 0.05);
      truth.set("planted.EQ4.m1.nz_sm", -0.02);
      truth.set("planted.EQ4.m1.log_at", 0.01);
      truth.set("planted.EQ4.m1.rd_intensity", 0.10);
    }
    if (cfg.planted.capital) {
      truth.set("planted.EQ5.m1.bc", cfg.beta_bc);
      truth.set("planted.EQ5.m1.bn", cfg.beta_bn);
      truth.set("planted.EQ5.m1.log_at", 0.01);
      truth.set("planted.EQ5.m1.tangibility", 0.02);
    }
    if (cfg.planted.employment) {
      truth.set("planted.EQ6.m1.bc", 0.05 * cfg.beta_bc);
      truth.set("planted.EQ6.m1.bn", 0.05 * cfg.beta_bn);
    }
    if (cfg.planted.newbie_growth) {
      truth.set("planted.EQ9.m3.bc", 0.05 * cfg.beta_bc);
      truth.set("planted.EQ9.m3.bn", 0.05 * cfg.beta_bn);
      truth.set("planted.EQ9.m3.nb", 0.04);
    }
    if (cfg.planted.dynamism) {
      truth.set("planted.EQ8.rho", cfg.ab_rho);
      truth.set("planted.EQ8.bc", cfg.ab_beta_bc);
      truth.set("planted.EQ8.bn", cfg.ab_beta_bn);
      truth.set("planted.EQ8.bc_dep", cfg.ab_beta_bc_dep);
      truth.set("planted.EQ8.bn_dep", cfg.ab_beta_bn_dep);
    }
    out.truth = truth;
    return out;
  }

  SynthData run() {
    validate();
    industries.assign(kIndustryCodes.begin(),
                      kIndustryCodes.begin() + cfg.n_industries);
    build_roster();
    build_paths();
    return assemble();
  }
};

}  // namespace

SynthData generate(const DgpConfig& cfg) { return Generator(cfg).run(); }

namespace {

std::string opt_cell(const std::optional<double>& v, double scale = 1.0) {
  if (!v) return "";
  return csv::format_double(*v * scale);
}

}  // namespace

void generate_files(const DgpConfig& cfg, const std::string& dir) {
  SynthData data = generate(cfg);
  std::filesystem::create_directories(dir);

  csv::Table fy;
  fy.header = {"firm_id", "year",   "naics2", "at",   "sale", "cogs",
               "ppent",   "capx",   "xint",   "ebitda", "dltt", "dlc",
               "ib",      "che",    "lt",     "xrd",  "emp",  "xlr",
               "tobins_q", "first_listed_year", "exit_flag", "market_equity"};
  for (const auto& r : data.panel.rows()) {
    const double idx = *data.deflators.lookup(r.naics2, r.year);
    fy.rows.push_back({r.firm_id,
                       std::to_string(r.year),
                       std::to_string(r.naics2),
                       opt_cell(r.at, idx),
                       opt_cell(r.sale, idx),
                       opt_cell(r.cogs, idx),
                       opt_cell(r.ppent, idx),
                       opt_cell(r.capx, idx),
                       opt_cell(r.xint, idx),
                       opt_cell(r.ebitda, idx),
                       opt_cell(r.dltt, idx),
                       opt_cell(r.dlc, idx),
                       opt_cell(r.ib, idx),
                       opt_cell(r.che, idx),
                       opt_cell(r.lt, idx),
                       opt_cell(r.xrd, idx),
                       opt_cell(r.emp),
                       opt_cell(r.xlr, idx),
                       opt_cell(r.tobins_q),
                       std::to_string(r.first_listed_year),
                       r.exit_flag ? "1" : "0",
                       opt_cell(r.market_equity, idx)});
  }
  csv::write_file(dir + "/firm_years.csv", fy);

  csv::Table ins;
  ins.header = {"firm_id", "component_id", "report_year",
                "debt_type", "face_value", "maturity_quarters"};
  std::unordered_map<std::string, std::map<int, double>> firm_index;
  for (const auto& r : data.panel.rows())
    firm_index[r.firm_id][r.year] = *data.deflators.lookup(r.naics2, r.year);
  for (const auto& d : data.instruments) {
    const double idx = firm_index.at(d.firm_id).at(d.report_year);
    ins.rows.push_back({d.firm_id, d.component_id,
                        std::to_string(d.report_year), to_string(d.debt_type),
                        csv::format_double(d.face_value * idx),
                        std::to_string(d.maturity_quarters)});
  }
  csv::write_file(dir + "/instruments.csv", ins);

  csv::Table defl;
  defl.header = {"naics2", "year", "index"};
  for (const auto& [key, v] : data.deflators.index)
    defl.rows.push_back({std::to_string(key.first), std::to_string(key.second),
                         csv::format_double(v)});
  csv::write_file(dir + "/deflators.csv", defl);

  csv::Table labor;
  labor.header = {"year", "cost_per_capita"};
  for (const auto& [year, v] : data.labor.cost_per_capita)
    labor.rows.push_back({std::to_string(year), csv::format_double(v)});
  csv::write_file(dir + "/labor_costs.csv", labor);

  csv::Table manifest;
  manifest.header = {"parameter", "value"};
  for (const auto& [k, v] : data.truth.values)
    manifest.rows.push_back({k, csv::format_double(v)});
  csv::write_file(dir + "/truth_manifest.csv", manifest);
}

TruthManifest read_manifest(const std::string& path) {
  csv::Table t = csv::read_file(path);
  TruthManifest m;
  for (const auto& row : t.rows)
    m.values.emplace_back(row[0], *csv::parse_double(row[1]));
  return m;
}

}  // namespace zpanel::synth
