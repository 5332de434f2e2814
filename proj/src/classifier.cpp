#include "zpanel/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <stdexcept>
#include <unordered_map>

namespace zpanel {

const char* to_string(ZombieDefinition d) {
  switch (d) {
    case ZombieDefinition::Broad: return "broad";
    case ZombieDefinition::NarrowX: return "narrow_x";
    case ZombieDefinition::Nar: return "nar";
  }
  return "?";
}

std::optional<ZombieDefinition> parse_definition(const std::string& s) {
  if (s == "broad") return ZombieDefinition::Broad;
  if (s == "narrow_x") return ZombieDefinition::NarrowX;
  if (s == "nar") return ZombieDefinition::Nar;
  return std::nullopt;
}

std::map<std::pair<int, int>, double> industry_median_q(
    const std::vector<DerivedFirmYear>& derived) {
  std::map<std::pair<int, int>, std::vector<double>> values;
  for (const auto& d : derived)
    if (d.tobins_q_filled) values[{d.naics2, d.year}].push_back(*d.tobins_q_filled);
  std::map<std::pair<int, int>, double> out;
  for (auto& [key, v] : values) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    out[key] = (n % 2) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  return out;
}

std::vector<std::optional<bool>> classify_broad(
    const std::vector<int>& years,
    const std::vector<std::optional<bool>>& icr_flags,
    const std::vector<int>& ages) {
  const size_t n = years.size();
  if (icr_flags.size() != n || ages.size() != n)
    throw std::invalid_argument("classify_broad: input length mismatch");
  // calendar-year lookup; histories may have gaps
  std::unordered_map<int, size_t> at_year;
  for (size_t i = 0; i < n; ++i) at_year.emplace(years[i], i);

  std::vector<std::optional<bool>> out(n);
  for (size_t i = 0; i < n; ++i) {
    // any unassessable flag year leaves the streak undetermined
    bool all_true = true;
    bool any_absent = false;
    for (int back = 0; back < 3; ++back) {
      auto it = at_year.find(years[i] - back);
      std::optional<bool> flag =
          (it == at_year.end()) ? std::nullopt : icr_flags[it->second];
      if (!flag)
        any_absent = true;
      else if (!*flag)
        all_true = false;
    }
    if (any_absent)
      out[i] = std::nullopt;
    else
      out[i] = all_true && ages[i] >= 10;
  }
  return out;
}

NarrowStatus classify_narrow(std::optional<bool> broad_conditions,
                             std::optional<double> tobins_q,
                             std::optional<double> industry_median) {
  NarrowStatus s;
  if (!broad_conditions) return s;  // undetermined propagates
  if (!*broad_conditions) {
    s.z_narrow_x = false;
    s.z_nar = false;
    return s;
  }
  if (!tobins_q) {
    s.z_narrow_x = std::nullopt;
    s.z_nar = true;  // fails to report Q
    return s;
  }
  if (!industry_median) {
    s.z_narrow_x = std::nullopt;
    s.z_nar = std::nullopt;
    return s;
  }
  const bool below = *tobins_q < *industry_median;
  s.z_narrow_x = below;
  s.z_nar = below;
  return s;
}

std::vector<ClassifiedFirmYear> classify_panel(
    const Panel& panel, const std::vector<DerivedFirmYear>& derived,
    const std::vector<DebtInstrument>& accepted_instruments, int threads) {
  if (derived.size() != panel.size())
    throw std::invalid_argument("derived metrics do not align with panel");

  // derived rows are produced in panel order
  for (size_t i = 0; i < derived.size(); ++i)
    if (derived[i].firm_id != panel.rows()[i].firm_id ||
        derived[i].year != panel.rows()[i].year)
      throw std::invalid_argument("derived metrics do not align with panel");

  const auto medians = industry_median_q(derived);

  // firm-level instrument totals
  struct FirmDebt {
    double bc_face = 0;
    double bn_face = 0;
    bool any = false;
    bool bond_short = false;
    bool bond_long = false;
  };
  std::unordered_map<std::string, FirmDebt> debt;
  for (const auto& d : accepted_instruments) {
    auto& f = debt[d.firm_id];
    f.any = true;
    if (d.debt_type == DebtType::BN) {
      f.bn_face += d.face_value;
      const CoarseMaturity cm = coarse_maturity(maturity_bucket(d.maturity_quarters));
      if (cm == CoarseMaturity::Short) f.bond_short = true;
      if (cm == CoarseMaturity::Long) f.bond_long = true;
    } else {
      f.bc_face += d.face_value;
    }
  }

  const auto& rows = panel.rows();
  std::vector<ClassifiedFirmYear> out(rows.size());
  const auto& firms = panel.firms();

  auto work = [&](size_t f) {
    const auto& [firm_id, range] = firms[f];
    const size_t n = range.end - range.begin;
    std::vector<int> years(n), ages(n);
    std::vector<std::optional<bool>> flags(n);
    for (size_t i = 0; i < n; ++i) {
      years[i] = rows[range.begin + i].year;
      ages[i] = derived[range.begin + i].age;
      flags[i] = derived[range.begin + i].icr_low_coverage;
    }
    auto broad = classify_broad(years, flags, ages);

    const FirmDebt fd = [&] {
      auto it = debt.find(firm_id);
      return it == debt.end() ? FirmDebt{} : it->second;
    }();
    const int first_year = years.front();
    const int last_year = years.back();

    for (size_t i = 0; i < n; ++i) {
      const size_t r = range.begin + i;
      ClassifiedFirmYear c;
      c.firm_id = firm_id;
      c.year = years[i];
      c.naics2 = rows[r].naics2;
      c.z_broad = broad[i];
      std::optional<double> median;
      auto mit = medians.find({rows[r].naics2, years[i]});
      if (mit != medians.end()) median = mit->second;
      NarrowStatus ns =
          classify_narrow(broad[i], derived[r].tobins_q_filled, median);
      c.z_narrow_x = ns.z_narrow_x;
      c.z_nar = ns.z_nar;
      if (rows[r].emp) c.sm = *rows[r].emp * 1000.0 < 1000.0;
      c.nb = years[i] == first_year;
      c.e_exit = rows[r].exit_flag && years[i] == last_year;
      c.has_instruments = fd.any;
      c.bank_dep = fd.bc_face > fd.bn_face;
      c.capm_dep = !c.bank_dep;
      c.bond_short = fd.bond_short;
      c.bond_long = fd.bond_long;
      out[r] = std::move(c);
    }
  };

  if (threads > 1 && firms.size() > 1) {
    std::atomic<size_t> next{0};
    std::vector<std::future<void>> futs;
    const int nt = std::min<size_t>(threads, firms.size());
    for (int t = 0; t < nt; ++t)
      futs.push_back(std::async(std::launch::async, [&]() {
        for (size_t f = next.fetch_add(1); f < firms.size();
             f = next.fetch_add(1))
          work(f);
      }));
    for (auto& fu : futs) fu.get();
  } else {
    for (size_t f = 0; f < firms.size(); ++f) work(f);
  }
  return out;
}

MissingnessDiagnostic exit_and_missingness(const Panel& panel,
                                           const std::string& variable) {
  std::optional<double> FirmYear::*member = nullptr;
  if (variable == "tobins_q")
    member = &FirmYear::tobins_q;
  else if (variable == "xint")
    member = &FirmYear::xint;
  else if (variable == "ebitda")
    member = &FirmYear::ebitda;
  else
    throw std::invalid_argument("unsupported missingness variable '" +
                                variable + "'");

  MissingnessDiagnostic diag;
  diag.variable = variable;

  const auto& rows = panel.rows();
  std::vector<char> e, vb;
  for (const auto& [firm_id, range] : panel.firms()) {
    std::unordered_map<int, size_t> at_year;
    for (size_t i = range.begin; i < range.end; ++i)
      at_year.emplace(rows[i].year, i);
    const size_t last = range.end - 1;
    for (size_t i = range.begin; i < range.end; ++i) {
      const bool exit_now = rows[i].exit_flag && i == last;
      bool missing_recent = false;
      for (int back = 0; back < 3; ++back) {
        auto it = at_year.find(rows[i].year - back);
        if (it == at_year.end() || !(rows[it->second].*member)) {
          missing_recent = true;
          break;
        }
      }
      e.push_back(exit_now ? 1 : 0);
      vb.push_back((exit_now && missing_recent) ? 1 : 0);
    }
  }
  diag.n = static_cast<long>(e.size());
  if (diag.n == 0) {
    diag.note = "empty panel";
    return diag;
  }
  double me = 0, mv = 0;
  for (size_t i = 0; i < e.size(); ++i) {
    me += e[i];
    mv += vb[i];
  }
  me /= diag.n;
  mv /= diag.n;
  double cov = 0, ve = 0, vv = 0;
  for (size_t i = 0; i < e.size(); ++i) {
    cov += (e[i] - me) * (vb[i] - mv);
    ve += (e[i] - me) * (e[i] - me);
    vv += (vb[i] - mv) * (vb[i] - mv);
  }
  if (ve <= 0 || vv <= 0) {
    diag.note = "zero variance in " + std::string(ve <= 0 ? "exit" : "missingness") +
                " indicator";
    return diag;
  }
  diag.correlation = cov / std::sqrt(ve * vv);
  return diag;
}

}  // namespace zpanel
