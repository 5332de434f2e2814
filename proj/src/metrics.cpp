#include "zpanel/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "zpanel/csv.hpp"

namespace zpanel {

namespace {

std::optional<double> ratio(std::optional<double> num,
                            std::optional<double> den) {
  if (!num || !den || *den <= 0) return std::nullopt;
  return *num / *den;
}

std::optional<double> safe_log(std::optional<double> v) {
  if (!v || *v <= 0) return std::nullopt;
  return std::log(*v);
}

std::optional<double> dlog(std::optional<double> curr,
                           std::optional<double> prev) {
  auto lc = safe_log(curr);
  auto lp = safe_log(prev);
  if (!lc || !lp) return std::nullopt;
  return *lc - *lp;
}

}  // namespace

LaborCostTable load_labor_costs(const std::string& path) {
  csv::Table t = csv::read_file(path);
  static const std::vector<std::string> header = {"year", "cost_per_capita"};
  if (t.header != header)
    throw std::runtime_error(path + ": labor_costs header does not match schema");
  LaborCostTable out;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    auto year = csv::parse_int(t.rows[r][0]);
    auto cost = csv::parse_double(t.rows[r][1]);
    if (!year || !cost || *cost <= 0)
      throw std::runtime_error(path + ":" + std::to_string(t.lines[r]) +
                               ": labor cost must be a positive value");
    out.cost_per_capita[static_cast<int>(*year)] = *cost;
  }
  return out;
}

std::optional<bool> interest_coverage_flag(std::optional<double> xint,
                                           std::optional<double> ebitda) {
  if (!xint || !ebitda || *xint <= 0) return std::nullopt;
  return *ebitda < *xint;
}

std::optional<double> symmetric_growth(double curr, double prev) {
  if (curr < 0 || prev < 0)
    throw std::invalid_argument("symmetric_growth requires nonnegative inputs");
  if (curr == 0 && prev == 0) return std::nullopt;
  return (curr - prev) / (0.5 * (curr + prev));
}

std::optional<double> value_added(const FirmYear& row,
                                  const LaborCostTable& labor) {
  // VA = SALE - Materials; Materials = TotalExpenses - LaborCosts;
  // TotalExpenses = SALE - OIBDP (supplied through the ebitda column).
  if (!row.sale || !row.ebitda) return std::nullopt;
  double labor_costs;
  if (row.xlr) {
    labor_costs = *row.xlr;
  } else {
    auto per_capita = labor.lookup(row.year);
    if (!row.emp || !per_capita) return std::nullopt;
    labor_costs = *row.emp * 1000.0 * *per_capita;
  }
  const double total_expenses = *row.sale - *row.ebitda;
  const double materials = total_expenses - labor_costs;
  return *row.sale - materials;
}

std::optional<double> tobins_q_proxy(std::optional<double> at,
                                     std::optional<double> market_equity,
                                     std::optional<double> book_equity) {
  if (!at || *at <= 0 || !market_equity || !book_equity) return std::nullopt;
  return (*at + *market_equity - *book_equity) / *at;
}

double economic_impact(double sd, double beta, double scale) {
  return sd * beta * scale;
}

std::vector<DerivedFirmYear> derive_metrics(const Panel& panel,
                                            const LaborCostTable& labor) {
  std::vector<DerivedFirmYear> out;
  out.reserve(panel.size());
  const auto& rows = panel.rows();
  for (const auto& [firm, range] : panel.firms()) {
    for (size_t i = range.begin; i < range.end; ++i) {
      const FirmYear& fy = rows[i];
      DerivedFirmYear d;
      d.firm_id = fy.firm_id;
      d.year = fy.year;
      d.naics2 = fy.naics2;
      d.icr_low_coverage = interest_coverage_flag(fy.xint, fy.ebitda);
      std::optional<double> debt;
      if (fy.dltt && fy.dlc) debt = *fy.dltt + *fy.dlc;
      d.leverage = ratio(debt, fy.at);
      d.asset_tangibility = ratio(fy.ppent, fy.at);
      d.capx_over_assets = ratio(fy.capx, fy.at);
      d.roa = ratio(fy.ib, fy.at);
      d.rd_intensity = ratio(fy.xrd, fy.at);
      d.cash_ratio = ratio(fy.che, fy.lt);
      d.age = fy.year - fy.first_listed_year;
      d.value_added = value_added(fy, labor);
      if (fy.tobins_q) {
        d.tobins_q_filled = fy.tobins_q;
      } else {
        std::optional<double> book_equity;
        if (fy.at && fy.lt) book_equity = *fy.at - *fy.lt;
        d.tobins_q_filled = tobins_q_proxy(fy.at, fy.market_equity, book_equity);
        d.tobins_q_is_proxy = d.tobins_q_filled.has_value();
      }
      d.log_at = safe_log(fy.at);
      d.log_ppent = safe_log(fy.ppent);
      d.log_sale = safe_log(fy.sale);
      d.log_cogs = safe_log(fy.cogs);
      d.log_capx = safe_log(fy.capx);

      // lag fields use the consecutive previous calendar year only
      const FirmYear* prev =
          (i > range.begin && rows[i - 1].year == fy.year - 1) ? &rows[i - 1]
                                                               : nullptr;
      if (prev) {
        if (fy.emp && prev->emp && !(*fy.emp == 0 && *prev->emp == 0) &&
            *fy.emp >= 0 && *prev->emp >= 0)
          d.emp_growth_sym = symmetric_growth(*fy.emp, *prev->emp);
        d.dlog_k = dlog(fy.ppent, prev->ppent);
        d.dlog_emp = dlog(fy.emp, prev->emp);
        d.dlog_sale = dlog(fy.sale, prev->sale);
      }
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace zpanel
