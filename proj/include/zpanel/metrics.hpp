#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zpanel/panel.hpp"

namespace zpanel {

/// year -> annual labor cost per capita, external input series.
struct LaborCostTable {
  std::map<int, double> cost_per_capita;

  std::optional<double> lookup(int year) const {
    auto it = cost_per_capita.find(year);
    if (it == cost_per_capita.end()) return std::nullopt;
    return it->second;
  }
};

LaborCostTable load_labor_costs(const std::string& path);

/// Derived firm-level quantities. Every ratio is absent when its denominator
/// is nonpositive or missing; logs are absent for nonpositive bases.
struct DerivedFirmYear {
  std::string firm_id;
  int year = 0;
  int naics2 = 0;
  std::optional<bool> icr_low_coverage;
  std::optional<double> leverage;
  std::optional<double> asset_tangibility;
  std::optional<double> capx_over_assets;
  std::optional<double> roa;
  std::optional<double> rd_intensity;
  std::optional<double> cash_ratio;
  int age = 0;
  std::optional<double> value_added;
  std::optional<double> tobins_q_filled;
  bool tobins_q_is_proxy = false;
  std::optional<double> log_at, log_ppent, log_sale, log_cogs, log_capx;
  std::optional<double> emp_growth_sym;
  std::optional<double> dlog_k, dlog_emp, dlog_sale;
};

/// Low-coverage flag: true when positive interest expense is not covered by
/// EBITDA (XINT/EBITDA > 1, extended to nonpositive EBITDA). Absent when
/// inputs are missing or xint <= 0.
std::optional<bool> interest_coverage_flag(std::optional<double> xint,
                                           std::optional<double> ebitda);

/// (curr - prev) / (0.5 (curr + prev)); bounded in [-2, 2]; absent when both
/// arguments are zero.
std::optional<double> symmetric_growth(double curr, double prev);

std::optional<double> value_added(const FirmYear& row,
                                  const LaborCostTable& labor);

/// Standard market-to-book fill-in: (at + market_equity - book_equity) / at.
std::optional<double> tobins_q_proxy(std::optional<double> at,
                                     std::optional<double> market_equity,
                                     std::optional<double> book_equity);

double economic_impact(double sd, double beta, double scale);

/// Compute every derived quantity for the panel. Growth fields require the
/// consecutive previous calendar year within the firm.
std::vector<DerivedFirmYear> derive_metrics(const Panel& panel,
                                            const LaborCostTable& labor);

}  // namespace zpanel
