#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zpanel/classifier.hpp"
#include "zpanel/panel.hpp"

namespace zpanel::agg {

enum class ShareWeight { FaceValue, Count };

const char* to_string(ShareWeight w);
std::optional<ShareWeight> parse_weight(const std::string& s);

/// Instrument joined with everything aggregation needs about the borrower.
struct EnrichedInstrument {
  DebtType type = DebtType::BL;
  MaturityBucket bucket = MaturityBucket::Q1_4;
  int naics2 = 0;
  int year = 0;
  double face = 0;
  std::optional<bool> zombie;       // borrower status, lag convention applied
  std::optional<bool> sme_borrower;
};

/// Join accepted instruments with the classified panel. Borrower zombie
/// status is taken `status_lag` years before the report year (default: the
/// status known at origination).
std::vector<EnrichedInstrument> enrich_instruments(
    const std::vector<DebtInstrument>& accepted, const Panel& panel,
    const std::vector<ClassifiedFirmYear>& classified, ZombieDefinition def,
    int status_lag = 1);

struct CellShares {
  std::optional<double> bc_share;  // zombie share of bank credit (BL + RC)
  std::optional<double> bn_share;  // zombie share of bonds and notes
  double bc_z_volume = 0;          // face-value sums to zombie borrowers
  double bn_z_volume = 0;
  double bc_volume = 0;
  double bn_volume = 0;
};

using IndustryYearKey = std::pair<int, int>;  // (naics2, year)

/// Zombie-credit share per industry-year within one coarse maturity split.
/// Undetermined-status borrowers are excluded from numerator and denominator.
std::map<IndustryYearKey, CellShares> zombie_credit_share(
    const std::vector<EnrichedInstrument>& instruments, ShareWeight weight,
    CoarseMaturity maturity);

/// Log growth of a volume series per industry; absent when either level <= 0
/// or the previous year is not present.
std::map<IndustryYearKey, double> zombie_credit_growth(
    const std::map<IndustryYearKey, double>& volumes);

/// bank_dep_sy: fresh bank credit strictly exceeds bonds-and-notes volume in
/// the industry-year-bucket (face values, all borrowers).
std::map<IndustryYearKey, bool> industry_dependence(
    const std::vector<EnrichedInstrument>& instruments, CoarseMaturity maturity);

struct NewbieCell {
  long nb_count = 0;
  long n_firms = 0;
  double nb_share() const {
    return n_firms ? static_cast<double>(nb_count) / n_firms : 0.0;
  }
};

std::map<IndustryYearKey, NewbieCell> newbie_share(
    const std::vector<ClassifiedFirmYear>& classified);

/// Sample-wide lending tabulations per debt type and fine maturity bucket,
/// optionally per year and/or restricted to SME borrowers. Zombie columns
/// count determined-status borrowers only.
struct LendingCell {
  double total = 0;    // weighted, determined-status borrowers
  double zombie = 0;
  double all_incl_undetermined = 0;
  std::optional<double> z_share() const {
    if (total <= 0) return std::nullopt;
    return zombie / total;
  }
};

struct LendingTableKey {
  int year = 0;  // 0 when pooled over years
  DebtType type = DebtType::BL;
  MaturityBucket bucket = MaturityBucket::Q1_4;
  bool operator<(const LendingTableKey& o) const;
};

std::map<LendingTableKey, LendingCell> lending_table(
    const std::vector<EnrichedInstrument>& instruments, ShareWeight weight,
    bool per_year, bool sme_only);

/// Full industry-year aggregate row, the shape persisted to CSV.
struct IndustryYearAggregate {
  int naics2 = 0;
  int year = 0;
  CoarseMaturity bucket = CoarseMaturity::Short;
  std::optional<double> bc_z_share;
  std::optional<double> bn_z_share;
  std::optional<double> dlog_bc_z;
  std::optional<double> dlog_bn_z;
  bool bank_dep_sy = false;
  bool capm_dep_sy = false;
  long nb_count = 0;
  long n_firms = 0;
  double nb_share = 0;
};

std::vector<IndustryYearAggregate> build_industry_year(
    const std::vector<EnrichedInstrument>& instruments,
    const std::vector<ClassifiedFirmYear>& classified, ShareWeight weight);

}  // namespace zpanel::agg
