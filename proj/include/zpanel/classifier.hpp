#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zpanel/metrics.hpp"
#include "zpanel/panel.hpp"

namespace zpanel {

enum class ZombieDefinition { Broad, NarrowX, Nar };

const char* to_string(ZombieDefinition d);
std::optional<ZombieDefinition> parse_definition(const std::string& s);

/// All classification flags for one firm-year. std::nullopt marks an
/// undetermined status (insufficient reporting).
struct ClassifiedFirmYear {
  std::string firm_id;
  int year = 0;
  int naics2 = 0;
  std::optional<bool> z_broad;
  std::optional<bool> z_narrow_x;
  std::optional<bool> z_nar;
  std::optional<bool> sm;   // fewer than 1,000 employees
  bool nb = false;          // first panel appearance
  bool e_exit = false;      // final panel year flagged as liquidation
  bool bank_dep = false;    // firm-level, time-invariant
  bool capm_dep = false;
  bool has_instruments = false;
  bool bond_short = false;  // issued >= 1 BN in the bucket over the sample
  bool bond_long = false;

  std::optional<bool> status(ZombieDefinition d) const {
    switch (d) {
      case ZombieDefinition::Broad: return z_broad;
      case ZombieDefinition::NarrowX: return z_narrow_x;
      case ZombieDefinition::Nar: return z_nar;
    }
    return std::nullopt;
  }
};

struct MissingnessDiagnostic {
  std::string variable;
  std::optional<double> correlation;  // phi coefficient
  long n = 0;
  std::string note;
};

/// Median Tobin's Q over reporting firms per (naics2, year).
std::map<std::pair<int, int>, double> industry_median_q(
    const std::vector<DerivedFirmYear>& derived);

/// Broad status per year of one firm history: the low-coverage flag held in
/// t-2, t-1, t and the firm is at least 10 years old.
/// `flags` and `ages` are aligned, indexed by consecutive position in the
/// firm's history with `years` giving calendar years.
std::vector<std::optional<bool>> classify_broad(
    const std::vector<int>& years,
    const std::vector<std::optional<bool>>& icr_flags,
    const std::vector<int>& ages);

struct NarrowStatus {
  std::optional<bool> z_narrow_x;
  std::optional<bool> z_nar;
};

NarrowStatus classify_narrow(std::optional<bool> broad_conditions,
                             std::optional<double> tobins_q,
                             std::optional<double> industry_median);

/// Classify the whole panel: zombie statuses under all three definitions,
/// SME/newbie/exit flags, and instrument-derived dependence flags.
std::vector<ClassifiedFirmYear> classify_panel(
    const Panel& panel, const std::vector<DerivedFirmYear>& derived,
    const std::vector<DebtInstrument>& accepted_instruments, int threads = 1);

/// Phi correlation between the exit indicator (final panel year flagged as
/// liquidation) and recent missingness of `variable` ("tobins_q" or "xint").
MissingnessDiagnostic exit_and_missingness(const Panel& panel,
                                           const std::string& variable);

}  // namespace zpanel
