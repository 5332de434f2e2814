#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace zpanel {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct YearWindow {
  int first = 2002;
  int last = 2019;
  bool contains(int y) const { return y >= first && y <= last; }
};

/// One firm-year observation of financial statement fields. Optional fields
/// carry explicit absence; they are never imputed as zero.
struct FirmYear {
  std::string firm_id;
  int year = 0;
  int naics2 = 0;
  std::optional<double> at, sale, cogs, ppent, capx;
  std::optional<double> xint, ebitda;
  std::optional<double> dltt, dlc, ib, che, lt, xrd, emp, xlr;
  std::optional<double> tobins_q;
  int first_listed_year = 0;
  bool exit_flag = false;
  std::optional<double> market_equity;
};

enum class DebtType { BL, RC, BN };

const char* to_string(DebtType t);
std::optional<DebtType> parse_debt_type(const std::string& s);

/// One first-time debt obligation reporting.
struct DebtInstrument {
  std::string firm_id;
  std::string component_id;
  int report_year = 0;
  DebtType debt_type = DebtType::BL;
  double face_value = 0.0;
  int maturity_quarters = 0;
};

enum class MaturityBucket {
  Q1_4,
  Q5_8,
  Q9_20,
  Q21_40,
  Q41_100,
  Q101_120,
  Q121_200,
  OutOfRange,
};

enum class CoarseMaturity { Short, Long, None };

MaturityBucket maturity_bucket(int maturity_quarters);
CoarseMaturity coarse_maturity(MaturityBucket b);
const char* to_string(MaturityBucket b);
const char* to_string(CoarseMaturity m);

/// (naics2, year) -> producer price index, base year normalized to 1.
struct DeflatorTable {
  std::map<std::pair<int, int>, double> index;

  std::optional<double> lookup(int naics2, int year) const {
    auto it = index.find({naics2, year});
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Panel
// ---------------------------------------------------------------------------

/// Immutable firm-year panel, sorted by (firm_id, year), unique on the pair.
class Panel {
 public:
  Panel() = default;
  explicit Panel(std::vector<FirmYear> rows);

  const std::vector<FirmYear>& rows() const { return rows_; }
  size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  const FirmYear* find(const std::string& firm_id, int year) const;

  /// Contiguous [begin, end) row range of one firm's history.
  struct FirmRange {
    size_t begin = 0;
    size_t end = 0;
  };
  const std::vector<std::pair<std::string, FirmRange>>& firms() const {
    return firms_;
  }

 private:
  std::vector<FirmYear> rows_;
  std::vector<std::pair<std::string, FirmRange>> firms_;
  std::unordered_map<std::string, FirmRange> by_firm_;
};

// ---------------------------------------------------------------------------
// Ingestion and preparation
// ---------------------------------------------------------------------------

struct RowError {
  long line = 0;
  std::string message;
};

struct IngestReport {
  long input_rows = 0;
  long kept = 0;
  long dropped_window = 0;
  long dropped_sector = 0;
  long dropped_malformed = 0;
  std::vector<RowError> errors;
};

inline const std::vector<int>& excluded_sectors() {
  static const std::vector<int> s = {11, 22, 52, 55, 81, 92};
  return s;
}

/// Parse firm_years.csv, apply window and sector filters, validate rows.
/// Duplicate (firm_id, year) keys are a hard error.
Panel ingest_firm_years(const std::string& path, const YearWindow& window,
                        IngestReport& report);

struct InstrumentLoadReport {
  long input_rows = 0;
  long kept = 0;
  long dropped_malformed = 0;
  std::vector<RowError> errors;
};

std::vector<DebtInstrument> load_instruments(const std::string& path,
                                             InstrumentLoadReport& report);

DeflatorTable load_deflators(const std::string& path);

/// Currency fields eligible for deflation, in schema order.
const std::vector<std::string>& deflatable_fields();

/// Divide the listed currency fields by the (naics2, year) price index.
/// Missing deflator coverage for any panel row is an error.
Panel deflate(const Panel& panel, const DeflatorTable& deflators,
              const std::vector<std::string>& fields);

/// Deflate instrument face values with the borrower's industry-year index.
/// Instruments without a matching firm-year row pass through unchanged; they
/// are dropped later at face-value acceptance.
std::vector<DebtInstrument> deflate_instruments(
    const std::vector<DebtInstrument>& instruments, const Panel& panel,
    const DeflatorTable& deflators);

/// Keep, per (firm_id, component_id), only the earliest report_year record;
/// ties keep the largest face value, then the lexicographically smallest
/// (debt_type, maturity) record.
std::vector<DebtInstrument> dedup_new_contracts(
    std::vector<DebtInstrument> instruments);

struct AcceptanceCell {
  long total = 0;
  long accepted = 0;
  double rate() const { return total ? double(accepted) / double(total) : 0.0; }
};

struct AcceptanceReport {
  // keyed by (debt_type, maturity_bucket)
  std::map<std::pair<DebtType, MaturityBucket>, AcceptanceCell> cells;
  long dropped_no_financials = 0;
  long rejected_face_value = 0;
  long accepted_total = 0;
};

/// Keep an instrument iff its face value does not exceed the borrower's
/// total debt (dltt + dlc) in the report year.
std::vector<DebtInstrument> accept_by_face_value(
    const std::vector<DebtInstrument>& instruments, const Panel& panel,
    AcceptanceReport& report);

}  // namespace zpanel
