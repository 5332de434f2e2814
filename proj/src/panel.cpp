#include "zpanel/panel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "zpanel/csv.hpp"

namespace zpanel {

const char* to_string(DebtType t) {
  switch (t) {
    case DebtType::BL: return "BL";
    case DebtType::RC: return "RC";
    case DebtType::BN: return "BN";
  }
  return "?";
}

std::optional<DebtType> parse_debt_type(const std::string& s) {
  if (s == "BL") return DebtType::BL;
  if (s == "RC") return DebtType::RC;
  if (s == "BN") return DebtType::BN;
  return std::nullopt;
}

MaturityBucket maturity_bucket(int m) {
  if (m < 1) throw std::invalid_argument("maturity_quarters must be >= 1");
  if (m <= 4) return MaturityBucket::Q1_4;
  if (m <= 8) return MaturityBucket::Q5_8;
  if (m <= 20) return MaturityBucket::Q9_20;
  if (m <= 40) return MaturityBucket::Q21_40;
  if (m <= 100) return MaturityBucket::Q41_100;
  if (m <= 120) return MaturityBucket::Q101_120;
  if (m <= 200) return MaturityBucket::Q121_200;
  return MaturityBucket::OutOfRange;
}

CoarseMaturity coarse_maturity(MaturityBucket b) {
  switch (b) {
    case MaturityBucket::Q1_4:
      return CoarseMaturity::Short;
    case MaturityBucket::Q5_8:
    case MaturityBucket::Q9_20:
    case MaturityBucket::Q21_40:
      return CoarseMaturity::Long;
    default:
      return CoarseMaturity::None;
  }
}

const char* to_string(MaturityBucket b) {
  switch (b) {
    case MaturityBucket::Q1_4: return "1-4Q";
    case MaturityBucket::Q5_8: return "5-8Q";
    case MaturityBucket::Q9_20: return "9-20Q";
    case MaturityBucket::Q21_40: return "21-40Q";
    case MaturityBucket::Q41_100: return "41-100Q";
    case MaturityBucket::Q101_120: return "101-120Q";
    case MaturityBucket::Q121_200: return "121-200Q";
    case MaturityBucket::OutOfRange: return "out-of-range";
  }
  return "?";
}

const char* to_string(CoarseMaturity m) {
  switch (m) {
    case CoarseMaturity::Short: return "short";
    case CoarseMaturity::Long: return "long";
    case CoarseMaturity::None: return "none";
  }
  return "?";
}

Panel::Panel(std::vector<FirmYear> rows) : rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(), [](const FirmYear& a, const FirmYear& b) {
    return std::tie(a.firm_id, a.year) < std::tie(b.firm_id, b.year);
  });
  for (size_t i = 1; i < rows_.size(); ++i) {
    if (rows_[i].firm_id == rows_[i - 1].firm_id &&
        rows_[i].year == rows_[i - 1].year) {
      throw std::runtime_error("duplicate firm-year key (" + rows_[i].firm_id +
                               ", " + std::to_string(rows_[i].year) + ")");
    }
  }
  size_t begin = 0;
  for (size_t i = 1; i <= rows_.size(); ++i) {
    if (i == rows_.size() || rows_[i].firm_id != rows_[begin].firm_id) {
      FirmRange r{begin, i};
      firms_.emplace_back(rows_[begin].firm_id, r);
      by_firm_.emplace(rows_[begin].firm_id, r);
      begin = i;
    }
  }
}

const FirmYear* Panel::find(const std::string& firm_id, int year) const {
  auto it = by_firm_.find(firm_id);
  if (it == by_firm_.end()) return nullptr;
  for (size_t i = it->second.begin; i < it->second.end; ++i) {
    if (rows_[i].year == year) return &rows_[i];
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kFirmYearHeader = {
    "firm_id", "year",   "naics2", "at",   "sale", "cogs",
    "ppent",   "capx",   "xint",   "ebitda", "dltt", "dlc",
    "ib",      "che",    "lt",     "xrd",  "emp",  "xlr",
    "tobins_q", "first_listed_year", "exit_flag", "market_equity"};

bool is_excluded_sector(int naics2) {
  const auto& s = excluded_sectors();
  return std::find(s.begin(), s.end(), naics2) != s.end();
}

}  // namespace

Panel ingest_firm_years(const std::string& path, const YearWindow& window,
                        IngestReport& report) {
  csv::Table t = csv::read_file(path);
  if (t.header != kFirmYearHeader)
    throw std::runtime_error(path + ": firm_years header does not match schema");

  std::vector<FirmYear> kept;
  kept.reserve(t.rows.size());
  report = IngestReport{};
  report.input_rows = static_cast<long>(t.rows.size());

  for (size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    const long line = t.lines[r];
    try {
      FirmYear fy;
      fy.firm_id = cells[0];
      if (fy.firm_id.empty()) throw std::runtime_error("empty firm_id");
      auto year = csv::parse_int(cells[1]);
      auto naics2 = csv::parse_int(cells[2]);
      if (!year || !naics2) throw std::runtime_error("missing year or naics2");
      fy.year = static_cast<int>(*year);
      fy.naics2 = static_cast<int>(*naics2);
      fy.at = csv::parse_double(cells[3]);
      fy.sale = csv::parse_double(cells[4]);
      fy.cogs = csv::parse_double(cells[5]);
      fy.ppent = csv::parse_double(cells[6]);
      fy.capx = csv::parse_double(cells[7]);
      fy.xint = csv::parse_double(cells[8]);
      fy.ebitda = csv::parse_double(cells[9]);
      fy.dltt = csv::parse_double(cells[10]);
      fy.dlc = csv::parse_double(cells[11]);
      fy.ib = csv::parse_double(cells[12]);
      fy.che = csv::parse_double(cells[13]);
      fy.lt = csv::parse_double(cells[14]);
      fy.xrd = csv::parse_double(cells[15]);
      fy.emp = csv::parse_double(cells[16]);
      fy.xlr = csv::parse_double(cells[17]);
      fy.tobins_q = csv::parse_double(cells[18]);
      auto fl = csv::parse_int(cells[19]);
      if (!fl) throw std::runtime_error("missing first_listed_year");
      fy.first_listed_year = static_cast<int>(*fl);
      auto ex = csv::parse_flag(cells[20]);
      fy.exit_flag = ex.value_or(false);
      fy.market_equity = csv::parse_double(cells[21]);

      if (fy.at && *fy.at < 0) throw std::runtime_error("negative at");
      if (fy.emp && *fy.emp < 0) throw std::runtime_error("negative emp");
      if (fy.first_listed_year > fy.year)
        throw std::runtime_error("first_listed_year after observation year");

      if (!window.contains(fy.year)) {
        ++report.dropped_window;
        continue;
      }
      if (is_excluded_sector(fy.naics2)) {
        ++report.dropped_sector;
        continue;
      }
      kept.push_back(std::move(fy));
    } catch (const std::exception& e) {
      ++report.dropped_malformed;
      report.errors.push_back({line, e.what()});
    }
  }
  report.kept = static_cast<long>(kept.size());
  return Panel(std::move(kept));
}

std::vector<DebtInstrument> load_instruments(const std::string& path,
                                             InstrumentLoadReport& report) {
  csv::Table t = csv::read_file(path);
  static const std::vector<std::string> header = {
      "firm_id", "component_id", "report_year",
      "debt_type", "face_value", "maturity_quarters"};
  if (t.header != header)
    throw std::runtime_error(path + ": instruments header does not match schema");

  report = InstrumentLoadReport{};
  report.input_rows = static_cast<long>(t.rows.size());
  std::vector<DebtInstrument> out;
  out.reserve(t.rows.size());
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const auto& c = t.rows[r];
    try {
      DebtInstrument d;
      d.firm_id = c[0];
      d.component_id = c[1];
      if (d.firm_id.empty() || d.component_id.empty())
        throw std::runtime_error("empty identifier");
      auto year = csv::parse_int(c[2]);
      if (!year) throw std::runtime_error("missing report_year");
      d.report_year = static_cast<int>(*year);
      auto ty = parse_debt_type(c[3]);
      if (!ty) throw std::runtime_error("unknown debt_type '" + c[3] + "'");
      d.debt_type = *ty;
      auto face = csv::parse_double(c[4]);
      if (!face || *face <= 0) throw std::runtime_error("face_value must be > 0");
      d.face_value = *face;
      auto m = csv::parse_int(c[5]);
      if (!m || *m < 1) throw std::runtime_error("maturity_quarters must be >= 1");
      d.maturity_quarters = static_cast<int>(*m);
      out.push_back(std::move(d));
    } catch (const std::exception& e) {
      ++report.dropped_malformed;
      report.errors.push_back({t.lines[r], e.what()});
    }
  }
  report.kept = static_cast<long>(out.size());
  return out;
}

DeflatorTable load_deflators(const std::string& path) {
  csv::Table t = csv::read_file(path);
  static const std::vector<std::string> header = {"naics2", "year", "index"};
  if (t.header != header)
    throw std::runtime_error(path + ": deflators header does not match schema");
  DeflatorTable out;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    auto naics2 = csv::parse_int(t.rows[r][0]);
    auto year = csv::parse_int(t.rows[r][1]);
    auto idx = csv::parse_double(t.rows[r][2]);
    if (!naics2 || !year || !idx)
      throw std::runtime_error(path + ":" + std::to_string(t.lines[r]) +
                               ": incomplete deflator row");
    if (*idx <= 0)
      throw std::runtime_error(path + ":" + std::to_string(t.lines[r]) +
                               ": index must be > 0");
    out.index[{static_cast<int>(*naics2), static_cast<int>(*year)}] = *idx;
  }
  return out;
}

const std::vector<std::string>& deflatable_fields() {
  static const std::vector<std::string> f = {
      "at",  "sale", "cogs", "ppent", "capx", "xint", "ebitda", "dltt",
      "dlc", "ib",   "che",  "lt",    "xrd",  "xlr",  "market_equity"};
  return f;
}

namespace {

std::optional<double> FirmYear::* field_member(const std::string& name) {
  if (name == "at") return &FirmYear::at;
  if (name == "sale") return &FirmYear::sale;
  if (name == "cogs") return &FirmYear::cogs;
  if (name == "ppent") return &FirmYear::ppent;
  if (name == "capx") return &FirmYear::capx;
  if (name == "xint") return &FirmYear::xint;
  if (name == "ebitda") return &FirmYear::ebitda;
  if (name == "dltt") return &FirmYear::dltt;
  if (name == "dlc") return &FirmYear::dlc;
  if (name == "ib") return &FirmYear::ib;
  if (name == "che") return &FirmYear::che;
  if (name == "lt") return &FirmYear::lt;
  if (name == "xrd") return &FirmYear::xrd;
  if (name == "emp") return &FirmYear::emp;
  if (name == "xlr") return &FirmYear::xlr;
  if (name == "tobins_q") return &FirmYear::tobins_q;
  if (name == "market_equity") return &FirmYear::market_equity;
  return nullptr;
}

}  // namespace

Panel deflate(const Panel& panel, const DeflatorTable& deflators,
              const std::vector<std::string>& fields) {
  std::vector<std::optional<double> FirmYear::*> members;
  members.reserve(fields.size());
  for (const auto& f : fields) {
    auto m = field_member(f);
    if (!m) throw std::runtime_error("unknown deflatable field '" + f + "'");
    members.push_back(m);
  }
  std::vector<FirmYear> rows = panel.rows();
  for (auto& fy : rows) {
    auto idx = deflators.lookup(fy.naics2, fy.year);
    if (!idx)
      throw std::runtime_error("missing deflator for (naics2=" +
                               std::to_string(fy.naics2) +
                               ", year=" + std::to_string(fy.year) + ")");
    for (auto m : members) {
      if (fy.*m) fy.*m = *(fy.*m) / *idx;
    }
  }
  return Panel(std::move(rows));
}

std::vector<DebtInstrument> deflate_instruments(
    const std::vector<DebtInstrument>& instruments, const Panel& panel,
    const DeflatorTable& deflators) {
  std::vector<DebtInstrument> out = instruments;
  for (auto& d : out) {
    const FirmYear* fy = panel.find(d.firm_id, d.report_year);
    if (!fy) continue;
    auto idx = deflators.lookup(fy->naics2, fy->year);
    if (!idx)
      throw std::runtime_error("missing deflator for (naics2=" +
                               std::to_string(fy->naics2) +
                               ", year=" + std::to_string(fy->year) + ")");
    d.face_value /= *idx;
  }
  return out;
}

std::vector<DebtInstrument> dedup_new_contracts(
    std::vector<DebtInstrument> instruments) {
  // Preference order per (firm, component): earliest year, then largest face,
  // then lexicographic (debt_type, maturity).
  auto better = [](const DebtInstrument& a, const DebtInstrument& b) {
    if (a.report_year != b.report_year) return a.report_year < b.report_year;
    if (a.face_value != b.face_value) return a.face_value > b.face_value;
    if (a.debt_type != b.debt_type) return a.debt_type < b.debt_type;
    return a.maturity_quarters < b.maturity_quarters;
  };
  std::map<std::pair<std::string, std::string>, size_t> best;
  for (size_t i = 0; i < instruments.size(); ++i) {
    auto key = std::make_pair(instruments[i].firm_id, instruments[i].component_id);
    auto [it, inserted] = best.emplace(key, i);
    if (!inserted && better(instruments[i], instruments[it->second]))
      it->second = i;
  }
  std::vector<bool> keep(instruments.size(), false);
  for (const auto& [k, i] : best) keep[i] = true;
  std::vector<DebtInstrument> out;
  out.reserve(best.size());
  for (size_t i = 0; i < instruments.size(); ++i)
    if (keep[i]) out.push_back(std::move(instruments[i]));
  return out;
}

std::vector<DebtInstrument> accept_by_face_value(
    const std::vector<DebtInstrument>& instruments, const Panel& panel,
    AcceptanceReport& report) {
  report = AcceptanceReport{};
  std::vector<DebtInstrument> accepted;
  accepted.reserve(instruments.size());
  for (const auto& d : instruments) {
    const FirmYear* fy = panel.find(d.firm_id, d.report_year);
    if (!fy || !fy->dltt || !fy->dlc) {
      ++report.dropped_no_financials;
      continue;
    }
    auto& cell = report.cells[{d.debt_type, maturity_bucket(d.maturity_quarters)}];
    ++cell.total;
    const double total_debt = *fy->dltt + *fy->dlc;
    if (d.face_value <= total_debt) {
      ++cell.accepted;
      ++report.accepted_total;
      accepted.push_back(d);
    } else {
      ++report.rejected_face_value;
    }
  }
  return accepted;
}

}  // namespace zpanel
