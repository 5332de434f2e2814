#include "zpanel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "zpanel/csv.hpp"
#include "zpanel/econometrics.hpp"

namespace zpanel::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config file
// ---------------------------------------------------------------------------

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::map<std::string, std::string> out;
  std::string line, section;
  long lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    out[(section.empty() ? key : section + "." + key)] = value;
  }
  return out;
}

void apply_config(RunConfig& cfg,
                  const std::map<std::string, std::string>& entries) {
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    return it->second;
  };
  if (auto v = get("paths.firm_years")) cfg.firm_years = *v;
  if (auto v = get("paths.instruments")) cfg.instruments = *v;
  if (auto v = get("paths.deflators")) cfg.deflators = *v;
  if (auto v = get("paths.labor_costs")) cfg.labor_costs = *v;
  if (auto v = get("paths.output_dir")) cfg.output_dir = *v;
  if (auto v = get("paths.catalog")) cfg.catalog_file = *v;
  if (auto v = get("sample.window_start")) cfg.window.first = std::stoi(*v);
  if (auto v = get("sample.window_end")) cfg.window.last = std::stoi(*v);
  if (auto v = get("options.definition")) {
    auto d = parse_definition(*v);
    if (!d) throw std::runtime_error("unknown definition '" + *v + "'");
    cfg.definition = *d;
  }
  if (auto v = get("options.weight")) {
    auto w = agg::parse_weight(*v);
    if (!w) throw std::runtime_error("unknown weight '" + *v + "'");
    cfg.weight = *w;
  }
  if (auto v = get("options.status_lag")) cfg.status_lag = std::stoi(*v);
  if (auto v = get("options.threads")) cfg.threads = std::stoi(*v);
  if (auto v = get("tfp.poly_degree")) cfg.tfp.poly_degree = std::stoi(*v);
  if (auto v = get("tfp.min_obs_per_industry"))
    cfg.tfp.min_obs_per_industry = std::stoi(*v);
  if (auto v = get("synth.n_firms")) cfg.synth.n_firms = std::stoi(*v);
  if (auto v = get("synth.n_years")) cfg.synth.n_years = std::stoi(*v);
  if (auto v = get("synth.n_industries")) cfg.synth.n_industries = std::stoi(*v);
  if (auto v = get("synth.zombie_rate")) cfg.synth.zombie_rate = std::stod(*v);
  if (auto v = get("synth.noise")) cfg.synth.noise = std::stod(*v);
  if (auto v = get("synth.seed")) cfg.synth.seed = std::stoull(*v);
  if (auto v = get("synth.beta_bn")) cfg.synth.beta_bn = std::stod(*v);
  if (auto v = get("synth.beta_bc")) cfg.synth.beta_bc = std::stod(*v);
}

// ---------------------------------------------------------------------------
// preparation
// ---------------------------------------------------------------------------

PreparedData prepare_from_files(const RunConfig& cfg) {
  PreparedData out;
  Panel nominal = ingest_firm_years(cfg.firm_years, cfg.window, out.ingest);
  DeflatorTable deflators = load_deflators(cfg.deflators);
  out.panel = deflate(nominal, deflators, deflatable_fields());
  out.labor = load_labor_costs(cfg.labor_costs);

  auto instruments = load_instruments(cfg.instruments, out.instrument_load);
  instruments = deflate_instruments(instruments, out.panel, deflators);
  const long before = static_cast<long>(instruments.size());
  instruments = dedup_new_contracts(std::move(instruments));
  out.duplicates_removed = before - static_cast<long>(instruments.size());
  out.accepted = accept_by_face_value(instruments, out.panel, out.acceptance);
  return out;
}

PreparedData prepare_from_synth(const synth::SynthData& data) {
  PreparedData out;
  out.panel = data.panel;
  out.labor = data.labor;
  auto instruments = data.instruments;
  const long before = static_cast<long>(instruments.size());
  instruments = dedup_new_contracts(std::move(instruments));
  out.duplicates_removed = before - static_cast<long>(instruments.size());
  out.accepted = accept_by_face_value(instruments, out.panel, out.acceptance);
  return out;
}

// ---------------------------------------------------------------------------
// analysis chain
// ---------------------------------------------------------------------------

namespace {

double opt_val(const std::optional<double>& v) {
  return v ? *v : econ::Dataset::kMissing;
}

double flag_val(const std::optional<bool>& v) {
  return v ? (*v ? 1.0 : 0.0) : econ::Dataset::kMissing;
}

std::vector<tfp::TfpInput> tfp_inputs(
    const std::vector<DerivedFirmYear>& derived) {
  std::vector<tfp::TfpInput> rows;
  for (const auto& d : derived) {
    if (!d.log_sale || !d.log_cogs || !d.log_ppent || !d.log_capx) continue;
    rows.push_back({d.firm_id, d.year, d.naics2, *d.log_sale, *d.log_cogs,
                    *d.log_ppent, *d.log_capx});
  }
  return rows;
}

}  // namespace

specs::AnalysisBundle build_bundle(
    const Panel& panel, const std::vector<DerivedFirmYear>& derived,
    const tfp::TfpResult& tfp_result,
    const std::vector<ClassifiedFirmYear>& classified,
    const std::vector<agg::IndustryYearAggregate>& industry,
    ZombieDefinition definition) {
  const size_t n = panel.size();
  if (derived.size() != n || classified.size() != n)
    throw std::runtime_error("artifact row counts do not align with the panel");

  std::vector<std::string> unit(n);
  std::vector<int> year(n);
  for (size_t i = 0; i < n; ++i) {
    unit[i] = panel.rows()[i].firm_id;
    year[i] = panel.rows()[i].year;
  }
  econ::Dataset firm(std::move(unit), std::move(year));

  std::vector<long long> naics(n), iy(n);
  for (size_t i = 0; i < n; ++i) {
    naics[i] = panel.rows()[i].naics2;
    iy[i] = static_cast<long long>(panel.rows()[i].naics2) * 100000 +
            panel.rows()[i].year;
  }
  firm.add_key("naics2", std::move(naics));
  firm.add_key("iy", std::move(iy));

  auto col = [&](auto&& get) {
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = get(i);
    return v;
  };

  firm.add_column("nz", col([&](size_t i) {
    const auto s = classified[i].status(definition);
    return s ? (*s ? 0.0 : 1.0) : econ::Dataset::kMissing;
  }));
  firm.add_column("z", col([&](size_t i) {
    return flag_val(classified[i].status(definition));
  }));
  firm.add_column("sm", col([&](size_t i) { return flag_val(classified[i].sm); }));
  firm.add_column("nb", col([&](size_t i) { return classified[i].nb ? 1.0 : 0.0; }));
  firm.add_column("bank_dep",
                  col([&](size_t i) { return classified[i].bank_dep ? 1.0 : 0.0; }));
  firm.add_column("capm_dep",
                  col([&](size_t i) { return classified[i].capm_dep ? 1.0 : 0.0; }));
  firm.add_column("no_bond_short", col([&](size_t i) {
    return classified[i].bond_short ? 0.0 : 1.0;
  }));
  firm.add_column("no_bond_long", col([&](size_t i) {
    return classified[i].bond_long ? 0.0 : 1.0;
  }));
  firm.add_column("has_instr", col([&](size_t i) {
    return classified[i].has_instruments ? 1.0 : 0.0;
  }));
  firm.add_column("log_at", col([&](size_t i) { return opt_val(derived[i].log_at); }));
  firm.add_column("rd_intensity",
                  col([&](size_t i) { return opt_val(derived[i].rd_intensity); }));
  firm.add_column("tangibility", col([&](size_t i) {
    return opt_val(derived[i].asset_tangibility);
  }));
  firm.add_column("cash_ratio",
                  col([&](size_t i) { return opt_val(derived[i].cash_ratio); }));
  firm.add_column("roa", col([&](size_t i) { return opt_val(derived[i].roa); }));
  firm.add_column("dlog_k", col([&](size_t i) { return opt_val(derived[i].dlog_k); }));
  firm.add_column("demp_sym",
                  col([&](size_t i) { return opt_val(derived[i].emp_growth_sym); }));
  firm.add_column("dlog_emp",
                  col([&](size_t i) { return opt_val(derived[i].dlog_emp); }));
  firm.add_column("dlog_sale",
                  col([&](size_t i) { return opt_val(derived[i].dlog_sale); }));

  // tfp merged by (firm, year)
  {
    std::unordered_map<std::string, std::map<int, double>> tfp_of;
    for (const auto& r : tfp_result.rows) tfp_of[r.firm_id][r.year] = r.tfp;
    firm.add_column("tfp", col([&](size_t i) {
      auto it = tfp_of.find(panel.rows()[i].firm_id);
      if (it == tfp_of.end()) return econ::Dataset::kMissing;
      auto yt = it->second.find(panel.rows()[i].year);
      return yt == it->second.end() ? econ::Dataset::kMissing : yt->second;
    }));
  }

  // industry-year aggregates merged by (naics2, year); per coarse bucket
  {
    struct CellVals {
      double bc = econ::Dataset::kMissing, bn = econ::Dataset::kMissing;
      double dbc = econ::Dataset::kMissing, dbn = econ::Dataset::kMissing;
      double dep = 0;
      double nb_share = econ::Dataset::kMissing;
    };
    std::map<std::pair<int, int>, CellVals> short_cells, long_cells;
    for (const auto& row : industry) {
      auto& m = row.bucket == CoarseMaturity::Short ? short_cells : long_cells;
      auto& c = m[{row.naics2, row.year}];
      c.bc = row.bc_z_share ? *row.bc_z_share : econ::Dataset::kMissing;
      c.bn = row.bn_z_share ? *row.bn_z_share : econ::Dataset::kMissing;
      c.dbc = row.dlog_bc_z ? *row.dlog_bc_z : econ::Dataset::kMissing;
      c.dbn = row.dlog_bn_z ? *row.dlog_bn_z : econ::Dataset::kMissing;
      c.dep = row.bank_dep_sy ? 1.0 : 0.0;
      c.nb_share = row.n_firms > 0 ? row.nb_share : econ::Dataset::kMissing;
    }
    auto cellcol = [&](const std::map<std::pair<int, int>, CellVals>& m,
                       auto&& pick) {
      return col([&](size_t i) {
        auto it = m.find({panel.rows()[i].naics2, panel.rows()[i].year});
        return it == m.end() ? econ::Dataset::kMissing : pick(it->second);
      });
    };
    firm.add_column("bc_z_short",
                    cellcol(short_cells, [](const CellVals& c) { return c.bc; }));
    firm.add_column("bn_z_short",
                    cellcol(short_cells, [](const CellVals& c) { return c.bn; }));
    firm.add_column("bc_z_long",
                    cellcol(long_cells, [](const CellVals& c) { return c.bc; }));
    firm.add_column("bn_z_long",
                    cellcol(long_cells, [](const CellVals& c) { return c.bn; }));
    firm.add_column("dlog_bc_z_short",
                    cellcol(short_cells, [](const CellVals& c) { return c.dbc; }));
    firm.add_column("dlog_bn_z_short",
                    cellcol(short_cells, [](const CellVals& c) { return c.dbn; }));
    firm.add_column("dlog_bc_z_long",
                    cellcol(long_cells, [](const CellVals& c) { return c.dbc; }));
    firm.add_column("dlog_bn_z_long",
                    cellcol(long_cells, [](const CellVals& c) { return c.dbn; }));

    // industry-level dataset
    std::set<std::pair<int, int>> keys;
    for (const auto& [k, v] : short_cells) keys.insert(k);
    for (const auto& [k, v] : long_cells) keys.insert(k);
    std::vector<std::string> iunit;
    std::vector<int> iyear;
    for (const auto& [s, t] : keys) {
      iunit.push_back(std::to_string(s));
      iyear.push_back(t);
    }
    econ::Dataset ind(std::move(iunit), std::move(iyear));
    const size_t m = keys.size();
    auto icol = [&](auto&& get) {
      std::vector<double> v;
      v.reserve(m);
      for (const auto& key : keys) v.push_back(get(key));
      return v;
    };
    auto pick_cell = [&](const std::map<std::pair<int, int>, CellVals>& cm,
                         const std::pair<int, int>& key, auto&& pick) {
      auto it = cm.find(key);
      return it == cm.end() ? econ::Dataset::kMissing : pick(it->second);
    };
    ind.add_column("nb_share", icol([&](const std::pair<int, int>& k) {
      const double s = pick_cell(short_cells, k,
                                 [](const CellVals& c) { return c.nb_share; });
      if (std::isfinite(s)) return s;
      return pick_cell(long_cells, k,
                       [](const CellVals& c) { return c.nb_share; });
    }));
    for (const std::string b : {"short", "long"}) {
      const auto& cm = b == "short" ? short_cells : long_cells;
      ind.add_column("bc_z_" + b, icol([&](const std::pair<int, int>& k) {
        return pick_cell(cm, k, [](const CellVals& c) { return c.bc; });
      }));
      ind.add_column("bn_z_" + b, icol([&](const std::pair<int, int>& k) {
        return pick_cell(cm, k, [](const CellVals& c) { return c.bn; });
      }));
      ind.add_column("bank_dep_sy_" + b, icol([&](const std::pair<int, int>& k) {
        return pick_cell(cm, k, [](const CellVals& c) { return c.dep; });
      }));
      ind.add_column("capm_dep_sy_" + b, icol([&](const std::pair<int, int>& k) {
        const double d = pick_cell(cm, k, [](const CellVals& c) { return c.dep; });
        return std::isfinite(d) ? 1.0 - d : d;
      }));
    }
    specs::AnalysisBundle bundle;
    bundle.firm = std::move(firm);
    bundle.industry = std::move(ind);
    return bundle;
  }
}

AnalysisArtifacts analyze(const PreparedData& data, const RunConfig& cfg) {
  AnalysisArtifacts a;
  a.derived = derive_metrics(data.panel, data.labor);
  tfp::TfpConfig tcfg = cfg.tfp;
  tcfg.threads = cfg.threads;
  a.tfp = tfp::estimate_tfp(tfp_inputs(a.derived), tcfg);
  a.classified = classify_panel(data.panel, a.derived, data.accepted, cfg.threads);
  a.enriched = agg::enrich_instruments(data.accepted, data.panel, a.classified,
                                       cfg.definition, cfg.status_lag);
  a.industry = agg::build_industry_year(a.enriched, a.classified, cfg.weight);
  a.bundle = build_bundle(data.panel, a.derived, a.tfp, a.classified, a.industry,
                          cfg.definition);
  return a;
}

// ---------------------------------------------------------------------------
// stage runner
// ---------------------------------------------------------------------------

const std::vector<std::string> kStageOrder = {
    "ingest", "derive", "tfp", "classify", "aggregate", "estimate", "report"};

namespace {

std::string art(const RunConfig& cfg, const std::string& name) {
  return cfg.output_dir + "/" + name;
}

void need(const RunConfig& cfg, const std::string& file,
          const std::string& producer) {
  if (!fs::exists(art(cfg, file)))
    throw MissingDependency(producer, file);
}

void log_line(const RunConfig& cfg, const std::string& text) {
  std::ofstream log(art(cfg, "run_log.txt"), std::ios::app);
  log << text << "\n";
}

const std::vector<std::string> kPanelHeader = {
    "firm_id", "year",   "naics2", "at",   "sale", "cogs",
    "ppent",   "capx",   "xint",   "ebitda", "dltt", "dlc",
    "ib",      "che",    "lt",     "xrd",  "emp",  "xlr",
    "tobins_q", "first_listed_year", "exit_flag", "market_equity"};

void write_panel_csv(const std::string& path, const Panel& panel) {
  csv::Table t;
  t.header = kPanelHeader;
  auto cell = [](const std::optional<double>& v) { return csv::format_optional(v); };
  for (const auto& r : panel.rows()) {
    t.rows.push_back({r.firm_id, std::to_string(r.year), std::to_string(r.naics2),
                      cell(r.at), cell(r.sale), cell(r.cogs), cell(r.ppent),
                      cell(r.capx), cell(r.xint), cell(r.ebitda), cell(r.dltt),
                      cell(r.dlc), cell(r.ib), cell(r.che), cell(r.lt),
                      cell(r.xrd), cell(r.emp), cell(r.xlr), cell(r.tobins_q),
                      std::to_string(r.first_listed_year),
                      r.exit_flag ? "1" : "0", cell(r.market_equity)});
  }
  csv::write_file(path, t);
}

Panel read_panel_csv(const std::string& path) {
  IngestReport rep;
  YearWindow all{-100000, 100000};
  Panel p = ingest_firm_years(path, all, rep);
  if (rep.dropped_malformed > 0)
    throw std::runtime_error(path + ": malformed persisted panel");
  return p;
}

void write_instruments_csv(const std::string& path,
                           const std::vector<DebtInstrument>& v) {
  csv::Table t;
  t.header = {"firm_id", "component_id", "report_year",
              "debt_type", "face_value", "maturity_quarters"};
  for (const auto& d : v)
    t.rows.push_back({d.firm_id, d.component_id, std::to_string(d.report_year),
                      to_string(d.debt_type), csv::format_double(d.face_value),
                      std::to_string(d.maturity_quarters)});
  csv::write_file(path, t);
}

std::vector<DebtInstrument> read_instruments_csv(const std::string& path) {
  InstrumentLoadReport rep;
  auto v = load_instruments(path, rep);
  if (rep.dropped_malformed > 0)
    throw std::runtime_error(path + ": malformed persisted instruments");
  return v;
}

std::string opt_cell(const std::optional<double>& v) {
  return csv::format_optional(v);
}
std::string flag_cell(const std::optional<bool>& v) {
  if (!v) return "";
  return *v ? "1" : "0";
}

std::vector<DerivedFirmYear> read_derived_csv(const std::string& path,
                                              const Panel& panel);

void write_derived_csv(const std::string& path,
                       const std::vector<DerivedFirmYear>& rows) {
  csv::Table t;
  t.header = {"firm_id",      "year",        "naics2",
              "icr_low",      "leverage",    "tangibility",
              "capx_at",      "roa",         "rd_intensity",
              "cash_ratio",   "age",         "value_added",
              "tobins_q_filled", "q_is_proxy", "log_at",
              "log_ppent",    "log_sale",    "log_cogs",
              "log_capx",     "emp_growth_sym", "dlog_k",
              "dlog_emp",     "dlog_sale"};
  for (const auto& d : rows) {
    t.rows.push_back({d.firm_id,
                      std::to_string(d.year),
                      std::to_string(d.naics2),
                      flag_cell(d.icr_low_coverage),
                      opt_cell(d.leverage),
                      opt_cell(d.asset_tangibility),
                      opt_cell(d.capx_over_assets),
                      opt_cell(d.roa),
                      opt_cell(d.rd_intensity),
                      opt_cell(d.cash_ratio),
                      std::to_string(d.age),
                      opt_cell(d.value_added),
                      opt_cell(d.tobins_q_filled),
                      d.tobins_q_is_proxy ? "1" : "0",
                      opt_cell(d.log_at),
                      opt_cell(d.log_ppent),
                      opt_cell(d.log_sale),
                      opt_cell(d.log_cogs),
                      opt_cell(d.log_capx),
                      opt_cell(d.emp_growth_sym),
                      opt_cell(d.dlog_k),
                      opt_cell(d.dlog_emp),
                      opt_cell(d.dlog_sale)});
  }
  csv::write_file(path, t);
}

std::vector<DerivedFirmYear> read_derived_csv(const std::string& path,
                                              const Panel& panel) {
  csv::Table t = csv::read_file(path);
  std::vector<DerivedFirmYear> out;
  out.reserve(t.rows.size());
  for (const auto& c : t.rows) {
    DerivedFirmYear d;
    size_t j = 0;
    d.firm_id = c[j++];
    d.year = static_cast<int>(*csv::parse_int(c[j++]));
    d.naics2 = static_cast<int>(*csv::parse_int(c[j++]));
    d.icr_low_coverage = csv::parse_flag(c[j++]);
    d.leverage = csv::parse_double(c[j++]);
    d.asset_tangibility = csv::parse_double(c[j++]);
    d.capx_over_assets = csv::parse_double(c[j++]);
    d.roa = csv::parse_double(c[j++]);
    d.rd_intensity = csv::parse_double(c[j++]);
    d.cash_ratio = csv::parse_double(c[j++]);
    d.age = static_cast<int>(*csv::parse_int(c[j++]));
    d.value_added = csv::parse_double(c[j++]);
    d.tobins_q_filled = csv::parse_double(c[j++]);
    d.tobins_q_is_proxy = csv::parse_flag(c[j++]).value_or(false);
    d.log_at = csv::parse_double(c[j++]);
    d.log_ppent = csv::parse_double(c[j++]);
    d.log_sale = csv::parse_double(c[j++]);
    d.log_cogs = csv::parse_double(c[j++]);
    d.log_capx = csv::parse_double(c[j++]);
    d.emp_growth_sym = csv::parse_double(c[j++]);
    d.dlog_k = csv::parse_double(c[j++]);
    d.dlog_emp = csv::parse_double(c[j++]);
    d.dlog_sale = csv::parse_double(c[j++]);
    out.push_back(std::move(d));
  }
  if (out.size() != panel.size())
    throw std::runtime_error(path + ": derived rows do not match the panel");
  return out;
}

void write_classified_csv(const std::string& path,
                          const std::vector<ClassifiedFirmYear>& rows) {
  csv::Table t;
  t.header = {"firm_id",   "year",      "naics2",        "z_broad",
              "z_narrow_x", "z_nar",    "sm",            "nb",
              "e_exit",    "bank_dep",  "capm_dep",      "has_instr",
              "bond_short", "no_bond_short", "bond_long", "no_bond_long"};
  for (const auto& c : rows) {
    t.rows.push_back({c.firm_id, std::to_string(c.year), std::to_string(c.naics2),
                      flag_cell(c.z_broad), flag_cell(c.z_narrow_x),
                      flag_cell(c.z_nar), flag_cell(c.sm), c.nb ? "1" : "0",
                      c.e_exit ? "1" : "0", c.bank_dep ? "1" : "0",
                      c.capm_dep ? "1" : "0", c.has_instruments ? "1" : "0",
                      c.bond_short ? "1" : "0", c.bond_short ? "0" : "1",
                      c.bond_long ? "1" : "0", c.bond_long ? "0" : "1"});
  }
  csv::write_file(path, t);
}

std::vector<ClassifiedFirmYear> read_classified_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  std::vector<ClassifiedFirmYear> out;
  out.reserve(t.rows.size());
  for (const auto& c : t.rows) {
    ClassifiedFirmYear x;
    x.firm_id = c[0];
    x.year = static_cast<int>(*csv::parse_int(c[1]));
    x.naics2 = static_cast<int>(*csv::parse_int(c[2]));
    x.z_broad = csv::parse_flag(c[3]);
    x.z_narrow_x = csv::parse_flag(c[4]);
    x.z_nar = csv::parse_flag(c[5]);
    x.sm = csv::parse_flag(c[6]);
    x.nb = csv::parse_flag(c[7]).value_or(false);
    x.e_exit = csv::parse_flag(c[8]).value_or(false);
    x.bank_dep = csv::parse_flag(c[9]).value_or(false);
    x.capm_dep = csv::parse_flag(c[10]).value_or(false);
    x.has_instruments = csv::parse_flag(c[11]).value_or(false);
    x.bond_short = csv::parse_flag(c[12]).value_or(false);
    x.bond_long = csv::parse_flag(c[14]).value_or(false);
    out.push_back(std::move(x));
  }
  return out;
}

void write_tfp_csv(const std::string& path, const tfp::TfpResult& r) {
  csv::Table t;
  t.header = {"firm_id", "year", "tfp", "beta_free", "beta_k", "industry",
              "converged"};
  std::map<int, const tfp::IndustryFit*> fit_of;
  for (const auto& f : r.fits) fit_of[f.naics2] = &f;
  for (const auto& row : r.rows) {
    const auto* fit = fit_of.at(row.fit_industry);
    t.rows.push_back({row.firm_id, std::to_string(row.year),
                      csv::format_double(row.tfp),
                      csv::format_double(fit->beta_free),
                      csv::format_double(fit->beta_k),
                      std::to_string(row.fit_industry),
                      fit->converged ? "1" : "0"});
  }
  csv::write_file(path, t);
}

tfp::TfpResult read_tfp_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  tfp::TfpResult out;
  std::map<int, tfp::IndustryFit> fits;
  for (const auto& c : t.rows) {
    tfp::TfpRow r;
    r.firm_id = c[0];
    r.year = static_cast<int>(*csv::parse_int(c[1]));
    r.tfp = *csv::parse_double(c[2]);
    r.fit_industry = static_cast<int>(*csv::parse_int(c[5]));
    r.naics2 = r.fit_industry;
    out.rows.push_back(r);
    auto& f = fits[r.fit_industry];
    f.naics2 = r.fit_industry;
    f.beta_free = *csv::parse_double(c[3]);
    f.beta_k = *csv::parse_double(c[4]);
    f.converged = csv::parse_flag(c[6]).value_or(false);
  }
  for (const auto& [k, f] : fits) out.fits.push_back(f);
  return out;
}

void write_industry_csv(const std::string& path,
                        const std::vector<agg::IndustryYearAggregate>& rows) {
  csv::Table t;
  t.header = {"naics2", "year",      "bucket",     "bc_z_share", "bn_z_share",
              "dlog_bc_z", "dlog_bn_z", "bank_dep_sy", "capm_dep_sy",
              "nb_count", "n_firms",  "nb_share"};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.naics2), std::to_string(r.year),
                      to_string(r.bucket), opt_cell(r.bc_z_share),
                      opt_cell(r.bn_z_share), opt_cell(r.dlog_bc_z),
                      opt_cell(r.dlog_bn_z), r.bank_dep_sy ? "1" : "0",
                      r.capm_dep_sy ? "1" : "0", std::to_string(r.nb_count),
                      std::to_string(r.n_firms), csv::format_double(r.nb_share)});
  }
  csv::write_file(path, t);
}

std::vector<agg::IndustryYearAggregate> read_industry_csv(
    const std::string& path) {
  csv::Table t = csv::read_file(path);
  std::vector<agg::IndustryYearAggregate> out;
  for (const auto& c : t.rows) {
    agg::IndustryYearAggregate r;
    r.naics2 = static_cast<int>(*csv::parse_int(c[0]));
    r.year = static_cast<int>(*csv::parse_int(c[1]));
    r.bucket = c[2] == "short" ? CoarseMaturity::Short : CoarseMaturity::Long;
    r.bc_z_share = csv::parse_double(c[3]);
    r.bn_z_share = csv::parse_double(c[4]);
    r.dlog_bc_z = csv::parse_double(c[5]);
    r.dlog_bn_z = csv::parse_double(c[6]);
    r.bank_dep_sy = csv::parse_flag(c[7]).value_or(false);
    r.capm_dep_sy = csv::parse_flag(c[8]).value_or(false);
    r.nb_count = *csv::parse_int(c[9]);
    r.n_firms = *csv::parse_int(c[10]);
    r.nb_share = *csv::parse_double(c[11]);
    out.push_back(r);
  }
  return out;
}

}  // namespace

void stage_synth(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  synth::generate_files(cfg.synth, cfg.output_dir);
  log_line(cfg, "synth: wrote firm_years/instruments/deflators/labor_costs");
}

void stage_ingest(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  RunConfig local = cfg;
  // a synth stage output in the same directory serves as default input
  if (local.firm_years.empty()) local.firm_years = art(cfg, "firm_years.csv");
  if (local.instruments.empty()) local.instruments = art(cfg, "instruments.csv");
  if (local.deflators.empty()) local.deflators = art(cfg, "deflators.csv");
  if (local.labor_costs.empty()) local.labor_costs = art(cfg, "labor_costs.csv");
  for (const auto& [path, what] :
       {std::pair{local.firm_years, "firm_years.csv"},
        {local.instruments, "instruments.csv"},
        {local.deflators, "deflators.csv"},
        {local.labor_costs, "labor_costs.csv"}}) {
    if (!fs::exists(path))
      throw std::runtime_error("input file not found: " + path);
  }
  PreparedData data = prepare_from_files(local);
  write_panel_csv(art(cfg, "panel.csv"), data.panel);
  write_instruments_csv(art(cfg, "instruments_clean.csv"), data.accepted);

  csv::Table rep;
  rep.header = {"metric", "value"};
  auto add = [&rep](const std::string& k, long v) {
    rep.rows.push_back({k, std::to_string(v)});
  };
  add("input_rows", data.ingest.input_rows);
  add("kept", data.ingest.kept);
  add("dropped_window", data.ingest.dropped_window);
  add("dropped_sector", data.ingest.dropped_sector);
  add("dropped_malformed", data.ingest.dropped_malformed);
  add("instrument_rows", data.instrument_load.input_rows);
  add("instrument_malformed", data.instrument_load.dropped_malformed);
  add("instrument_duplicates_removed", data.duplicates_removed);
  add("instrument_no_financials", data.acceptance.dropped_no_financials);
  add("instrument_rejected_face_value", data.acceptance.rejected_face_value);
  add("instrument_accepted", data.acceptance.accepted_total);
  csv::write_file(art(cfg, "ingest_report.csv"), rep);

  csv::Table acc;
  acc.header = {"debt_type", "bucket", "total", "accepted", "rate"};
  for (const auto& [key, cell] : data.acceptance.cells)
    acc.rows.push_back({to_string(key.first), to_string(key.second),
                        std::to_string(cell.total), std::to_string(cell.accepted),
                        csv::format_double(cell.rate())});
  csv::write_file(art(cfg, "acceptance_report.csv"), acc);
  log_line(cfg, "ingest: kept " + std::to_string(data.ingest.kept) + " firm-years, accepted " +
                    std::to_string(data.acceptance.accepted_total) + " instruments");
}

void stage_derive(const RunConfig& cfg) {
  need(cfg, "panel.csv", "ingest");
  Panel panel = read_panel_csv(art(cfg, "panel.csv"));
  std::string labor_path = cfg.labor_costs.empty() ? art(cfg, "labor_costs.csv")
                                                   : cfg.labor_costs;
  LaborCostTable labor;
  if (fs::exists(labor_path)) labor = load_labor_costs(labor_path);
  auto derived = derive_metrics(panel, labor);
  write_derived_csv(art(cfg, "derived.csv"), derived);
  log_line(cfg, "derive: " + std::to_string(derived.size()) + " rows");
}

void stage_tfp(const RunConfig& cfg) {
  need(cfg, "panel.csv", "ingest");
  need(cfg, "derived.csv", "derive");
  Panel panel = read_panel_csv(art(cfg, "panel.csv"));
  auto derived = read_derived_csv(art(cfg, "derived.csv"), panel);
  tfp::TfpConfig tcfg = cfg.tfp;
  tcfg.threads = cfg.threads;
  auto result = tfp::estimate_tfp(tfp_inputs(derived), tcfg);
  write_tfp_csv(art(cfg, "tfp.csv"), result);
  log_line(cfg, "tfp: " + std::to_string(result.rows.size()) + " rows, " +
                    std::to_string(result.fits.size()) + " fits");
}

void stage_classify(const RunConfig& cfg) {
  need(cfg, "panel.csv", "ingest");
  need(cfg, "derived.csv", "derive");
  need(cfg, "instruments_clean.csv", "ingest");
  Panel panel = read_panel_csv(art(cfg, "panel.csv"));
  auto derived = read_derived_csv(art(cfg, "derived.csv"), panel);
  auto accepted = read_instruments_csv(art(cfg, "instruments_clean.csv"));
  auto classified = classify_panel(panel, derived, accepted, cfg.threads);
  write_classified_csv(art(cfg, "classified.csv"), classified);

  csv::Table diag;
  diag.header = {"variable", "correlation", "n", "note"};
  for (const std::string v : {"tobins_q", "xint"}) {
    auto d = exit_and_missingness(panel, v);
    diag.rows.push_back({d.variable, opt_cell(d.correlation),
                         std::to_string(d.n), d.note});
  }
  csv::write_file(art(cfg, "missingness.csv"), diag);
  log_line(cfg, "classify: " + std::to_string(classified.size()) + " rows");
}

void stage_aggregate(const RunConfig& cfg) {
  need(cfg, "panel.csv", "ingest");
  need(cfg, "classified.csv", "classify");
  need(cfg, "instruments_clean.csv", "ingest");
  Panel panel = read_panel_csv(art(cfg, "panel.csv"));
  auto classified = read_classified_csv(art(cfg, "classified.csv"));
  auto accepted = read_instruments_csv(art(cfg, "instruments_clean.csv"));
  auto enriched = agg::enrich_instruments(accepted, panel, classified,
                                          cfg.definition, cfg.status_lag);
  auto industry = agg::build_industry_year(enriched, classified, cfg.weight);
  write_industry_csv(art(cfg, "industry_year.csv"), industry);
  log_line(cfg, "aggregate: " + std::to_string(industry.size()) + " cells");
}

void stage_estimate(const RunConfig& cfg) {
  need(cfg, "panel.csv", "ingest");
  need(cfg, "derived.csv", "derive");
  need(cfg, "tfp.csv", "tfp");
  need(cfg, "classified.csv", "classify");
  need(cfg, "industry_year.csv", "aggregate");
  Panel panel = read_panel_csv(art(cfg, "panel.csv"));
  auto derived = read_derived_csv(art(cfg, "derived.csv"), panel);
  auto tfp_result = read_tfp_csv(art(cfg, "tfp.csv"));
  auto classified = read_classified_csv(art(cfg, "classified.csv"));
  auto industry = read_industry_csv(art(cfg, "industry_year.csv"));
  auto bundle = build_bundle(panel, derived, tfp_result, classified, industry,
                             cfg.definition);

  std::vector<specs::CatalogEntry> entries;
  if (!cfg.catalog_file.empty()) {
    std::ifstream in(cfg.catalog_file);
    if (!in) throw std::runtime_error("cannot open catalog " + cfg.catalog_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    entries = specs::parse_catalog(buf.str());
  } else {
    entries = specs::builtin_catalog();
    std::ofstream out(art(cfg, "catalog.spec"));
    out << specs::serialize_catalog(entries);
  }

  std::vector<specs::EntryResult> results;
  std::vector<std::string> failures;
  {
    auto all = specs::run_catalog_tolerant(bundle, entries, cfg.threads, failures);
    results = std::move(all);
  }

  // one CSV per table group, mirroring the published layout row-wise
  std::map<std::string, csv::Table> tables;
  csv::Table manifest;
  manifest.header = {"id", "table",   "maturity", "dependent", "n_obs",
                     "n_units", "n_clusters", "within_r2", "dropped_singletons",
                     "status"};
  for (const auto& er : results) {
    const auto& e = er.entry;
    const auto& r = er.result;
    const bool failed = r.names.empty();
    auto& t = tables[e.table];
    if (t.header.empty())
      t.header = {"id", "maturity", "dependent", "regressor",
                  "coefficient", "se", "stars", "n_obs", "n_groups", "within_r2"};
    for (size_t j = 0; j < r.names.size(); ++j) {
      t.rows.push_back({e.id, e.maturity, e.dependent_label, r.names[j],
                        csv::format_double(r.coef[j]),
                        csv::format_double(r.se[j]), r.stars[j],
                        std::to_string(r.n_obs), std::to_string(r.n_clusters),
                        std::isfinite(r.within_r2)
                            ? csv::format_double(r.within_r2)
                            : ""});
    }
    manifest.rows.push_back(
        {e.id, e.table, e.maturity, e.dependent_label, std::to_string(r.n_obs),
         std::to_string(r.n_units), std::to_string(r.n_clusters),
         std::isfinite(r.within_r2) ? csv::format_double(r.within_r2) : "",
         std::to_string(r.dropped_singletons), failed ? "failed" : "ok"});
  }
  for (auto& [name, t] : tables)
    csv::write_file(art(cfg, "results_" + name + ".csv"), t);
  csv::write_file(art(cfg, "estimate_manifest.csv"), manifest);
  for (const auto& f : failures) log_line(cfg, "estimate: " + f);
  log_line(cfg, "estimate: " + std::to_string(results.size()) + " entries");
}

void emit_figures(const RunConfig& cfg) {
  need(cfg, "panel.csv", "ingest");
  need(cfg, "classified.csv", "classify");
  need(cfg, "instruments_clean.csv", "ingest");
  Panel panel = read_panel_csv(art(cfg, "panel.csv"));
  auto classified = read_classified_csv(art(cfg, "classified.csv"));
  auto accepted = read_instruments_csv(art(cfg, "instruments_clean.csv"));
  auto enriched = agg::enrich_instruments(accepted, panel, classified,
                                          cfg.definition, cfg.status_lag);

  // figure 1: prevalence per year per definition, determinable firms only
  {
    struct C {
      long det[3] = {0, 0, 0};
      long z[3] = {0, 0, 0};
    };
    std::map<int, C> years;
    for (const auto& c : classified) {
      auto& y = years[c.year];
      const std::optional<bool> st[3] = {c.z_broad, c.z_narrow_x, c.z_nar};
      for (int d = 0; d < 3; ++d)
        if (st[d]) {
          ++y.det[d];
          if (*st[d]) ++y.z[d];
        }
    }
    csv::Table t;
    t.header = {"year", "share_broad", "share_narrow_x", "share_nar"};
    for (const auto& [year, c] : years) {
      auto sh = [&](int d) {
        return c.det[d] ? csv::format_double(double(c.z[d]) / c.det[d])
                        : std::string();
      };
      t.rows.push_back({std::to_string(year), sh(0), sh(1), sh(2)});
    }
    csv::write_file(art(cfg, "fig1_prevalence.csv"), t);
  }

  // figure 2: zombie share of new lending per year, type, bucket; full
  // sample and the SME borrower subsample
  {
    csv::Table t;
    t.header = {"year", "debt_type", "bucket", "sample", "z_share"};
    for (const bool sme : {false, true}) {
      auto table = agg::lending_table(enriched, cfg.weight, true, sme);
      for (const auto& [key, cell] : table) {
        auto share = cell.z_share();
        t.rows.push_back({std::to_string(key.year), to_string(key.type),
                          to_string(key.bucket), sme ? "sme" : "all",
                          share ? csv::format_double(*share) : ""});
      }
    }
    csv::write_file(art(cfg, "fig2_lending_shares.csv"), t);
  }

  // figure 3: zombie share (determinable denominator) vs newbie share
  {
    struct C {
      long det = 0, z = 0, nb = 0, firms = 0;
    };
    std::map<int, C> years;
    for (const auto& c : classified) {
      auto& y = years[c.year];
      ++y.firms;
      if (c.nb) ++y.nb;
      const auto st = c.status(cfg.definition);
      if (st) {
        ++y.det;
        if (*st) ++y.z;
      }
    }
    csv::Table t;
    t.header = {"year", "z_share", "nb_share", "n_determinable", "n_firms"};
    for (const auto& [year, c] : years)
      t.rows.push_back({std::to_string(year),
                        c.det ? csv::format_double(double(c.z) / c.det) : "",
                        c.firms ? csv::format_double(double(c.nb) / c.firms) : "",
                        std::to_string(c.det), std::to_string(c.firms)});
    csv::write_file(art(cfg, "fig3_zombies_vs_newbies.csv"), t);
  }
}

void stage_report(const RunConfig& cfg) {
  emit_figures(cfg);
  need(cfg, "instruments_clean.csv", "ingest");
  need(cfg, "classified.csv", "classify");
  need(cfg, "panel.csv", "ingest");
  Panel panel = read_panel_csv(art(cfg, "panel.csv"));
  auto classified = read_classified_csv(art(cfg, "classified.csv"));
  auto accepted = read_instruments_csv(art(cfg, "instruments_clean.csv"));
  auto enriched = agg::enrich_instruments(accepted, panel, classified,
                                          cfg.definition, cfg.status_lag);
  // pooled counts in the shape of the maturity table
  auto table = agg::lending_table(enriched, agg::ShareWeight::Count, false, false);
  csv::Table t;
  t.header = {"debt_type", "bucket", "all", "zombies", "non_zombies"};
  for (const auto& [key, cell] : table) {
    const long z = static_cast<long>(cell.zombie);
    const long det = static_cast<long>(cell.total);
    const long all = static_cast<long>(cell.all_incl_undetermined);
    t.rows.push_back({to_string(key.type), to_string(key.bucket),
                      std::to_string(all), std::to_string(z),
                      std::to_string(det - z)});
  }
  csv::write_file(art(cfg, "table2_counts.csv"), t);
  log_line(cfg, "report: figures and count tables written");
}

void run_stages(const RunConfig& cfg, const std::vector<std::string>& stages) {
  std::vector<std::string> ordered;
  for (const auto& name : kStageOrder)
    if (std::find(stages.begin(), stages.end(), name) != stages.end())
      ordered.push_back(name);
  for (const auto& s : stages) {
    if (s == "synth") continue;
    if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end())
      throw std::runtime_error("unknown stage '" + s + "'");
  }
  if (std::find(stages.begin(), stages.end(), "synth") != stages.end())
    stage_synth(cfg);
  for (const auto& s : ordered) {
    if (s == "ingest") stage_ingest(cfg);
    else if (s == "derive") stage_derive(cfg);
    else if (s == "tfp") stage_tfp(cfg);
    else if (s == "classify") stage_classify(cfg);
    else if (s == "aggregate") stage_aggregate(cfg);
    else if (s == "estimate") stage_estimate(cfg);
    else if (s == "report") stage_report(cfg);
  }
}

}  // namespace zpanel::pipeline
