#include "zpanel/specs.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <sstream>
#include <stdexcept>

namespace zpanel::specs {

namespace {

using econ::Factor;
using econ::Term;

Term term_of(const std::string& expr) {
  // "col:lag * col:lag * ..."
  Term t;
  std::string token;
  std::istringstream in(expr);
  while (std::getline(in, token, '*')) {
    // trim
    const auto b = token.find_first_not_of(" \t");
    const auto e = token.find_last_not_of(" \t");
    if (b == std::string::npos) throw std::runtime_error("empty factor in '" + expr + "'");
    token = token.substr(b, e - b + 1);
    Factor f;
    auto colon = token.find(':');
    if (colon == std::string::npos) {
      f.column = token;
      f.lag = 0;
    } else {
      f.column = token.substr(0, colon);
      f.lag = std::stoi(token.substr(colon + 1));
    }
    t.factors.push_back(std::move(f));
  }
  if (t.factors.empty()) throw std::runtime_error("empty term '" + expr + "'");
  return t;
}

std::string factor_str(const Factor& f) {
  return f.column + ":" + std::to_string(f.lag);
}

std::string term_str(const Term& t) {
  std::string s;
  for (size_t i = 0; i < t.factors.size(); ++i) {
    if (i) s += " * ";
    s += factor_str(t.factors[i]);
  }
  return s;
}

struct PerformanceShape {
  std::string dependent;
  std::vector<std::string> controls;
  double scale = 1.0;
  bool growth_regressor = false;  // credit enters as contemporaneous dlog
};

PerformanceShape shape_tfp() {
  return {"tfp", {"log_at:1", "rd_intensity:1"}, 1.0, false};
}
PerformanceShape shape_capital() {
  return {"dlog_k", {"log_at:1", "tangibility:1"}, 1.0, false};
}
PerformanceShape shape_employment() {
  return {"demp_sym",
          {"log_at:1", "cash_ratio:1", "roa:1", "tangibility:1"},
          100.0,
          true};
}

std::pair<std::string, std::string> credit_columns(const PerformanceShape& s,
                                                   const std::string& maturity) {
  if (s.growth_regressor)
    return {"dlog_bc_z_" + maturity + ":0", "dlog_bn_z_" + maturity + ":0"};
  return {"bc_z_" + maturity + ":1", "bn_z_" + maturity + ":1"};
}

CatalogEntry baseline_entry(const std::string& id, const std::string& table,
                            const PerformanceShape& s,
                            const std::string& maturity) {
  CatalogEntry e;
  e.id = id;
  e.table = table;
  e.maturity = maturity;
  e.estimator = Estimator::FeOls;
  e.dependent_label = s.dependent;
  e.ols.dependent = {s.dependent, 0};
  e.ols.scale = s.scale;
  e.ols.fixed_effects = {"unit", "iy"};
  e.ols.cluster = "unit";
  auto [bc, bn] = credit_columns(s, maturity);
  e.ols.regressors.push_back(term_of("nz:1"));
  e.ols.regressors.push_back(term_of("nz:1 * " + bc));
  e.ols.regressors.push_back(term_of("nz:1 * " + bn));
  for (const auto& c : s.controls) e.ols.regressors.push_back(term_of(c));
  return e;
}

// m-variant interaction blocks of the subgroup tables
CatalogEntry interacted_entry(const std::string& id, const std::string& table,
                              const PerformanceShape& s,
                              const std::string& maturity, int variant) {
  CatalogEntry e;
  e.id = id;
  e.table = table;
  e.maturity = maturity;
  e.estimator = Estimator::FeOls;
  e.dependent_label = s.dependent;
  e.ols.dependent = {s.dependent, 0};
  e.ols.scale = s.scale;
  e.ols.fixed_effects = {"unit", "iy"};
  e.ols.cluster = "unit";
  auto [bc, bn] = credit_columns(s, maturity);
  auto& reg = e.ols.regressors;
  reg.push_back(term_of("nz:1"));
  if (variant == 1) {
    reg.push_back(term_of("nz:1 * sm:1"));
    reg.push_back(term_of("nz:1 * sm:1 * " + bc));
    reg.push_back(term_of("nz:1 * sm:1 * " + bn));
  } else if (variant == 2) {
    reg.push_back(term_of("nz:1 * sm:1 * bank_dep:0"));
    reg.push_back(term_of("nz:1 * sm:1 * capm_dep:0"));
    reg.push_back(term_of("nz:1 * sm:1 * bank_dep:0 * " + bc));
    reg.push_back(term_of("nz:1 * sm:1 * capm_dep:0 * " + bn));
    e.ols.filter_flags = {"has_instr"};
  } else {
    const std::string nobond = "no_bond_" + maturity + ":0";
    reg.push_back(term_of("nz:1 * sm:1 * bank_dep:0 * " + nobond));
    reg.push_back(term_of("nz:1 * sm:1 * capm_dep:0"));
    reg.push_back(term_of("nz:1 * sm:1 * bank_dep:0 * " + nobond + " * " + bc));
    reg.push_back(term_of("nz:1 * sm:1 * capm_dep:0 * " + bn));
    e.ols.filter_flags = {"has_instr"};
  }
  for (const auto& c : s.controls) reg.push_back(term_of(c));
  return e;
}

CatalogEntry newbie_ab_entry(const std::string& id, const std::string& maturity) {
  CatalogEntry e;
  e.id = id;
  e.table = "dynamism";
  e.maturity = maturity;
  e.estimator = Estimator::ArellanoBond;
  e.dependent_label = "nb_share";
  e.ab.dependent = {"nb_share", 0};
  e.ab.group = "unit";
  e.ab.year_dummies = true;
  e.ab.instrument_depth = 99;
  e.ab.exogenous.push_back(term_of("bc_z_" + maturity + ":1"));
  e.ab.exogenous.push_back(term_of("bn_z_" + maturity + ":1"));
  e.ab.exogenous.push_back(
      term_of("bank_dep_sy_" + maturity + ":1 * bc_z_" + maturity + ":1"));
  e.ab.exogenous.push_back(
      term_of("capm_dep_sy_" + maturity + ":1 * bn_z_" + maturity + ":1"));
  return e;
}

CatalogEntry newbie_growth_entry(const std::string& id,
                                 const std::string& maturity,
                                 const std::string& dependent) {
  CatalogEntry e;
  e.id = id;
  e.table = "newbie_growth";
  e.maturity = maturity;
  e.estimator = Estimator::FeOls;
  e.dependent_label = dependent;
  e.ols.dependent = {dependent, 0};
  e.ols.scale = 1.0;
  e.ols.fixed_effects = {"unit", "iy"};
  e.ols.cluster = "unit";
  auto& reg = e.ols.regressors;
  reg.push_back(term_of("nb:1"));
  reg.push_back(term_of("nb:1 * dlog_bc_z_" + maturity + ":0"));
  reg.push_back(term_of("nb:1 * dlog_bn_z_" + maturity + ":0"));
  reg.push_back(term_of("log_at:1"));
  reg.push_back(term_of("tangibility:1"));
  // sales growth enters contemporaneously: its lagged variant is undefined
  // in a firm's second panel year, which would empty the newbie stratum
  reg.push_back(term_of("dlog_sale:0"));
  return e;
}

}  // namespace

std::vector<CatalogEntry> builtin_catalog() {
  std::vector<CatalogEntry> out;
  const auto tfp = shape_tfp();
  const auto cap = shape_capital();
  const auto emp = shape_employment();

  for (const std::string m : {"short", "long"}) {
    out.push_back(baseline_entry("EQ1." + m, "performance", tfp, m));
    out.push_back(baseline_entry("EQ2." + m, "performance", cap, m));
    out.push_back(baseline_entry("EQ3." + m, "performance", emp, m));
  }
  // m1-m3 short, m4-m6 long, as the table columns run
  int v = 1;
  for (const std::string m : {"short", "long"})
    for (int variant = 1; variant <= 3; ++variant, ++v) {
      out.push_back(interacted_entry("EQ4.m" + std::to_string(v), "tfp", tfp, m,
                                     variant));
    }
  v = 1;
  for (const std::string m : {"short", "long"})
    for (int variant = 1; variant <= 3; ++variant, ++v)
      out.push_back(interacted_entry("EQ5.m" + std::to_string(v), "capital",
                                     cap, m, variant));
  v = 1;
  for (const std::string m : {"short", "long"})
    for (int variant = 1; variant <= 3; ++variant, ++v)
      out.push_back(interacted_entry("EQ6.m" + std::to_string(v), "employment",
                                     emp, m, variant));

  out.push_back(newbie_ab_entry("EQ8.short", "short"));
  out.push_back(newbie_ab_entry("EQ8.long", "long"));

  out.push_back(newbie_growth_entry("EQ9.m1", "short", "demp_sym"));
  out.push_back(newbie_growth_entry("EQ9.m2", "long", "demp_sym"));
  out.push_back(newbie_growth_entry("EQ9.m3", "short", "dlog_emp"));
  out.push_back(newbie_growth_entry("EQ9.m4", "long", "dlog_emp"));
  return out;
}

CatalogEntry materialize(const std::string& id) {
  for (auto& e : builtin_catalog())
    if (e.id == id) return e;
  throw std::runtime_error("unknown catalog id '" + id + "'");
}

CatalogEntry materialize_collapsed(const std::string& id) {
  CatalogEntry e = materialize(id);
  if (e.estimator != Estimator::FeOls) return e;
  // strip the dummy factors so the interacted model collapses to its baseline
  auto is_dummy = [](const std::string& col) {
    return col == "sm" || col == "bank_dep" || col == "capm_dep" ||
           col.rfind("no_bond", 0) == 0;
  };
  std::vector<Term> collapsed;
  for (const auto& t : e.ols.regressors) {
    Term nt;
    for (const auto& f : t.factors)
      if (!is_dummy(f.column)) nt.factors.push_back(f);
    if (nt.factors.empty()) continue;
    // drop duplicates produced by the collapse
    bool dup = false;
    for (const auto& prev : collapsed)
      if (prev.label() == nt.label()) dup = true;
    if (!dup) collapsed.push_back(std::move(nt));
  }
  e.ols.regressors = std::move(collapsed);
  e.ols.filter_flags.clear();
  return e;
}

std::string serialize_catalog(const std::vector<CatalogEntry>& entries) {
  std::ostringstream out;
  out << "# zpanel regression catalog\n";
  out << "# term/control factors are written column:lag; '*' forms products\n";
  for (const auto& e : entries) {
    out << "\n[" << e.id << "]\n";
    out << "table = " << e.table << "\n";
    out << "maturity = " << e.maturity << "\n";
    if (e.estimator == Estimator::FeOls) {
      out << "estimator = fe_ols\n";
      out << "dependent = " << factor_str(e.ols.dependent) << "\n";
      out << "scale = " << e.ols.scale << "\n";
      out << "fe =";
      for (size_t i = 0; i < e.ols.fixed_effects.size(); ++i)
        out << (i ? ", " : " ") << e.ols.fixed_effects[i];
      out << "\n";
      out << "cluster = " << e.ols.cluster << "\n";
      for (const auto& f : e.ols.filter_flags) out << "filter = " << f << "\n";
      for (const auto& t : e.ols.regressors)
        out << "term = " << term_str(t) << "\n";
    } else {
      out << "estimator = arellano_bond\n";
      out << "dependent = " << factor_str(e.ab.dependent) << "\n";
      out << "scale = " << e.ab.scale << "\n";
      out << "group = " << e.ab.group << "\n";
      out << "year_dummies = " << (e.ab.year_dummies ? 1 : 0) << "\n";
      out << "instrument_depth = " << e.ab.instrument_depth << "\n";
      for (const auto& f : e.ab.filter_flags) out << "filter = " << f << "\n";
      for (const auto& t : e.ab.exogenous) out << "term = " << term_str(t) << "\n";
    }
  }
  return out.str();
}

std::vector<CatalogEntry> parse_catalog(const std::string& text) {
  std::vector<CatalogEntry> out;
  CatalogEntry cur;
  bool open = false;
  auto flush = [&]() {
    if (open) out.push_back(cur);
    cur = CatalogEntry{};
  };
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      flush();
      cur.id = line.substr(1, line.size() - 2);
      open = true;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos || !open)
      throw std::runtime_error("catalog line " + std::to_string(lineno) +
                               ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto b2 = s.find_first_not_of(" \t");
      if (b2 == std::string::npos) return std::string();
      const auto e2 = s.find_last_not_of(" \t");
      return s.substr(b2, e2 - b2 + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "table") cur.table = value;
    else if (key == "maturity") cur.maturity = value;
    else if (key == "estimator") {
      if (value == "fe_ols") cur.estimator = Estimator::FeOls;
      else if (value == "arellano_bond") cur.estimator = Estimator::ArellanoBond;
      else throw std::runtime_error("unknown estimator '" + value + "'");
    } else if (key == "dependent") {
      auto t = term_of(value);
      cur.ols.dependent = t.factors[0];
      cur.ab.dependent = t.factors[0];
      cur.dependent_label = t.factors[0].column;
    } else if (key == "scale") {
      cur.ols.scale = std::stod(value);
      cur.ab.scale = cur.ols.scale;
    } else if (key == "fe") {
      cur.ols.fixed_effects.clear();
      std::istringstream fs(value);
      std::string f;
      while (std::getline(fs, f, ',')) cur.ols.fixed_effects.push_back(trim(f));
    } else if (key == "cluster") {
      cur.ols.cluster = value;
    } else if (key == "group") {
      cur.ab.group = value;
    } else if (key == "year_dummies") {
      cur.ab.year_dummies = value == "1" || value == "true";
    } else if (key == "instrument_depth") {
      cur.ab.instrument_depth = std::stoi(value);
    } else if (key == "filter") {
      if (!value.empty()) {
        cur.ols.filter_flags.push_back(value);
        cur.ab.filter_flags.push_back(value);
      }
    } else if (key == "term") {
      cur.ols.regressors.push_back(term_of(value));
      cur.ab.exogenous.push_back(term_of(value));
    } else {
      throw std::runtime_error("unknown catalog key '" + key + "'");
    }
  }
  flush();
  return out;
}

namespace {

std::vector<EntryResult> run_catalog_impl(const AnalysisBundle& bundle,
                                          const std::vector<CatalogEntry>& entries,
                                          int threads, bool tolerant,
                                          std::vector<std::string>* failures) {
  std::vector<EntryResult> out(entries.size());
  std::vector<std::string> notes(entries.size());
  auto run_one = [&](size_t i) {
    const auto& e = entries[i];
    out[i].entry = e;
    try {
      if (e.estimator == Estimator::FeOls)
        out[i].result = econ::fit_fe_ols(bundle.firm, e.ols);
      else
        out[i].result = econ::fit_arellano_bond(bundle.industry, e.ab);
    } catch (const std::exception& ex) {
      if (!tolerant) throw;
      notes[i] = e.id + ": " + ex.what();
    }
  };
  if (threads > 1 && entries.size() > 1) {
    std::atomic<size_t> next{0};
    std::vector<std::future<void>> futs;
    const int nt = std::min<size_t>(threads, entries.size());
    for (int t = 0; t < nt; ++t)
      futs.push_back(std::async(std::launch::async, [&]() {
        for (size_t i = next.fetch_add(1); i < entries.size();
             i = next.fetch_add(1))
          run_one(i);
      }));
    for (auto& f : futs) f.get();
  } else {
    for (size_t i = 0; i < entries.size(); ++i) run_one(i);
  }
  if (failures)
    for (auto& n : notes)
      if (!n.empty()) failures->push_back(std::move(n));
  return out;
}

}  // namespace

std::vector<EntryResult> run_catalog(const AnalysisBundle& bundle,
                                     const std::vector<CatalogEntry>& entries,
                                     int threads) {
  return run_catalog_impl(bundle, entries, threads, false, nullptr);
}

std::vector<EntryResult> run_catalog_tolerant(
    const AnalysisBundle& bundle, const std::vector<CatalogEntry>& entries,
    int threads, std::vector<std::string>& failures) {
  return run_catalog_impl(bundle, entries, threads, true, &failures);
}

}  // namespace zpanel::specs
