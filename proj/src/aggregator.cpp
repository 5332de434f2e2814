#include "zpanel/aggregator.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace zpanel::agg {

const char* to_string(ShareWeight w) {
  return w == ShareWeight::FaceValue ? "face" : "count";
}

std::optional<ShareWeight> parse_weight(const std::string& s) {
  if (s == "face" || s == "face_value") return ShareWeight::FaceValue;
  if (s == "count") return ShareWeight::Count;
  return std::nullopt;
}

std::vector<EnrichedInstrument> enrich_instruments(
    const std::vector<DebtInstrument>& accepted, const Panel& panel,
    const std::vector<ClassifiedFirmYear>& classified, ZombieDefinition def,
    int status_lag) {
  std::unordered_map<std::string, std::map<int, const ClassifiedFirmYear*>> by_firm;
  for (const auto& c : classified) by_firm[c.firm_id][c.year] = &c;

  std::vector<EnrichedInstrument> out;
  out.reserve(accepted.size());
  for (const auto& d : accepted) {
    const FirmYear* fy = panel.find(d.firm_id, d.report_year);
    if (!fy) continue;  // acceptance already requires financials
    EnrichedInstrument e;
    e.type = d.debt_type;
    e.bucket = maturity_bucket(d.maturity_quarters);
    e.naics2 = fy->naics2;
    e.year = d.report_year;
    e.face = d.face_value;
    auto fit = by_firm.find(d.firm_id);
    if (fit != by_firm.end()) {
      auto sit = fit->second.find(d.report_year - status_lag);
      if (sit != fit->second.end()) e.zombie = sit->second->status(def);
      auto cur = fit->second.find(d.report_year);
      if (cur != fit->second.end()) e.sme_borrower = cur->second->sm;
    }
    out.push_back(e);
  }
  return out;
}

std::map<IndustryYearKey, CellShares> zombie_credit_share(
    const std::vector<EnrichedInstrument>& instruments, ShareWeight weight,
    CoarseMaturity maturity) {
  struct Acc {
    double bc_num = 0, bc_den = 0, bn_num = 0, bn_den = 0;
    double bc_zv = 0, bn_zv = 0, bc_v = 0, bn_v = 0;
  };
  std::map<IndustryYearKey, Acc> acc;
  for (const auto& e : instruments) {
    if (coarse_maturity(e.bucket) != maturity) continue;
    auto& a = acc[{e.naics2, e.year}];
    const bool bank = e.type != DebtType::BN;
    if (bank)
      a.bc_v += e.face;
    else
      a.bn_v += e.face;
    if (!e.zombie) continue;  // undetermined borrowers carry no weight
    const double w = weight == ShareWeight::FaceValue ? e.face : 1.0;
    if (bank) {
      a.bc_den += w;
      if (*e.zombie) {
        a.bc_num += w;
        a.bc_zv += e.face;
      }
    } else {
      a.bn_den += w;
      if (*e.zombie) {
        a.bn_num += w;
        a.bn_zv += e.face;
      }
    }
  }
  std::map<IndustryYearKey, CellShares> out;
  for (const auto& [key, a] : acc) {
    CellShares s;
    if (a.bc_den > 0) s.bc_share = a.bc_num / a.bc_den;
    if (a.bn_den > 0) s.bn_share = a.bn_num / a.bn_den;
    s.bc_z_volume = a.bc_zv;
    s.bn_z_volume = a.bn_zv;
    s.bc_volume = a.bc_v;
    s.bn_volume = a.bn_v;
    out[key] = s;
  }
  return out;
}

std::map<IndustryYearKey, double> zombie_credit_growth(
    const std::map<IndustryYearKey, double>& volumes) {
  std::map<IndustryYearKey, double> out;
  for (const auto& [key, v] : volumes) {
    auto prev = volumes.find({key.first, key.second - 1});
    if (prev == volumes.end()) continue;
    if (v <= 0 || prev->second <= 0) continue;
    out[key] = std::log(v) - std::log(prev->second);
  }
  return out;
}

std::map<IndustryYearKey, bool> industry_dependence(
    const std::vector<EnrichedInstrument>& instruments,
    CoarseMaturity maturity) {
  struct Acc {
    double bc = 0, bn = 0;
  };
  std::map<IndustryYearKey, Acc> acc;
  for (const auto& e : instruments) {
    if (coarse_maturity(e.bucket) != maturity) continue;
    auto& a = acc[{e.naics2, e.year}];
    if (e.type == DebtType::BN)
      a.bn += e.face;
    else
      a.bc += e.face;
  }
  std::map<IndustryYearKey, bool> out;
  for (const auto& [key, a] : acc) out[key] = a.bc > a.bn;
  return out;
}

std::map<IndustryYearKey, NewbieCell> newbie_share(
    const std::vector<ClassifiedFirmYear>& classified) {
  std::map<IndustryYearKey, NewbieCell> out;
  for (const auto& c : classified) {
    auto& cell = out[{c.naics2, c.year}];
    ++cell.n_firms;
    if (c.nb) ++cell.nb_count;
  }
  return out;
}

bool LendingTableKey::operator<(const LendingTableKey& o) const {
  return std::tie(year, type, bucket) < std::tie(o.year, o.type, o.bucket);
}

std::map<LendingTableKey, LendingCell> lending_table(
    const std::vector<EnrichedInstrument>& instruments, ShareWeight weight,
    bool per_year, bool sme_only) {
  std::map<LendingTableKey, LendingCell> out;
  for (const auto& e : instruments) {
    if (e.bucket == MaturityBucket::OutOfRange) continue;
    if (sme_only && !(e.sme_borrower && *e.sme_borrower)) continue;
    LendingTableKey key{per_year ? e.year : 0, e.type, e.bucket};
    auto& cell = out[key];
    const double w = weight == ShareWeight::FaceValue ? e.face : 1.0;
    cell.all_incl_undetermined += w;
    if (!e.zombie) continue;
    cell.total += w;
    if (*e.zombie) cell.zombie += w;
  }
  return out;
}

std::vector<IndustryYearAggregate> build_industry_year(
    const std::vector<EnrichedInstrument>& instruments,
    const std::vector<ClassifiedFirmYear>& classified, ShareWeight weight) {
  const auto newbies = newbie_share(classified);
  std::vector<IndustryYearAggregate> out;
  for (CoarseMaturity m : {CoarseMaturity::Short, CoarseMaturity::Long}) {
    const auto shares = zombie_credit_share(instruments, weight, m);
    const auto deps = industry_dependence(instruments, m);
    std::map<IndustryYearKey, double> bc_vol, bn_vol;
    for (const auto& [key, s] : shares) {
      bc_vol[key] = s.bc_z_volume;
      bn_vol[key] = s.bn_z_volume;
    }
    const auto bc_growth = zombie_credit_growth(bc_vol);
    const auto bn_growth = zombie_credit_growth(bn_vol);

    // one row per (naics2, year) seen in either firm counts or instruments
    std::map<IndustryYearKey, char> keys;
    for (const auto& [k, v] : newbies) keys[k] = 1;
    for (const auto& [k, v] : shares) keys[k] = 1;
    for (const auto& [key, one] : keys) {
      IndustryYearAggregate row;
      row.naics2 = key.first;
      row.year = key.second;
      row.bucket = m;
      auto sit = shares.find(key);
      if (sit != shares.end()) {
        row.bc_z_share = sit->second.bc_share;
        row.bn_z_share = sit->second.bn_share;
      }
      auto git = bc_growth.find(key);
      if (git != bc_growth.end()) row.dlog_bc_z = git->second;
      git = bn_growth.find(key);
      if (git != bn_growth.end()) row.dlog_bn_z = git->second;
      auto dit = deps.find(key);
      row.bank_dep_sy = dit != deps.end() && dit->second;
      row.capm_dep_sy = !row.bank_dep_sy;
      auto nit = newbies.find(key);
      if (nit != newbies.end()) {
        row.nb_count = nit->second.nb_count;
        row.n_firms = nit->second.n_firms;
        row.nb_share = nit->second.nb_share();
      }
      out.push_back(row);
    }
  }
  return out;
}

}  // namespace zpanel::agg
