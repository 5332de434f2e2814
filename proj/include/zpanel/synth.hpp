#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zpanel/aggregator.hpp"
#include "zpanel/classifier.hpp"
#include "zpanel/metrics.hpp"
#include "zpanel/panel.hpp"

namespace zpanel::synth {

/// Which model columns carry planted effects. Mutually exclusive pairs:
/// tfp vs capital (an exact productivity chain pins the capital stock per
/// firm), and employment vs newbie_growth (both drive the employment path).
struct PlantedSet {
  bool tfp = true;            // EQ4.m1 shape on TFP
  bool capital = false;       // EQ5.m1 shape on capital growth
  bool employment = false;    // EQ6.m1 shape on symmetric employment growth
  bool newbie_growth = false; // EQ9.m3 shape on log employment growth
  bool dynamism = false;      // EQ8 shape on the industry newbie share
};

struct DgpConfig {
  int n_firms = 1000;
  int n_years = 18;
  int n_industries = 18;
  int start_year = 2002;
  double zombie_rate = 0.08;   // target prevalence under the nar definition
  double sme_rate = 0.5;
  double exit_rate = 0.10;     // firms leaving before the window ends
  double liquidation_rate = 0.7;  // exits flagged as liquidations
  double phi_target = 0.5;     // exit/missing-Q phi correlation target
  double instruments_per_firm_year = 0.8;
  double duplicate_component_rate = 0.02;
  double noise = 1.0;          // master equation-noise scale; 0 = exact
  unsigned long long seed = 1;

  PlantedSet planted;
  // shared slope coefficients of the planted firm-level equations
  double beta_bc = -0.3;
  double beta_bn = -0.5;
  // planted dynamic industry equation (EQ8)
  double ab_rho = 0.3;
  double ab_beta_bc = -0.02;
  double ab_beta_bn = 0.01;
  double ab_beta_bc_dep = -0.02;
  double ab_beta_bn_dep = 0.015;
};

/// Planted coefficients and realized sample facts, written alongside the data.
struct TruthManifest {
  std::vector<std::pair<std::string, double>> values;

  void set(const std::string& key, double v) { values.emplace_back(key, v); }
  std::optional<double> get(const std::string& key) const {
    for (const auto& [k, v] : values)
      if (k == key) return v;
    return std::nullopt;
  }
};

/// Everything a generation produces, in memory.
struct SynthData {
  Panel panel;                 // real (deflated) values
  std::vector<DebtInstrument> instruments;  // as reported, duplicates included
  DeflatorTable deflators;
  LaborCostTable labor;
  TruthManifest truth;
  // generator-side intent, the planted-truth oracle for tests
  std::vector<ClassifiedFirmYear> intended;
};

SynthData generate(const DgpConfig& cfg);

/// Generate and write firm_years.csv, instruments.csv, deflators.csv,
/// labor_costs.csv and truth_manifest.csv into `dir` (nominal values,
/// i.e. real times the industry-year index).
void generate_files(const DgpConfig& cfg, const std::string& dir);

TruthManifest read_manifest(const std::string& path);

}  // namespace zpanel::synth
