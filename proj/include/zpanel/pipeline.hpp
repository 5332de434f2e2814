#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zpanel/aggregator.hpp"
#include "zpanel/classifier.hpp"
#include "zpanel/metrics.hpp"
#include "zpanel/panel.hpp"
#include "zpanel/specs.hpp"
#include "zpanel/synth.hpp"
#include "zpanel/tfp.hpp"

namespace zpanel::pipeline {

struct RunConfig {
  std::string firm_years;
  std::string instruments;
  std::string deflators;
  std::string labor_costs;
  std::string output_dir = "out";
  YearWindow window;
  ZombieDefinition definition = ZombieDefinition::Nar;
  agg::ShareWeight weight = agg::ShareWeight::FaceValue;
  int status_lag = 1;
  int threads = 1;
  tfp::TfpConfig tfp;
  synth::DgpConfig synth;
  std::string catalog_file;  // optional override of the built-in catalog
};

/// Parse the line-oriented `key = value` config grammar with [section]
/// headers; returns flat "section.key" -> value entries.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Apply config-file entries onto a RunConfig.
void apply_config(RunConfig& cfg,
                  const std::map<std::string, std::string>& entries);

/// Inputs after ingestion: deflated panel, deduplicated accepted instruments.
struct PreparedData {
  Panel panel;
  std::vector<DebtInstrument> accepted;
  AcceptanceReport acceptance;
  LaborCostTable labor;
  IngestReport ingest;
  InstrumentLoadReport instrument_load;
  long duplicates_removed = 0;
};

/// CSV ingestion: read, validate, filter, deflate, dedup, accept.
PreparedData prepare_from_files(const RunConfig& cfg);

/// In-memory path used by tests: synthetic data is already in real terms.
PreparedData prepare_from_synth(const synth::SynthData& data);

/// Downstream artifacts shared by the estimation and reporting stages.
struct AnalysisArtifacts {
  std::vector<DerivedFirmYear> derived;
  tfp::TfpResult tfp;
  std::vector<ClassifiedFirmYear> classified;
  std::vector<agg::EnrichedInstrument> enriched;
  std::vector<agg::IndustryYearAggregate> industry;
  specs::AnalysisBundle bundle;
};

AnalysisArtifacts analyze(const PreparedData& data, const RunConfig& cfg);

/// Build the estimation datasets from already-computed artifacts.
specs::AnalysisBundle build_bundle(
    const Panel& panel, const std::vector<DerivedFirmYear>& derived,
    const tfp::TfpResult& tfp_result,
    const std::vector<ClassifiedFirmYear>& classified,
    const std::vector<agg::IndustryYearAggregate>& industry,
    ZombieDefinition definition);

// ---------------------------------------------------------------------------
// Stage runner (CSV artifacts under cfg.output_dir)
// ---------------------------------------------------------------------------

extern const std::vector<std::string> kStageOrder;  // ingest..report

/// Run the listed stages in dependency order. Later stages read persisted
/// artifacts of earlier ones. Throws MissingDependency when a required
/// artifact is absent.
struct MissingDependency : std::runtime_error {
  std::string producer;
  explicit MissingDependency(const std::string& stage, const std::string& what)
      : std::runtime_error("missing artifact for stage: " + what +
                           " (produce it with the '" + stage + "' stage)"),
        producer(stage) {}
};

void run_stages(const RunConfig& cfg, const std::vector<std::string>& stages);

/// Individual stages; exposed for the CLI subcommands.
void stage_synth(const RunConfig& cfg);
void stage_ingest(const RunConfig& cfg);
void stage_derive(const RunConfig& cfg);
void stage_tfp(const RunConfig& cfg);
void stage_classify(const RunConfig& cfg);
void stage_aggregate(const RunConfig& cfg);
void stage_estimate(const RunConfig& cfg);
void stage_report(const RunConfig& cfg);
void emit_figures(const RunConfig& cfg);  // the figure CSVs only

}  // namespace zpanel::pipeline
