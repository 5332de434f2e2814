#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "zpanel/econometrics.hpp"

namespace zpanel::specs {

enum class Estimator { FeOls, ArellanoBond };

/// One model column of the published tables, fully bound.
struct CatalogEntry {
  std::string id;          // e.g. "EQ4.m1"
  std::string table;       // output table group, e.g. "tfp"
  std::string maturity;    // "short" | "long"
  Estimator estimator = Estimator::FeOls;
  econ::FeOlsSpec ols;
  econ::AbSpec ab;
  std::string dependent_label;
};

/// The built-in catalog: every model column of the paper's regression tables.
std::vector<CatalogEntry> builtin_catalog();

/// Look up one entry by id.
CatalogEntry materialize(const std::string& id);

/// As materialize, but with every dummy set replaced by the identity, so the
/// interacted models collapse to their baseline counterparts.
CatalogEntry materialize_collapsed(const std::string& id);

/// Human-readable serialization: a line-oriented spec file that can be edited
/// and reloaded without code changes.
std::string serialize_catalog(const std::vector<CatalogEntry>& entries);
std::vector<CatalogEntry> parse_catalog(const std::string& text);

struct EntryResult {
  CatalogEntry entry;
  econ::RegressionResult result;
};

/// Everything the estimation stage needs, already merged into flat datasets.
struct AnalysisBundle {
  econ::Dataset firm;      // firm-year level
  econ::Dataset industry;  // industry-year level (EQ8)
};

/// Execute every catalog entry against the bundle. Entries are independent;
/// with threads > 1 they run concurrently and results keep catalog order.
std::vector<EntryResult> run_catalog(const AnalysisBundle& bundle,
                                     const std::vector<CatalogEntry>& entries,
                                     int threads = 1);

/// As run_catalog, but an entry that cannot be estimated (empty sample,
/// degenerate design) yields an empty result and a note in `failures`
/// instead of aborting the batch.
std::vector<EntryResult> run_catalog_tolerant(
    const AnalysisBundle& bundle, const std::vector<CatalogEntry>& entries,
    int threads, std::vector<std::string>& failures);

}  // namespace zpanel::specs
