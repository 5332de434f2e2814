#pragma once

#include <optional>
#include <string>
#include <vector>

namespace zpanel::tfp {

struct TfpConfig {
  int poly_degree = 3;            // series order of the stage-1 control
  int max_iter = 200;             // cap on stage-2 search iterations
  double tol = 1e-6;              // convergence tolerance on beta_k
  int min_obs_per_industry = 200; // below this, pooled fallback
  double beta_k_lo = 0.0;
  double beta_k_hi = 1.5;
  int threads = 1;
};

/// One usable production observation (all logs present).
struct TfpInput {
  std::string firm_id;
  int year = 0;
  int naics2 = 0;
  double log_sale = 0;
  double log_cogs = 0;   // free variable
  double log_ppent = 0;  // state variable
  double log_capx = 0;   // productivity instrument
};

struct IndustryFit {
  int naics2 = -1;  // -1 marks the pooled fallback estimate
  double beta_free = 0;
  double beta_k = 0;
  bool converged = false;
  int iterations = 0;
  long n_stage1 = 0;
  long n_stage2 = 0;
  // max normalized violation of the stage-1 normal equations
  double stage1_orthogonality = 0;
  std::string warning;
};

struct TfpRow {
  std::string firm_id;
  int year = 0;
  int naics2 = 0;
  int fit_industry = -1;  // industry whose elasticities were applied
  double tfp = 0;
};

struct TfpResult {
  std::vector<TfpRow> rows;
  std::vector<IndustryFit> fits;
};

/// Two-stage proxy estimation of the production function, per two-digit
/// industry with a pooled fallback for thin industries.
/// Stage 1 regresses log sales on the free input plus a full polynomial in
/// (state, instrument) and recovers the free elasticity and the composite
/// term. Stage 2 concentrates the capital elasticity out of the Markov
/// equation for productivity and minimizes the residual sum of squares over
/// a bounded interval.
TfpResult estimate_tfp(const std::vector<TfpInput>& rows, const TfpConfig& cfg);

}  // namespace zpanel::tfp
