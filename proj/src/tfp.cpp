#include "zpanel/tfp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <map>
#include <optional>
#include <stdexcept>
#include <tuple>

namespace zpanel::tfp {

namespace {

// monomial exponents (a, b) with 1 <= a + b <= degree
std::vector<std::pair<int, int>> poly_terms(int degree) {
  std::vector<std::pair<int, int>> out;
  for (int total = 1; total <= degree; ++total)
    for (int a = total; a >= 0; --a) out.emplace_back(a, total - a);
  return out;
}

Eigen::MatrixXd control_design(const Eigen::VectorXd& k,
                               const Eigen::VectorXd& inv, int degree) {
  const auto terms = poly_terms(degree);
  Eigen::MatrixXd P(k.size(), terms.size() + 1);
  P.col(0).setOnes();
  for (size_t j = 0; j < terms.size(); ++j) {
    auto [a, b] = terms[j];
    P.col(j + 1) = k.array().pow(a) * inv.array().pow(b);
  }
  return P;
}

// least-squares fit tolerant of collinear columns
Eigen::VectorXd ls_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.colPivHouseholderQr().solve(y);
}

struct Stage1 {
  double beta_free = 0;
  Eigen::VectorXd phi;  // composite term, one per observation
  double orthogonality = 0;
};

Stage1 stage1_fit(const Eigen::VectorXd& ls, const Eigen::VectorXd& lc,
                  const Eigen::VectorXd& lk, const Eigen::VectorXd& li,
                  int degree, int naics2) {
  Eigen::MatrixXd P = control_design(lk, li, degree);
  Eigen::VectorXd gamma_c = ls_fit(P, lc);
  Eigen::VectorXd resid_c = lc - P * gamma_c;
  const double var_c = (lc.array() - lc.mean()).square().sum();
  if (resid_c.squaredNorm() <= 1e-10 * std::max(1.0, var_c))
    throw std::runtime_error(
        "stage-1 design rank-deficient (free variable collinear with "
        "controls) in industry " +
        std::to_string(naics2));
  Eigen::VectorXd gamma_y = ls_fit(P, ls);
  Eigen::VectorXd resid_y = ls - P * gamma_y;

  Stage1 out;
  out.beta_free = resid_c.dot(resid_y) / resid_c.squaredNorm();
  Eigen::VectorXd net = ls - out.beta_free * lc;
  out.phi = P * ls_fit(P, net);

  // normal-equation check of the full stage-1 fit [lc | P]
  Eigen::VectorXd resid = net - out.phi;
  const double scale = std::max(1.0, resid.norm());
  double worst = std::abs(lc.dot(resid)) / (lc.norm() * scale);
  for (long j = 0; j < P.cols(); ++j) {
    const double cn = P.col(j).norm();
    if (cn > 0) worst = std::max(worst, std::abs(P.col(j).dot(resid)) / (cn * scale));
  }
  out.orthogonality = worst;
  return out;
}

// SSR of the productivity Markov regression at a candidate capital elasticity
double stage2_ssr(double b, const Eigen::VectorXd& phi_t,
                  const Eigen::VectorXd& k_t, const Eigen::VectorXd& phi_l,
                  const Eigen::VectorXd& k_l, int degree) {
  Eigen::VectorXd u = phi_t - b * k_t;
  Eigen::VectorXd ul = phi_l - b * k_l;
  Eigen::MatrixXd G(u.size(), degree + 1);
  G.col(0).setOnes();
  for (int d = 1; d <= degree; ++d) G.col(d) = ul.array().pow(d);
  Eigen::VectorXd g = ls_fit(G, u);
  return (u - G * g).squaredNorm();
}

struct Stage2 {
  double beta_k = 0;
  bool converged = false;
  int iterations = 0;
};

Stage2 stage2_fit(const Eigen::VectorXd& phi_t, const Eigen::VectorXd& k_t,
                  const Eigen::VectorXd& phi_l, const Eigen::VectorXd& k_l,
                  const TfpConfig& cfg) {
  auto f = [&](double b) {
    return stage2_ssr(b, phi_t, k_t, phi_l, k_l, cfg.poly_degree);
  };
  // coarse bracket, then golden-section refinement
  const int grid = 31;
  double best_b = cfg.beta_k_lo;
  double best_v = std::numeric_limits<double>::infinity();
  const double step = (cfg.beta_k_hi - cfg.beta_k_lo) / (grid - 1);
  for (int i = 0; i < grid; ++i) {
    const double b = cfg.beta_k_lo + i * step;
    const double v = f(b);
    if (v < best_v) {
      best_v = v;
      best_b = b;
    }
  }
  double lo = std::max(cfg.beta_k_lo, best_b - step);
  double hi = std::min(cfg.beta_k_hi, best_b + step);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  Stage2 out;
  for (out.iterations = 0; out.iterations < cfg.max_iter; ++out.iterations) {
    if (hi - lo < cfg.tol) {
      out.converged = true;
      break;
    }
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  out.beta_k = 0.5 * (lo + hi);
  return out;
}

struct IndustryBlock {
  std::vector<size_t> rows;  // indices into the input vector
};

IndustryFit fit_block(const std::vector<TfpInput>& all,
                      const std::vector<size_t>& rows, int naics2,
                      const TfpConfig& cfg) {
  const long n = static_cast<long>(rows.size());
  Eigen::VectorXd ls(n), lc(n), lk(n), li(n);
  for (long i = 0; i < n; ++i) {
    const auto& r = all[rows[i]];
    ls[i] = r.log_sale;
    lc[i] = r.log_cogs;
    lk[i] = r.log_ppent;
    li[i] = r.log_capx;
  }
  Stage1 s1 = stage1_fit(ls, lc, lk, li, cfg.poly_degree, naics2);

  // consecutive within-firm pairs for the Markov equation
  std::vector<std::pair<long, long>> pairs;
  for (long i = 1; i < n; ++i) {
    const auto& cur = all[rows[i]];
    const auto& prev = all[rows[i - 1]];
    if (cur.firm_id == prev.firm_id && cur.year == prev.year + 1)
      pairs.emplace_back(i, i - 1);
  }
  IndustryFit fit;
  fit.naics2 = naics2;
  fit.beta_free = s1.beta_free;
  fit.stage1_orthogonality = s1.orthogonality;
  fit.n_stage1 = n;
  fit.n_stage2 = static_cast<long>(pairs.size());
  if (fit.n_stage2 < cfg.poly_degree + 2) {
    fit.warning = "too few lag pairs for stage 2";
    fit.beta_k = 0.5 * (cfg.beta_k_lo + cfg.beta_k_hi);
    return fit;
  }
  Eigen::VectorXd phi_t(fit.n_stage2), k_t(fit.n_stage2), phi_l(fit.n_stage2),
      k_l(fit.n_stage2);
  for (long p = 0; p < fit.n_stage2; ++p) {
    auto [i, j] = pairs[p];
    phi_t[p] = s1.phi[i];
    k_t[p] = lk[i];
    phi_l[p] = s1.phi[j];
    k_l[p] = lk[j];
  }
  Stage2 s2 = stage2_fit(phi_t, k_t, phi_l, k_l, cfg);
  fit.beta_k = s2.beta_k;
  fit.converged = s2.converged;
  fit.iterations = s2.iterations;
  if (!s2.converged) fit.warning = "stage 2 did not converge within max_iter";
  return fit;
}

}  // namespace

TfpResult estimate_tfp(const std::vector<TfpInput>& rows, const TfpConfig& cfg) {
  if (cfg.poly_degree < 2 || cfg.poly_degree > 4)
    throw std::invalid_argument("poly_degree must be in [2, 4]");
  if (cfg.tol <= 0 || cfg.max_iter < 1)
    throw std::invalid_argument("bad tfp config");
  if (rows.empty()) throw std::runtime_error("no usable observations for TFP");

  // sort indices by (industry, firm, year): block structure plus lag locality
  std::vector<size_t> idx(rows.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&rows](size_t a, size_t b) {
    return std::tie(rows[a].naics2, rows[a].firm_id, rows[a].year) <
           std::tie(rows[b].naics2, rows[b].firm_id, rows[b].year);
  });

  std::map<int, IndustryBlock> blocks;
  for (size_t i : idx) blocks[rows[i].naics2].rows.push_back(i);

  std::vector<int> thin, thick;
  for (const auto& [naics2, b] : blocks) {
    if (static_cast<long>(b.rows.size()) >= cfg.min_obs_per_industry)
      thick.push_back(naics2);
    else
      thin.push_back(naics2);
  }

  TfpResult result;
  std::optional<IndustryFit> pooled;
  if (!thin.empty() || thick.empty()) {
    std::vector<size_t> all_rows(idx.begin(), idx.end());
    pooled = fit_block(rows, all_rows, -1, cfg);
  }

  std::vector<IndustryFit> industry_fits(thick.size());
  auto run = [&](size_t j) {
    industry_fits[j] = fit_block(rows, blocks[thick[j]].rows, thick[j], cfg);
  };
  if (cfg.threads > 1 && thick.size() > 1) {
    std::vector<std::future<void>> futs;
    std::atomic<size_t> next{0};
    const int nt = std::min<int>(cfg.threads, static_cast<int>(thick.size()));
    for (int t = 0; t < nt; ++t)
      futs.push_back(std::async(std::launch::async, [&]() {
        for (size_t j = next.fetch_add(1); j < thick.size();
             j = next.fetch_add(1))
          run(j);
      }));
    for (auto& f : futs) f.get();
  } else {
    for (size_t j = 0; j < thick.size(); ++j) run(j);
  }

  std::map<int, const IndustryFit*> fit_of;
  for (const auto& f : industry_fits) fit_of[f.naics2] = &f;
  if (pooled) result.fits.push_back(*pooled);
  for (const auto& f : industry_fits) result.fits.push_back(f);

  result.rows.reserve(rows.size());
  for (size_t i : idx) {
    const auto& r = rows[i];
    const IndustryFit* fit = nullptr;
    auto it = fit_of.find(r.naics2);
    if (it != fit_of.end())
      fit = it->second;
    else if (pooled)
      fit = &*pooled;
    else
      throw std::runtime_error("no TFP fit available for industry " +
                               std::to_string(r.naics2));
    TfpRow out;
    out.firm_id = r.firm_id;
    out.year = r.year;
    out.naics2 = r.naics2;
    out.fit_industry = fit->naics2;
    out.tfp = r.log_sale - fit->beta_free * r.log_cogs - fit->beta_k * r.log_ppent;
    result.rows.push_back(std::move(out));
  }
  return result;
}

}  // namespace zpanel::tfp
