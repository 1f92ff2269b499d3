#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "abdris/model.hpp"
#include "abdris/qcqp.hpp"

namespace abdris {

/// Auxiliary variables and the Theta-subproblem coefficients.
struct FpWorkspace {
  Eigen::VectorXd iota;
  Eigen::VectorXcd tau;
  Eigen::MatrixXcd e_r, e_t;  // E_w = C_w - D_w
  Eigen::MatrixXcd q_r, q_t;  // sum_k |tau_k|^2 h_RI,k^H h_RI,k over each sector
  Eigen::MatrixXcd p;         // H F F^H H^H + sigma_I^2 I

  static FpWorkspace zeros(const System& sys);
};

/// Lagrangian-dual transform (log2 form).
double f_iota(const System& sys, const ChannelSet& ch, const RisState& ris, const Precoder& prec,
              const Eigen::VectorXd& iota);
/// Quadratic transform (log2 form).
double f_tau(const System& sys, const ChannelSet& ch, const RisState& ris, const Precoder& prec,
             const Eigen::VectorXd& iota, const Eigen::VectorXcd& tau);
/// Quadratic transform with natural logs, divided by ln 2. Equals the sum rate
/// at (iota*, tau*) and is maximized exactly by every block update.
double fp_objective(const System& sys, const ChannelSet& ch, const RisState& ris,
                    const Precoder& prec, const Eigen::VectorXd& iota, const Eigen::VectorXcd& tau);

void update_iota(FpWorkspace& ws, const System& sys, const ChannelSet& ch, const RisState& ris,
                 const Precoder& prec);
void update_tau(FpWorkspace& ws, const System& sys, const ChannelSet& ch, const RisState& ris,
                const Precoder& prec);
/// Recomputes E_r, E_t, Q_r, Q_t and P from (iota, tau, F).
void refresh_theta_terms(FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                         const Precoder& prec);

struct PrecoderResult {
  Precoder prec;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double objective = 0.0;  // 2 sum sqrt(1+iota) Re{hbar f} - sum f^H S f
  int grid_evaluations = 0;
  bool kept_previous = false;
};

/// Precoder objective for fixed (iota, tau, Theta).
double precoder_objective(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                          const RisState& ris, const Precoder& prec);

/// Two-multiplier search over f_k = (S + l1 I + l2 T)^{-1} sqrt(1+iota_k) hbar_k^H.
/// Throws InfeasibleBudget when RIS static noise exceeds P_A.
PrecoderResult update_precoder(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                               const RisState& ris, const Precoder* previous = nullptr);

enum class ThetaSolveMode { factored, dense };

struct ThetaResult {
  Eigen::MatrixXcd theta_r;
  Eigen::MatrixXcd theta_t;
  QcqpSolution qcqp;
  double budget = 0.0;
};

/// Dense quadratic program over the stacked free entries.
struct DenseQcqp {
  Eigen::MatrixXcd q;
  Eigen::MatrixXcd p;
  Eigen::VectorXcd e;
  double budget = 0.0;
};

/// Remaining budget for each block given the other one.
double theta_r_budget(const System& sys, const ChannelSet& ch, const RisState& ris,
                      const Precoder& prec);
double theta_t_budget(const System& sys, const ChannelSet& ch, const RisState& ris,
                      const Precoder& prec);

DenseQcqp assemble_theta_r(const FpWorkspace& ws, const System& sys, double budget);
DenseQcqp assemble_theta_t(const FpWorkspace& ws, const System& sys, double budget);
DenseQcqp assemble_theta_joint(const FpWorkspace& ws, const System& sys, double budget);

/// Maps a stacked QCQP variable back to matrices.
Eigen::MatrixXcd unstack_theta_r(const System& sys, const Eigen::VectorXcd& x);
Eigen::MatrixXcd unstack_theta_t(const System& sys, const Eigen::VectorXcd& x);
std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> unstack_theta_joint(const System& sys,
                                                                  const Eigen::VectorXcd& x);

/// Symmetric reflecting block update (reciprocal surfaces).
ThetaResult update_theta_r(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                           const Precoder& prec, const RisState& ris,
                           ThetaSolveMode mode = ThetaSolveMode::factored);
/// Transmitting block update (reciprocal surfaces), including the leakage
/// through Theta_t^T seen by reflecting users.
ThetaResult update_theta_t(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                           const Precoder& prec, const RisState& ris,
                           ThetaSolveMode mode = ThetaSolveMode::factored);
/// Joint update of both blocks under one shared budget (non-reciprocal surfaces).
ThetaResult update_theta_joint(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                               const Precoder& prec, const RisState& ris,
                               ThetaSolveMode mode = ThetaSolveMode::factored);

struct BcdOptions {
  int max_sweeps = 200;
  double tolerance = 1e-4;
  int starts = 3;
  /// For G > 1, start 0 is warm-started from the solution with the largest
  /// proper divisor of G as group size.
  bool nested_start = true;
  std::uint64_t seed = 1;
  ThetaSolveMode mode = ThetaSolveMode::factored;
};

struct BlockRecord {
  int sweep = 0;
  std::string block;  // "aux" (iota and tau), "F", "theta_r", "theta_t", "theta"
  double objective = 0.0;
  double tx_slack = 0.0;   // P_T - ||F||^2
  double ris_slack = 0.0;  // P_A - RIS power
};

struct SolveReport {
  std::vector<double> sum_rate_trace;  // entry 0 is the initial point
  std::vector<BlockRecord> blocks;
  int iterations = 0;
  bool converged = false;
  int best_start = 0;
  double lambda1 = 0.0, lambda2 = 0.0;
  double lambda_r = 0.0, lambda_t = 0.0, lambda_joint = 0.0;
  double tx_slack = 0.0;
  double ris_slack = 0.0;
  double block_ms_iota = 0.0, block_ms_tau = 0.0, block_ms_f = 0.0, block_ms_theta = 0.0;
  long long i_grid = 0;
  long long i_bs1 = 0, i_bs2 = 0, i_bs3 = 0;
  double complexity_common = 0.0;   // I * (K^2 M^2 + K (I_grid N_T^3 + N_T M^2))
  double complexity_theta = 0.0;

  nlohmann::json to_json() const;
};

struct BcdResult {
  RisState ris;
  Precoder prec;
  double sum_rate = 0.0;
  SolveReport report;
};

struct BcdInit {
  RisState ris;
  Precoder prec;
};

/// MRT columns h_RT,k^H scaled to ||F||_F^2 = P_T.
Precoder mrt_precoder(const System& sys, const ChannelSet& ch);
/// Random architecture-valid Theta scaled so RIS power equals `fraction` P_A.
RisState random_ris(const System& sys, const ChannelSet& ch, const Precoder& prec,
                    double fraction, std::mt19937_64& rng);

/// Block coordinate ascent iota -> tau -> F -> Theta. With `init`, one start
/// from that point; otherwise `opts.starts` seeded random starts.
BcdResult bcd_solve(const System& sys, const ChannelSet& ch, const BcdOptions& opts = {},
                    const std::optional<BcdInit>& init = std::nullopt);

}  // namespace abdris
