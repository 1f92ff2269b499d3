#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abdris/matrixtools.hpp"

namespace abdris {

enum class Reciprocity { reciprocal, non_reciprocal };
enum class Architecture { cw_single, cw_group, cw_fully };
enum class Sector { reflecting, transmitting };

std::string to_string(Reciprocity r);
std::string to_string(Architecture a);
Reciprocity parse_reciprocity(const std::string& s);
Architecture parse_architecture(const std::string& s);

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

/// Scenario scalars as they appear in configuration files (powers in dBm).
struct SystemConfig {
  int n_tx = 4;
  int n_cells = 16;
  int group_size = 16;
  int k_r = 2;
  int k_t = 2;
  double p_total_dbm = 30.0;
  double tx_fraction = 0.99;
  double sigma_i_dbm = -90.0;
  double sigma_r_dbm = -90.0;
  Reciprocity reciprocity = Reciprocity::non_reciprocal;
  Architecture architecture = Architecture::cw_fully;

  int n_users() const { return k_r + k_t; }
  int n_groups() const { return n_cells / group_size; }

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

/// Linear-scale power quantities in watts.
struct PowerBudget {
  double p_tx = 0.0;      // P_T
  double p_ris = 0.0;     // P_A
  double sigma_i2 = 0.0;  // RIS noise power
  double sigma_r2 = 0.0;  // user noise power
};

/// Validated configuration with its powers converted to watts once.
class System {
 public:
  /// RIS-assisted system: P_T = tx_fraction * P_tot, P_A = remainder.
  explicit System(const SystemConfig& cfg);
  /// System with an explicit budget (e.g. P_A = 0 or a RIS-free baseline).
  System(const SystemConfig& cfg, const PowerBudget& budget, bool ris_present = true);

  /// The same scenario without any RIS; the whole budget goes to the transmitter.
  static System without_ris(const SystemConfig& cfg);

  const SystemConfig& config() const { return cfg_; }
  const PowerBudget& budget() const { return budget_; }
  bool ris_present() const { return ris_present_; }

  int n_tx() const { return cfg_.n_tx; }
  int n_cells() const { return cfg_.n_cells; }
  int group_size() const { return cfg_.group_size; }
  int n_groups() const { return cfg_.n_groups(); }
  int n_users() const { return cfg_.n_users(); }
  int k_r() const { return cfg_.k_r; }
  bool reciprocal() const { return cfg_.reciprocity == Reciprocity::reciprocal; }
  Sector sector_of(int k) const { return k < cfg_.k_r ? Sector::reflecting : Sector::transmitting; }
  /// 2 for reciprocal surfaces (Theta_t also leaks through Theta_{1,2}), 1 otherwise.
  double transmit_noise_weight() const { return reciprocal() ? 2.0 : 1.0; }

 private:
  SystemConfig cfg_;
  PowerBudget budget_;
  bool ris_present_ = true;
};

/// One realization of every link. Row k of h_rt / h_ri belongs to user k.
struct ChannelSet {
  Eigen::MatrixXcd h_rt;  // K x N_T, direct links
  Eigen::MatrixXcd h_ri;  // K x M, sector-local RIS -> user links
  Eigen::MatrixXcd h_it;  // M x N_T, transmitter -> sector-1 links
  std::vector<Sector> user_sector;

  int n_users() const { return static_cast<int>(h_rt.rows()); }
  bool finite() const;
};

/// Nonzero blocks Theta_r = Theta_{1,1} and Theta_t = Theta_{2,1}; the other two
/// blocks are identically zero at the optimum and are not stored.
struct RisState {
  Eigen::MatrixXcd theta_r;
  Eigen::MatrixXcd theta_t;
  Reciprocity reciprocity = Reciprocity::non_reciprocal;
  int group_size = 1;

  static RisState zero(const System& sys);
  const Eigen::MatrixXcd& theta(Sector s) const {
    return s == Sector::reflecting ? theta_r : theta_t;
  }
};

struct Precoder {
  Eigen::MatrixXcd f;  // N_T x K, column k = f_k
};

/// Full 2M x 2M scattering matrix with its four M x M sub-blocks.
struct ScatteringPartition {
  Eigen::MatrixXcd full;
  Eigen::MatrixXcd b11, b12, b21, b22;
};

/// Theta = Phi_IA * diag(amp) * Phi_AI, split into sector blocks.
/// Rejects non-unitary factors (tolerance 1e-8) and non-positive amplification.
ScatteringPartition assemble_theta(const Eigen::MatrixXcd& phi_ia, const Eigen::VectorXd& amp,
                                   const Eigen::MatrixXcd& phi_ai);

/// Embeds (Theta_r, Theta_t) into the full 2M x 2M matrix, with Theta_{1,2} =
/// Theta_t^T for reciprocal surfaces and zero otherwise; Theta_{2,2} = 0.
Eigen::MatrixXcd embed_full(const RisState& ris);

/// h_RT,k + h_RI,k Theta_w H_IT for user k (0-based).
Eigen::RowVectorXcd effective_channel(const System& sys, const ChannelSet& ch,
                                      const RisState& ris, int k);

/// Signal power A_{w,k} and interference-plus-noise B_{w,k} of user k.
struct LinkTerms {
  double signal = 0.0;
  double interference_noise = 0.0;
  double sinr() const { return signal / interference_noise; }
};

LinkTerms link_terms(const System& sys, const ChannelSet& ch, const RisState& ris,
                     const Precoder& prec, int k);
std::vector<LinkTerms> link_terms_all(const System& sys, const ChannelSet& ch,
                                      const RisState& ris, const Precoder& prec);

double sinr(const System& sys, const ChannelSet& ch, const RisState& ris, const Precoder& prec,
            int k);

/// Sum of log2(1 + SINR_k), in bits/s/Hz.
double sum_rate(const System& sys, const ChannelSet& ch, const RisState& ris,
                const Precoder& prec);

/// Radiated RIS power: ||Theta_r H F||^2 + ||Theta_t H F||^2 + sigma_I^2 (||Theta_r||^2 + c ||Theta_t||^2).
double ris_power_used(const System& sys, const ChannelSet& ch, const RisState& ris,
                      const Precoder& prec);

/// Amplified-noise part only: sigma_I^2 (||Theta_r||^2 + c ||Theta_t||^2).
double ris_static_power(const System& sys, const RisState& ris);

struct RisViolation {
  std::string constraint;  // "shape", "sparsity", "block <g> symmetry"
  std::string detail;
};

/// Checks block-diagonal support and per-block symmetry (absolute tolerance 1e-9).
std::optional<RisViolation> validate_ris(const RisState& ris, const SystemConfig& cfg);

}  // namespace abdris
