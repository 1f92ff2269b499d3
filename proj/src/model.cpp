#include "abdris/model.hpp"

#include <cmath>
#include <string>

#include "abdris/errors.hpp"

namespace abdris {

std::string to_string(Reciprocity r) {
  return r == Reciprocity::reciprocal ? "reciprocal" : "non-reciprocal";
}

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::cw_single: return "cw-single";
    case Architecture::cw_group: return "cw-group";
    case Architecture::cw_fully: return "cw-fully";
  }
  return "unknown";
}

Reciprocity parse_reciprocity(const std::string& s) {
  if (s == "reciprocal") return Reciprocity::reciprocal;
  if (s == "non-reciprocal") return Reciprocity::non_reciprocal;
  throw ConfigError("unknown reciprocity '" + s + "'");
}

Architecture parse_architecture(const std::string& s) {
  if (s == "cw-single") return Architecture::cw_single;
  if (s == "cw-group") return Architecture::cw_group;
  if (s == "cw-fully") return Architecture::cw_fully;
  throw ConfigError("unknown architecture '" + s + "'");
}

void SystemConfig::validate() const {
  if (n_tx < 1) throw ConfigError("n_tx must be >= 1");
  if (n_cells < 1) throw ConfigError("n_cells must be >= 1");
  if (group_size < 1 || n_cells % group_size != 0) {
    throw ConfigError("group_size " + std::to_string(group_size) + " must divide n_cells " +
                      std::to_string(n_cells));
  }
  if (k_r < 1 || k_t < 1) throw ConfigError("k_r and k_t must both be >= 1");
  if (!(tx_fraction > 0.0 && tx_fraction < 1.0)) {
    throw ConfigError("tx_fraction must lie strictly inside (0, 1)");
  }
  if (!std::isfinite(p_total_dbm) || !std::isfinite(sigma_i_dbm) || !std::isfinite(sigma_r_dbm)) {
    throw ConfigError("power levels must be finite");
  }
  const bool single = group_size == 1;
  const bool fully = group_size == n_cells;
  if (architecture == Architecture::cw_single && !single) {
    throw ConfigError("cw-single requires group_size == 1");
  }
  if (architecture == Architecture::cw_fully && !fully) {
    throw ConfigError("cw-fully requires group_size == n_cells");
  }
}

System::System(const SystemConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const double total = dbm_to_watts(cfg.p_total_dbm);
  budget_.p_tx = cfg.tx_fraction * total;
  budget_.p_ris = (1.0 - cfg.tx_fraction) * total;
  budget_.sigma_i2 = dbm_to_watts(cfg.sigma_i_dbm);
  budget_.sigma_r2 = dbm_to_watts(cfg.sigma_r_dbm);
}

System::System(const SystemConfig& cfg, const PowerBudget& budget, bool ris_present)
    : cfg_(cfg), budget_(budget), ris_present_(ris_present) {
  cfg_.validate();
  if (budget.p_tx <= 0.0) throw ConfigError("transmit power must be positive");
  if (budget.p_ris < 0.0) throw ConfigError("RIS power budget must be nonnegative");
  if (budget.sigma_r2 <= 0.0) throw ConfigError("user noise power must be positive");
  if (budget.sigma_i2 < 0.0) throw ConfigError("RIS noise power must be nonnegative");
}

System System::without_ris(const SystemConfig& cfg) {
  cfg.validate();
  PowerBudget b;
  b.p_tx = dbm_to_watts(cfg.p_total_dbm);
  b.p_ris = 0.0;
  b.sigma_i2 = dbm_to_watts(cfg.sigma_i_dbm);
  b.sigma_r2 = dbm_to_watts(cfg.sigma_r_dbm);
  return System(cfg, b, false);
}

bool ChannelSet::finite() const {
  return h_rt.allFinite() && h_ri.allFinite() && h_it.allFinite();
}

RisState RisState::zero(const System& sys) {
  RisState s;
  const int m = sys.n_cells();
  s.theta_r = Eigen::MatrixXcd::Zero(m, m);
  s.theta_t = Eigen::MatrixXcd::Zero(m, m);
  s.reciprocity = sys.config().reciprocity;
  s.group_size = sys.group_size();
  return s;
}

namespace {

bool is_unitary(const Eigen::MatrixXcd& u, double tol) {
  if (u.rows() != u.cols()) return false;
  const Eigen::MatrixXcd gram = u.adjoint() * u;
  return (gram - Eigen::MatrixXcd::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

ScatteringPartition assemble_theta(const Eigen::MatrixXcd& phi_ia, const Eigen::VectorXd& amp,
                                   const Eigen::MatrixXcd& phi_ai) {
  const Eigen::Index n = amp.size();
  if (n == 0 || n % 2 != 0) throw ConfigError("amplifier count must be a positive even number");
  if (phi_ia.rows() != n || phi_ai.rows() != n) {
    throw ConfigError("scattering factors must be 2M x 2M");
  }
  if (!is_unitary(phi_ia, 1e-8)) throw ConfigError("Phi_IA is not unitary");
  if (!is_unitary(phi_ai, 1e-8)) throw ConfigError("Phi_AI is not unitary");
  if ((amp.array() <= 0.0).any()) throw ConfigError("amplification factors must be positive");

  ScatteringPartition out;
  out.full = phi_ia * amp.cast<Complex>().asDiagonal() * phi_ai;
  const Eigen::Index m = n / 2;
  out.b11 = out.full.topLeftCorner(m, m);
  out.b12 = out.full.topRightCorner(m, m);
  out.b21 = out.full.bottomLeftCorner(m, m);
  out.b22 = out.full.bottomRightCorner(m, m);
  return out;
}

Eigen::MatrixXcd embed_full(const RisState& ris) {
  const Eigen::Index m = ris.theta_r.rows();
  Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
  full.topLeftCorner(m, m) = ris.theta_r;
  full.bottomLeftCorner(m, m) = ris.theta_t;
  if (ris.reciprocity == Reciprocity::reciprocal) {
    full.topRightCorner(m, m) = ris.theta_t.transpose();
  }
  return full;
}

Eigen::RowVectorXcd effective_channel(const System& sys, const ChannelSet& ch,
                                      const RisState& ris, int k) {
  const Eigen::MatrixXcd& theta = ris.theta(sys.sector_of(k));
  return ch.h_rt.row(k) + ch.h_ri.row(k) * theta * ch.h_it;
}

LinkTerms link_terms(const System& sys, const ChannelSet& ch, const RisState& ris,
                     const Precoder& prec, int k) {
  const Sector sector = sys.sector_of(k);
  const Eigen::RowVectorXcd h = effective_channel(sys, ch, ris, k);
  const Eigen::RowVectorXcd gains = h * prec.f;
  const double sigma_i2 = sys.budget().sigma_i2;

  LinkTerms t;
  t.signal = std::norm(gains(k));
  t.interference_noise = gains.squaredNorm() - t.signal;
  t.interference_noise += sigma_i2 * (ch.h_ri.row(k) * ris.theta(sector)).squaredNorm();
  if (sys.reciprocal() && sector == Sector::reflecting) {
    t.interference_noise += sigma_i2 * (ch.h_ri.row(k) * ris.theta_t.transpose()).squaredNorm();
  }
  t.interference_noise += sys.budget().sigma_r2;
  return t;
}

std::vector<LinkTerms> link_terms_all(const System& sys, const ChannelSet& ch,
                                      const RisState& ris, const Precoder& prec) {
  std::vector<LinkTerms> out;
  out.reserve(sys.n_users());
  for (int k = 0; k < sys.n_users(); ++k) out.push_back(link_terms(sys, ch, ris, prec, k));
  return out;
}

double sinr(const System& sys, const ChannelSet& ch, const RisState& ris, const Precoder& prec,
            int k) {
  if (k < 0 || k >= sys.n_users()) throw ConfigError("user index out of range");
  return link_terms(sys, ch, ris, prec, k).sinr();
}

double sum_rate(const System& sys, const ChannelSet& ch, const RisState& ris,
                const Precoder& prec) {
  double rate = 0.0;
  for (const LinkTerms& t : link_terms_all(sys, ch, ris, prec)) rate += std::log2(1.0 + t.sinr());
  return rate;
}

double ris_static_power(const System& sys, const RisState& ris) {
  return sys.budget().sigma_i2 *
         (ris.theta_r.squaredNorm() + sys.transmit_noise_weight() * ris.theta_t.squaredNorm());
}

double ris_power_used(const System& sys, const ChannelSet& ch, const RisState& ris,
                      const Precoder& prec) {
  const Eigen::MatrixXcd hf = ch.h_it * prec.f;
  return (ris.theta_r * hf).squaredNorm() + (ris.theta_t * hf).squaredNorm() +
         ris_static_power(sys, ris);
}

std::optional<RisViolation> validate_ris(const RisState& ris, const SystemConfig& cfg) {
  const int m = cfg.n_cells;
  if (ris.theta_r.rows() != m || ris.theta_r.cols() != m || ris.theta_t.rows() != m ||
      ris.theta_t.cols() != m) {
    return RisViolation{"shape", "Theta_r and Theta_t must be M x M"};
  }
  if (ris.group_size < 1 || m % ris.group_size != 0) {
    return RisViolation{"shape", "descriptor group size does not divide M"};
  }
  if (ris.group_size != cfg.group_size || ris.reciprocity != cfg.reciprocity) {
    return RisViolation{"descriptor", "state descriptor does not match the configuration"};
  }
  constexpr double kTol = 1e-9;
  const int g = ris.group_size;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i / g == j / g) continue;
      if (std::abs(ris.theta_r(i, j)) > kTol || std::abs(ris.theta_t(i, j)) > kTol) {
        return RisViolation{"sparsity", "nonzero entry at (" + std::to_string(i) + ", " +
                                            std::to_string(j) + ") outside block support"};
      }
    }
  }
  if (ris.reciprocity == Reciprocity::reciprocal) {
    for (int b = 0; b < m / g; ++b) {
      const Eigen::MatrixXcd blk = ris.theta_r.block(b * g, b * g, g, g);
      if ((blk - blk.transpose()).cwiseAbs().maxCoeff() > kTol) {
        return RisViolation{"block " + std::to_string(b + 1) + " symmetry",
                            "reflecting block is not complex symmetric"};
      }
    }
  }
  return std::nullopt;
}

}  // namespace abdris
