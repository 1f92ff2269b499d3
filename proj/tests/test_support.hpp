// Shared helpers for the unit tests.
#pragma once

#include <cmath>
#include <random>

#include "abdris/model.hpp"
#include "abdris/optimizer.hpp"

namespace testing_support {

using abdris::Complex;

inline Eigen::MatrixXcd cn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  Eigen::MatrixXcd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = Complex(nd(rng), nd(rng));
  return m;
}

inline abdris::SystemConfig config(int n_tx, int m, int g, int k_r, int k_t,
                                   abdris::Reciprocity rec) {
  abdris::SystemConfig cfg;
  cfg.n_tx = n_tx;
  cfg.n_cells = m;
  cfg.group_size = g;
  cfg.k_r = k_r;
  cfg.k_t = k_t;
  cfg.reciprocity = rec;
  cfg.architecture = g == m ? abdris::Architecture::cw_fully
                     : g == 1 ? abdris::Architecture::cw_single
                              : abdris::Architecture::cw_group;
  return cfg;
}

inline abdris::System unit_system(const abdris::SystemConfig& cfg, double p_ris = 1.0,
                                  double sigma_i2 = 0.1, double sigma_r2 = 1.0,
                                  double p_tx = 1.0) {
  abdris::PowerBudget b;
  b.p_tx = p_tx;
  b.p_ris = p_ris;
  b.sigma_i2 = sigma_i2;
  b.sigma_r2 = sigma_r2;
  return abdris::System(cfg, b);
}

inline abdris::ChannelSet channels(const abdris::System& sys, std::mt19937_64& rng) {
  abdris::ChannelSet ch;
  ch.h_it = cn(sys.n_cells(), sys.n_tx(), rng);
  ch.h_rt = cn(sys.n_users(), sys.n_tx(), rng);
  ch.h_ri = cn(sys.n_users(), sys.n_cells(), rng);
  for (int k = 0; k < sys.n_users(); ++k) ch.user_sector.push_back(sys.sector_of(k));
  return ch;
}

inline abdris::Precoder precoder(const abdris::System& sys, std::mt19937_64& rng) {
  abdris::Precoder p{cn(sys.n_tx(), sys.n_users(), rng)};
  p.f *= std::sqrt(sys.budget().p_tx) / p.f.norm();
  return p;
}

// Random architecture-valid state (not scaled to any budget).
inline abdris::RisState ris_state(const abdris::System& sys, std::mt19937_64& rng,
                                  double scale = 0.3) {
  abdris::RisState s = abdris::RisState::zero(sys);
  const int g = sys.group_size();
  for (int a = 0; a < sys.n_groups(); ++a) {
    s.theta_r.block(a * g, a * g, g, g) = scale * cn(g, g, rng);
    s.theta_t.block(a * g, a * g, g, g) = scale * cn(g, g, rng);
  }
  if (sys.reciprocal()) s.theta_r = (0.5 * (s.theta_r + s.theta_r.transpose())).eval();
  return s;
}

inline abdris::FpWorkspace workspace(const abdris::System& sys, const abdris::ChannelSet& ch,
                                     const abdris::RisState& ris, const abdris::Precoder& prec) {
  abdris::FpWorkspace ws = abdris::FpWorkspace::zeros(sys);
  abdris::update_iota(ws, sys, ch, ris, prec);
  abdris::update_tau(ws, sys, ch, ris, prec);
  abdris::refresh_theta_terms(ws, sys, ch, prec);
  return ws;
}

inline double rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace testing_support
