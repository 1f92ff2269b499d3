#include "abdris/channels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "abdris/errors.hpp"

namespace abdris {

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double path_loss_db(double d) {
  if (!(d > 0.0)) throw ConfigError("path loss needs a positive distance, got " + std::to_string(d));
  return 41.2 + 28.7 * std::log10(d);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return splitmix(splitmix(a) ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Point2 sample_disk(const Point2& center, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius * std::sqrt(unit(rng));
  const double phi = kTwoPi * unit(rng);
  return {center.x + r * std::cos(phi), center.y + r * std::sin(phi)};
}

// Array axis unit vectors: the RIS lies along x, the BS array along y.
constexpr Point2 kRisAxis{1.0, 0.0};
constexpr Point2 kBsAxis{0.0, 1.0};

// Uniform linear array response toward `to`, seen from an array at `from`.
Eigen::VectorXcd steering(const Point2& from, const Point2& to, const Point2& axis, int n,
                          double spacing) {
  const double d = distance(from, to);
  const double cos_psi = ((to.x - from.x) * axis.x + (to.y - from.y) * axis.y) / d;
  Eigen::VectorXcd a(n);
  for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, -kTwoPi * spacing * i * cos_psi);
  return a;
}

Complex los_phase(double d, double wavelength) { return std::polar(1.0, -kTwoPi * d / wavelength); }

Eigen::MatrixXcd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  Eigen::MatrixXcd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = n(rng);
      out(i, j) = Complex(re, n(rng));
    }
  }
  return out;
}

Eigen::MatrixXcd rician(const Eigen::MatrixXcd& los, double dist, double kappa,
                        std::mt19937_64& rng) {
  const double amp = std::pow(10.0, -path_loss_db(dist) / 20.0);
  if (std::isinf(kappa)) return amp * los;
  Eigen::MatrixXcd nlos = gaussian(los.rows(), los.cols(), rng);
  return amp * (std::sqrt(kappa / (1.0 + kappa)) * los + std::sqrt(1.0 / (1.0 + kappa)) * nlos);
}

}  // namespace

Geometry sample_users(const Geometry& base, int k_r, int k_t, std::mt19937_64& rng) {
  if (k_r < 0 || k_t < 0) throw ConfigError("user counts must be nonnegative");
  if (!(base.user_radius >= 0.0)) throw ConfigError("user radius must be nonnegative");
  Geometry g = base;
  g.users.clear();
  g.users.reserve(k_r + k_t);
  for (int k = 0; k < k_r; ++k) g.users.push_back(sample_disk(base.reflect_center, base.user_radius, rng));
  for (int k = 0; k < k_t; ++k) g.users.push_back(sample_disk(base.transmit_center, base.user_radius, rng));
  return g;
}

ChannelSet draw_channels(const Geometry& geometry, const FadingSpec& fading,
                         const SystemConfig& cfg, std::mt19937_64& rng) {
  const int k_total = cfg.n_users();
  if (static_cast<int>(geometry.users.size()) != k_total) {
    throw ConfigError("geometry holds " + std::to_string(geometry.users.size()) +
                      " user positions, configuration needs " + std::to_string(k_total));
  }
  if (!(fading.rician_kappa >= 0.0)) throw ConfigError("Rician factor must be nonnegative");
  if (!(fading.wavelength_m > 0.0)) throw ConfigError("wavelength must be positive");

  const int n = cfg.n_tx;
  const int m = cfg.n_cells;
  const double s = fading.antenna_spacing;
  const double kappa = fading.rician_kappa;

  ChannelSet ch;
  ch.h_rt.resize(k_total, n);
  ch.h_ri.resize(k_total, m);
  ch.user_sector.resize(k_total);

  const double d_it = distance(geometry.bs, geometry.ris);
  const Eigen::MatrixXcd los_it = los_phase(d_it, fading.wavelength_m) *
                                  steering(geometry.ris, geometry.bs, kRisAxis, m, s) *
                                  steering(geometry.bs, geometry.ris, kBsAxis, n, s).transpose();
  ch.h_it = rician(los_it, d_it, kappa, rng);

  for (int k = 0; k < k_total; ++k) {
    const Point2& u = geometry.users[k];
    ch.user_sector[k] = k < cfg.k_r ? Sector::reflecting : Sector::transmitting;

    const double d_rt = distance(geometry.bs, u);
    const Eigen::MatrixXcd los_rt =
        los_phase(d_rt, fading.wavelength_m) * steering(geometry.bs, u, kBsAxis, n, s).transpose();
    ch.h_rt.row(k) = rician(los_rt, d_rt, kappa, rng);

    const double d_ri = distance(geometry.ris, u);
    const Eigen::MatrixXcd los_ri =
        los_phase(d_ri, fading.wavelength_m) * steering(geometry.ris, u, kRisAxis, m, s).transpose();
    ch.h_ri.row(k) = rician(los_ri, d_ri, kappa, rng);
  }
  return ch;
}

ChannelSet draw_realization(const Geometry& base, const FadingSpec& fading,
                            const SystemConfig& cfg, std::uint64_t realization) {
  std::mt19937_64 rng(mix_seed(fading.seed, realization));
  const Geometry g = sample_users(base, cfg.k_r, cfg.k_t, rng);
  return draw_channels(g, fading, cfg, rng);
}

}  // namespace abdris
