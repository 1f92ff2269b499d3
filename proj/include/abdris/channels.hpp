#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "abdris/model.hpp"

namespace abdris {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point2& a, const Point2& b);

/// Scenario layout in meters. The RIS surface lies along the x axis, so users
/// with y below the RIS share the transmitter's (reflecting) half-space.
struct Geometry {
  Point2 bs{0.0, -70.0};
  Point2 ris{300.0, 0.0};
  Point2 reflect_center{300.0, -10.0};
  Point2 transmit_center{300.0, 10.0};
  double user_radius = 3.0;
  /// Sampled user positions; reflecting users first. Empty until sampled.
  std::vector<Point2> users;
};

struct FadingSpec {
  double rician_kappa = 1.0;  // +inf gives pure line-of-sight
  std::uint64_t seed = 1;
  double antenna_spacing = 0.5;  // wavelengths
  double wavelength_m = 0.1;     // sets the scalar LOS phase of each link
};

/// 3GPP-style large-scale loss: 41.2 + 28.7 log10(d) dB. Rejects d <= 0.
double path_loss_db(double d);

/// Mixes two 64-bit values into an independent-looking seed (splitmix64 based).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Uniform positions over the two user disks (k_r reflecting, then k_t transmitting).
Geometry sample_users(const Geometry& base, int k_r, int k_t, std::mt19937_64& rng);

/// Rician channels for the sampled geometry; throws if positions are missing.
ChannelSet draw_channels(const Geometry& geometry, const FadingSpec& fading,
                         const SystemConfig& cfg, std::mt19937_64& rng);

/// One Monte Carlo realization: users resampled and links drawn from a stream
/// derived only from (fading.seed, realization).
ChannelSet draw_realization(const Geometry& base, const FadingSpec& fading,
                            const SystemConfig& cfg, std::uint64_t realization);

}  // namespace abdris
