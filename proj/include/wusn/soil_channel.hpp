#pragma once

// Physical-layer model of the soil-to-air uplink: soil propagation constant,
// composite path loss, SNR and MPSK bit error rate.

#include <cmath>
#include <complex>
#include <numbers>

#include "wusn/error.hpp"

namespace wusn {

namespace constants {
inline constexpr double mu0 = 4.0e-7 * std::numbers::pi;  // H/m
inline constexpr double eps0 = 8.854187817e-12;           // F/m
inline constexpr double c = 299792458.0;                  // m/s
}  // namespace constants

/// Soil dielectric parameters at one instant.
struct DielectricState {
  double epsilon_r = 1.0;  // relative permittivity
  double sigma = 0.0;      // conductivity, S/m
};

/// Uplink geometry. Defaults: 9.5 cm burial, 20 m to the base station,
/// 300 MHz carrier, 5 dB antennas at both ends.
struct LinkGeometry {
  double depth_m = 0.095;
  double distance_m = 20.0;
  double frequency_hz = 300e6;
  double tx_gain_db = 5.0;
  double rx_gain_db = 5.0;
};

/// k_s = alpha + j*beta of the soil medium.
struct PropagationConstant {
  double alpha = 0.0;  // Np/m
  double beta = 0.0;   // rad/m
};

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

struct RadioConfig {
  double tx_power_w = 0.01;
  double noise_w = dbm_to_watt(-100.0);
  double symbol_time_s = 1.0 / 60000.0;
  int packet_bits = 1000;

  void validate() const {
    require(std::isfinite(tx_power_w) && tx_power_w > 0, ErrorCode::invalid_config,
            "transmit power must be positive");
    require(std::isfinite(noise_w) && noise_w > 0, ErrorCode::invalid_config,
            "noise power must be positive");
    require(std::isfinite(symbol_time_s) && symbol_time_s > 0, ErrorCode::invalid_config,
            "symbol time must be positive");
    require(packet_bits >= 1, ErrorCode::invalid_config, "packet length must be >= 1 bit");
  }
};

namespace detail {

inline void check_dielectric(const DielectricState& d) {
  require(std::isfinite(d.epsilon_r) && std::isfinite(d.sigma), ErrorCode::invalid_input,
          "dielectric state must be finite");
  require(d.epsilon_r >= 1.0 && d.sigma >= 0.0, ErrorCode::invalid_input,
          "dielectric state requires epsilon_r >= 1 and sigma >= 0");
}

inline void check_frequency(double f) {
  require(std::isfinite(f) && f > 0, ErrorCode::invalid_input, "frequency must be positive");
}

// Complex relative permittivity eps_r - j*sigma/(omega*eps0).
inline std::complex<double> complex_permittivity(const DielectricState& d, double f) {
  const double omega = 2.0 * std::numbers::pi * f;
  return {d.epsilon_r, -d.sigma / (omega * constants::eps0)};
}

}  // namespace detail

inline PropagationConstant propagation_constant(const DielectricState& d, double frequency_hz) {
  detail::check_dielectric(d);
  detail::check_frequency(frequency_hz);
  const double omega = 2.0 * std::numbers::pi * frequency_hz;
  const std::complex<double> inner{constants::mu0 * constants::eps0 * d.epsilon_r,
                                   -constants::mu0 * d.sigma / omega};
  const std::complex<double> k = std::complex<double>{0.0, omega} * std::sqrt(inner);
  return {k.real(), std::abs(k.imag())};
}

/// Modified-Friis loss inside the soil over the burial depth.
inline double underground_loss_db(const PropagationConstant& pc, double depth_m) {
  require(std::isfinite(depth_m) && depth_m > 0, ErrorCode::invalid_input,
          "burial depth must be positive");
  require(pc.alpha >= 0 && pc.beta > 0, ErrorCode::invalid_input,
          "propagation constant requires alpha >= 0, beta > 0");
  return 6.4 + 20.0 * std::log10(depth_m) + 20.0 * std::log10(pc.beta) +
         8.69 * pc.alpha * depth_m;
}

/// Free-space loss from the surface to the base station.
inline double aboveground_loss_db(double frequency_hz, double distance_m) {
  detail::check_frequency(frequency_hz);
  require(std::isfinite(distance_m) && distance_m > 0, ErrorCode::invalid_input,
          "aboveground distance must be positive");
  return 20.0 * std::log10(4.0 * std::numbers::pi * distance_m * frequency_hz / constants::c);
}

/// Soil refractive index n = Re(sqrt(complex relative permittivity)); >= 1.
inline double refractive_index(const DielectricState& d, double frequency_hz) {
  detail::check_dielectric(d);
  detail::check_frequency(frequency_hz);
  return std::sqrt(detail::complex_permittivity(d, frequency_hz)).real();
}

/// Normal-incidence transmission mismatch at the soil-air boundary.
inline double refraction_loss_db(const DielectricState& d, double frequency_hz) {
  const double n = refractive_index(d, frequency_hz);
  return 10.0 * std::log10((n + 1.0) * (n + 1.0) / (4.0 * n));
}

inline double path_loss_db(const DielectricState& d, const LinkGeometry& g) {
  const PropagationConstant pc = propagation_constant(d, g.frequency_hz);
  return underground_loss_db(pc, g.depth_m) + aboveground_loss_db(g.frequency_hz, g.distance_m) +
         refraction_loss_db(d, g.frequency_hz) - g.tx_gain_db - g.rx_gain_db;
}

inline double linear_gain(double path_loss_db) {
  require(std::isfinite(path_loss_db), ErrorCode::invalid_input, "path loss must be finite");
  return std::pow(10.0, -path_loss_db / 10.0);
}

inline double snr(const RadioConfig& radio, double path_loss_db) {
  return radio.tx_power_w * linear_gain(path_loss_db) / radio.noise_w;
}

/// Gaussian tail probability.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline bool is_valid_modulation(int order) { return order == 2 || order == 4 || order == 8; }

inline int bits_per_symbol(int order) {
  require(is_valid_modulation(order), ErrorCode::invalid_modulation,
          "modulation order " + std::to_string(order) + " not in {2, 4, 8}");
  return order == 2 ? 1 : order == 4 ? 2 : 3;
}

inline const char* modulation_name(int order) {
  switch (order) {
    case 2: return "BPSK";
    case 4: return "QPSK";
    case 8: return "8PSK";
    default: return "?";
  }
}

/// Approximate MPSK bit error rate at linear SNR P_t*l_p/eta.
inline double ber_mpsk(int order, double snr_linear) {
  const int k = bits_per_symbol(order);
  require(std::isfinite(snr_linear) && snr_linear >= 0, ErrorCode::invalid_input,
          "snr must be finite and non-negative");
  const double amplitude = std::sqrt(2.0 * snr_linear);
  const int terms = order / 4 > 1 ? order / 4 : 1;
  double sum = 0.0;
  for (int i = 1; i <= terms; ++i)
    sum += q_function(amplitude * std::sin((2 * i - 1) * std::numbers::pi / order));
  const double ber = 2.0 / static_cast<double>(k > 2 ? k : 2) * sum;
  return ber < 0.0 ? 0.0 : ber > 1.0 ? 1.0 : ber;
}

inline double packet_success_prob(double bit_error, int packet_bits) {
  require(bit_error >= 0.0 && bit_error <= 1.0, ErrorCode::invalid_input,
          "bit error probability outside [0, 1]");
  require(packet_bits >= 1, ErrorCode::invalid_input, "packet length must be >= 1 bit");
  // log1p keeps (1 - pe)^L accurate when pe is far below machine epsilon.
  if (bit_error == 1.0) return 0.0;
  return std::exp(static_cast<double>(packet_bits) * std::log1p(-bit_error));
}

}  // namespace wusn
