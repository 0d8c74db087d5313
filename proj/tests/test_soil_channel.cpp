#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "wusn/soil_channel.hpp"

using namespace wusn;

namespace {

constexpr double kPi = std::numbers::pi;

// Textbook real-valued forms of the lossy-medium attenuation and phase constants.
double alpha_oracle(double eps_r, double sigma, double f) {
  const double w = 2 * kPi * f;
  const double loss = sigma / (w * constants::eps0 * eps_r);
  // sqrt(1 + x^2) - 1 rewritten without cancellation.
  const double excess = loss * loss / (std::sqrt(1 + loss * loss) + 1);
  return w * std::sqrt(constants::mu0 * constants::eps0 * eps_r / 2 * excess);
}

double beta_oracle(double eps_r, double sigma, double f) {
  const double w = 2 * kPi * f;
  const double loss = sigma / (w * constants::eps0 * eps_r);
  return w * std::sqrt(constants::mu0 * constants::eps0 * eps_r / 2 * (std::sqrt(1 + loss * loss) + 1));
}

// Composite Simpson rule over the standard normal density on [x, x + 14].
double q_simpson(double x) {
  const int n = 20000;
  const double a = x, b = x + 14.0, h = (b - a) / n;
  auto pdf = [](double t) { return std::exp(-t * t / 2) / std::sqrt(2 * kPi); };
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(a + i * h);
  return s * h / 3;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, i / double(n - 1)));
  return v;
}

}  // namespace

TEST(PropagationConstant, MatchesHighPrecisionReference) {
  // Reference values evaluated with 40-digit complex arithmetic.
  const auto pc = propagation_constant({10.0, 0.01}, 300e6);
  EXPECT_NEAR(pc.alpha, 0.5953960387280912, 1e-12);
  EXPECT_NEAR(pc.beta, 19.89184426992131, 1e-11);
}

TEST(PropagationConstant, MatchesRealFormOnGrid) {
  for (double eps : {1.0, 2.5, 10.0, 25.0, 40.0})
    for (double sigma : {0.0, 1e-4, 0.01, 0.3, 1.0, 2.5})
      for (double f : {100e6, 300e6, 433e6}) {
        const auto pc = propagation_constant({eps, sigma}, f);
        EXPECT_NEAR(pc.alpha, alpha_oracle(eps, sigma, f), 1e-11 * (1 + alpha_oracle(eps, sigma, f)));
        EXPECT_NEAR(pc.beta, beta_oracle(eps, sigma, f), 1e-11 * beta_oracle(eps, sigma, f));
      }
}

TEST(PropagationConstant, LosslessMedia) {
  const auto vac = propagation_constant({1.0, 0.0}, 300e6);
  EXPECT_EQ(vac.alpha, 0.0);
  EXPECT_NEAR(vac.beta, 6.287535065634770, 1e-12);
  EXPECT_NEAR(propagation_constant({4.0, 0.0}, 300e6).beta, 12.57507013126954, 1e-11);
}

TEST(PropagationConstant, StrictlyIncreasingInConductivity) {
  for (double eps : {1.0, 5.0, 20.0}) {
    double prev_a = -1, prev_b = 0;
    for (double sigma : {0.0, 1e-3, 1e-2, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0}) {
      const auto pc = propagation_constant({eps, sigma}, 300e6);
      EXPECT_EQ(pc.alpha == 0.0, sigma == 0.0);
      EXPECT_GT(pc.alpha, prev_a);
      EXPECT_GT(pc.beta, prev_b);
      prev_a = pc.alpha;
      prev_b = pc.beta;
    }
  }
}

TEST(PropagationConstant, RejectsNonPhysicalInput) {
  EXPECT_THROW(propagation_constant({0.5, 0.0}, 300e6), Error);
  EXPECT_THROW(propagation_constant({4.0, -0.1}, 300e6), Error);
  EXPECT_THROW(propagation_constant({NAN, 0.0}, 300e6), Error);
  EXPECT_THROW(propagation_constant({4.0, 0.0}, 0.0), Error);
}

TEST(PathLoss, UndergroundReference) {
  const auto pc = propagation_constant({10.0, 0.01}, 300e6);
  EXPECT_NEAR(underground_loss_db(pc, 0.095), 12.41950231657313, 1e-10);
  EXPECT_THROW(underground_loss_db(pc, 0.0), Error);
}

TEST(PathLoss, FreeSpaceReference) {
  EXPECT_NEAR(aboveground_loss_db(300e6, 20.0), 48.01080822955625, 1e-10);
  // Doubling the distance adds 20 log10(2).
  EXPECT_NEAR(aboveground_loss_db(300e6, 40.0) - aboveground_loss_db(300e6, 20.0), 20 * std::log10(2.0), 1e-12);
}

TEST(PathLoss, RefractionReference) {
  EXPECT_NEAR(refraction_loss_db({20.0, 0.02}, 300e6), 2.238622769518035, 1e-10);
  EXPECT_NEAR(refraction_loss_db({1.0, 0.0}, 300e6), 0.0, 1e-15);
  for (double eps : {1.0, 3.0, 30.0})
    for (double sigma : {0.0, 0.1, 2.0}) {
      const double w = 2 * kPi * 300e6;
      const double im = sigma / (w * constants::eps0);
      const double n = std::sqrt((std::hypot(eps, im) + eps) / 2);
      EXPECT_NEAR(refractive_index({eps, sigma}, 300e6), n, 1e-12 * n);
      EXPECT_GE(refraction_loss_db({eps, sigma}, 300e6), 0.0);
    }
}

TEST(PathLoss, ComposesComponents) {
  const LinkGeometry g;
  const DielectricState d{15.0, 1.2};
  const double expected = underground_loss_db(propagation_constant(d, g.frequency_hz), g.depth_m) +
                          aboveground_loss_db(g.frequency_hz, g.distance_m) + refraction_loss_db(d, g.frequency_hz) -
                          g.tx_gain_db - g.rx_gain_db;
  EXPECT_DOUBLE_EQ(path_loss_db(d, g), expected);
}

TEST(PathLoss, StrictlyIncreasingInConductivity) {
  const LinkGeometry g;
  for (double eps : {2.0, 10.0, 25.0}) {
    double prev = -1e300;
    for (double sigma = 0.0; sigma <= 3.0; sigma += 0.05) {
      const double pl = path_loss_db({eps, sigma}, g);
      EXPECT_GT(pl, prev) << "eps " << eps << " sigma " << sigma;
      prev = pl;
    }
  }
}

TEST(LinearGain, Values) {
  EXPECT_EQ(linear_gain(0.0), 1.0);
  EXPECT_NEAR(linear_gain(10.0), 0.1, 1e-16);
  EXPECT_NEAR(linear_gain(3.0), 0.5011872336272723, 1e-15);
  EXPECT_THROW(linear_gain(INFINITY), Error);
}

TEST(QFunction, MatchesNumericalIntegration) {
  EXPECT_EQ(q_function(0.0), 0.5);
  EXPECT_NEAR(q_function(1.0), 0.1586552539314571, 1e-15);
  for (double x = -3.0; x <= 6.0; x += 0.25) {
    const double oracle = x >= 0 ? q_simpson(x) : 1.0 - q_simpson(-x);
    EXPECT_NEAR(q_function(x), oracle, 1e-12) << x;
  }
  for (double x = 0.0; x <= 8.0; x += 0.5) EXPECT_NEAR(q_function(x) + q_function(-x), 1.0, 1e-12);
}

TEST(Ber, ZeroSnrLimits) {
  EXPECT_EQ(ber_mpsk(2, 0.0), 0.5);
  EXPECT_EQ(ber_mpsk(4, 0.0), 0.5);
  EXPECT_EQ(ber_mpsk(8, 0.0), 2.0 / 3.0);
  EXPECT_NEAR(ber_mpsk(2, 0.5), 0.1586552539314571, 1e-15);
}

TEST(Ber, BpskMatchesErfc) {
  for (double snr : log_grid(1e-6, 1e3, 1000)) EXPECT_NEAR(ber_mpsk(2, snr), 0.5 * std::erfc(std::sqrt(snr)), 1e-12);
}

TEST(Ber, BoundedMonotoneAndOrdered) {
  const auto grid = log_grid(1e-4, 1e4, 100);
  for (int m : {2, 4, 8}) {
    double prev = 1.0;
    for (double snr : grid) {
      const double b = ber_mpsk(m, snr);
      EXPECT_GE(b, 0.0);
      EXPECT_LE(b, 1.0);
      EXPECT_LE(b, prev);
      prev = b;
    }
  }
  for (double snr : grid) {
    EXPECT_LE(ber_mpsk(2, snr), ber_mpsk(4, snr));
    EXPECT_LE(ber_mpsk(4, snr), ber_mpsk(8, snr));
  }
}

TEST(Ber, RejectsBadInput) {
  EXPECT_THROW(ber_mpsk(16, 1.0), Error);
  EXPECT_THROW(ber_mpsk(3, 1.0), Error);
  EXPECT_THROW(ber_mpsk(2, -1.0), Error);
  try {
    ber_mpsk(16, 1.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_modulation);
  }
}

TEST(PacketSuccess, Values) {
  EXPECT_EQ(packet_success_prob(0.0, 1000), 1.0);
  EXPECT_EQ(packet_success_prob(1.0, 1000), 0.0);
  EXPECT_NEAR(packet_success_prob(1e-4, 1000), 0.9048328935585463, 1e-15);
  // Far below machine epsilon the naive power would round to exactly 1.
  EXPECT_LT(packet_success_prob(1e-18, 1000), 1.0);
  EXPECT_THROW(packet_success_prob(-0.1, 1000), Error);
  EXPECT_THROW(packet_success_prob(0.1, 0), Error);
}

TEST(PacketSuccess, MonotoneInErrorAndLength) {
  double prev = 1.0;
  for (double pe : log_grid(1e-9, 0.5, 60)) {
    const double p = packet_success_prob(pe, 1000);
    EXPECT_LT(p, prev);
    prev = p;
  }
  prev = 1.0;
  for (int bits : {1, 10, 100, 1000, 10000}) {
    const double p = packet_success_prob(1e-3, bits);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Units, DbmConversions) {
  EXPECT_NEAR(dbm_to_watt(-100.0), 1e-13, 1e-27);
  EXPECT_NEAR(dbm_to_watt(30.0), 1.0, 1e-15);
  EXPECT_NEAR(watt_to_dbm(0.01), 10.0, 1e-12);
}
