#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "somnilex/common.hpp"

namespace somnilex {

// One second-order section, normalized so the leading denominator
// coefficient is 1: H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0, b1, b2;
  double a1, a2;
};

// A band-pass filter realized as a cascade of second-order sections in
// double precision. The upper edge sits very close to Nyquist for the
// standard design (49.9 Hz at fs=100), which makes a direct-form transfer
// function numerically fragile; the cascade form keeps each section's pole
// pair well conditioned.
struct FilterSpec {
  std::vector<Biquad> sections;
  int order = 0;  // analog prototype order
  double low_hz = 0.0;
  double high_hz = 0.0;
  double fs_hz = 0.0;

  int state_length() const { return 2 * static_cast<int>(sections.size()) + 1; }
};

namespace detail {

using cplx = std::complex<double>;

// Evaluates a polynomial with roots `r` at point x: prod (x - r_i).
inline cplx poly_from_roots_at(const std::vector<cplx>& r, cplx x) {
  cplx acc(1.0, 0.0);
  for (const auto& root : r) acc *= (x - root);
  return acc;
}

}  // namespace detail

// Complex frequency response of the cascade at `freq_hz`.
inline std::complex<double> frequency_response(const FilterSpec& spec,
                                               double freq_hz) {
  const double w = 2.0 * M_PI * freq_hz / spec.fs_hz;
  const std::complex<double> z1 = std::polar(1.0, -w);   // z^-1
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h(1.0, 0.0);
  for (const auto& s : spec.sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

inline double max_pole_radius(const FilterSpec& spec) {
  double worst = 0.0;
  for (const auto& s : spec.sections) {
    // roots of z^2 + a1 z + a2
    const std::complex<double> disc =
        std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    const std::complex<double> r1 = (-s.a1 + disc) / 2.0;
    const std::complex<double> r2 = (-s.a1 - disc) / 2.0;
    worst = std::max({worst, std::abs(r1), std::abs(r2)});
  }
  return worst;
}

// Butterworth band-pass design: analog low-pass prototype, low-pass to
// band-pass transform with frequency pre-warped edges, bilinear transform,
// then pole pairing into biquad sections. An order-N prototype yields N
// sections; each section carries one zero at z=+1 and one at z=-1, and the
// overall gain is distributed evenly across sections.
inline FilterSpec design_bandpass(double low_hz, double high_hz, double fs_hz,
                                  int order = 5) {
  using detail::cplx;
  if (!(low_hz > 0.0) || !(low_hz < high_hz))
    throw ConfigError("band-pass design requires 0 < low < high, got [" +
                      std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                      "]");
  if (!(high_hz < fs_hz / 2.0))
    throw ConfigError("band-pass upper edge " + std::to_string(high_hz) +
                      " Hz must lie below Nyquist " +
                      std::to_string(fs_hz / 2.0) + " Hz");
  if (order < 1) throw ConfigError("filter order must be >= 1");

  // Analog prototype poles on the unit circle, left half plane.
  std::vector<cplx> proto;
  proto.reserve(order);
  for (int k = 0; k < order; ++k) {
    const double theta = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
    proto.emplace_back(std::cos(theta), std::sin(theta));
  }

  // Pre-warped analog edges for the bilinear transform.
  const double fs2 = 2.0 * fs_hz;
  const double w1 = fs2 * std::tan(M_PI * low_hz / fs_hz);
  const double w2 = fs2 * std::tan(M_PI * high_hz / fs_hz);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);

  // Low-pass -> band-pass: each prototype pole p maps to the pair
  // p*bw/2 +- sqrt((p*bw/2)^2 - w0^2); N zeros appear at s=0.
  std::vector<cplx> poles;
  poles.reserve(2 * order);
  for (const auto& p : proto) {
    const cplx ps = p * (bw / 2.0);
    const cplx d = std::sqrt(ps * ps - cplx(w0 * w0, 0.0));
    poles.push_back(ps + d);
    poles.push_back(ps - d);
  }
  std::vector<cplx> zeros(order, cplx(0.0, 0.0));
  const double k_analog = std::pow(bw, order);

  // Bilinear transform of poles/zeros; gain follows scipy's zpk bilinear.
  std::vector<cplx> zp, pp;
  zp.reserve(2 * order);
  pp.reserve(2 * order);
  for (const auto& z : zeros) zp.push_back((cplx(fs2, 0) + z) / (cplx(fs2, 0) - z));
  for (const auto& p : poles) pp.push_back((cplx(fs2, 0) + p) / (cplx(fs2, 0) - p));
  // Degree difference contributes zeros at z = -1.
  for (int i = 0; i < order; ++i) zp.emplace_back(-1.0, 0.0);

  const cplx num = detail::poly_from_roots_at(zeros, cplx(fs2, 0.0));
  const cplx den = detail::poly_from_roots_at(poles, cplx(fs2, 0.0));
  const double k_digital = k_analog * (num / den).real();

  // Pair digital poles into real-coefficient sections. Conjugate pairs are
  // matched by pairing each pole of positive imaginary part with the nearest
  // negative-imaginary pole; leftover real poles are paired among themselves.
  constexpr double kImagTol = 1e-10;
  std::vector<cplx> upper, real_poles;
  std::vector<cplx> lower;
  for (const auto& p : pp) {
    if (p.imag() > kImagTol)
      upper.push_back(p);
    else if (p.imag() < -kImagTol)
      lower.push_back(p);
    else
      real_poles.push_back(cplx(p.real(), 0.0));
  }
  std::vector<std::pair<cplx, cplx>> pairs;
  for (const auto& u : upper) {
    auto best = std::min_element(lower.begin(), lower.end(),
                                 [&](const cplx& a, const cplx& b) {
                                   return std::abs(a - std::conj(u)) <
                                          std::abs(b - std::conj(u));
                                 });
    if (best == lower.end())
      throw Error("band-pass design: unpaired complex pole");
    pairs.emplace_back(u, *best);
    lower.erase(best);
  }
  if (real_poles.size() % 2 != 0)
    throw Error("band-pass design: odd number of real poles");
  std::sort(real_poles.begin(), real_poles.end(),
            [](const cplx& a, const cplx& b) { return a.real() < b.real(); });
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2)
    pairs.emplace_back(real_poles[i], real_poles[i + 1]);

  // Sections ordered by pole radius ascending (most damped first).
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return std::max(std::abs(a.first), std::abs(a.second)) <
           std::max(std::abs(b.first), std::abs(b.second));
  });

  FilterSpec spec;
  spec.order = order;
  spec.low_hz = low_hz;
  spec.high_hz = high_hz;
  spec.fs_hz = fs_hz;
  const double g = std::copysign(std::pow(std::abs(k_digital), 1.0 / order),
                                 1.0);
  const double g_signed_first = k_digital < 0 ? -g : g;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [p1, p2] = pairs[i];
    Biquad s;
    const double gs = (i == 0) ? g_signed_first : g;
    // numerator (z-1)(z+1) = z^2 - 1, scaled by this section's gain share
    s.b0 = gs;
    s.b1 = 0.0;
    s.b2 = -gs;
    s.a1 = -(p1 + p2).real();
    s.a2 = (p1 * p2).real();
    spec.sections.push_back(s);
  }
  return spec;
}

// Single forward pass of the cascade (direct form II transposed, zero
// initial conditions).
inline void sos_filter_inplace(const FilterSpec& spec, std::vector<double>& x) {
  for (const auto& s : spec.sections) {
    double s1 = 0.0, s2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + s1;
      s1 = s.b1 * in - s.a1 * out + s2;
      s2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

// Zero-phase filtering: odd-reflection padding of 3x the total filter order
// at both ends, forward pass, reverse, forward pass again, reverse, trim.
// The two passes cancel the phase response and double the stop-band
// attenuation in dB.
inline std::vector<double> filtfilt(const FilterSpec& spec,
                                    std::span<const double> x) {
  const int total_order = 2 * static_cast<int>(spec.sections.size());
  const int padlen = 3 * total_order;
  const std::size_t min_len = 3 * static_cast<std::size_t>(spec.state_length());
  if (x.size() <= min_len)
    throw ShapeError("filtfilt input length " + std::to_string(x.size()) +
                     " too short; need more than " + std::to_string(min_len) +
                     " samples");

  const std::size_t n = x.size();
  std::vector<double> buf(n + 2 * padlen);
  // odd reflection: 2*x[edge] - x[mirrored]
  for (int i = 0; i < padlen; ++i)
    buf[i] = 2.0 * x[0] - x[padlen - i];
  std::copy(x.begin(), x.end(), buf.begin() + padlen);
  for (int i = 0; i < padlen; ++i)
    buf[padlen + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  sos_filter_inplace(spec, buf);
  std::reverse(buf.begin(), buf.end());
  sos_filter_inplace(spec, buf);
  std::reverse(buf.begin(), buf.end());

  return std::vector<double>(buf.begin() + padlen, buf.begin() + padlen + n);
}

inline std::vector<float> filtfilt(const FilterSpec& spec,
                                   std::span<const float> x) {
  std::vector<double> xd(x.begin(), x.end());
  std::vector<double> yd = filtfilt(spec, std::span<const double>(xd));
  return std::vector<float>(yd.begin(), yd.end());
}

}  // namespace somnilex
