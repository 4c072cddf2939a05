#pragma once

#include <numeric>
#include <span>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/filters.hpp"

namespace somnilex {

// Halves the sample rate of a 200 Hz signal: zero-phase anti-alias filtering
// followed by taking every second sample. The caller supplies the anti-alias
// FilterSpec (the standard 0.5-49.9 Hz band-pass designed at fs=200 in the
// pipeline). The band-pass has zero gain at DC, so the signal mean is
// removed before filtering and restored after decimation; the operation
// stays exactly linear and preserves constants.
inline std::vector<float> resample_half(std::span<const float> signal,
                                        const FilterSpec& antialias,
                                        int input_rate_hz = 200) {
  if (input_rate_hz != 200)
    throw ConfigError("resample_half expects a 200 Hz input, got " +
                      std::to_string(input_rate_hz) + " Hz");
  std::vector<double> x(signal.begin(), signal.end());
  if (x.size() % 2 != 0) x.pop_back();  // trim to even length
  const double mean =
      x.empty() ? 0.0
                : std::accumulate(x.begin(), x.end(), 0.0) /
                      static_cast<double>(x.size());
  for (double& v : x) v -= mean;
  std::vector<double> filtered = filtfilt(antialias, std::span<const double>(x));
  std::vector<float> out;
  out.reserve(filtered.size() / 2);
  for (std::size_t i = 0; i < filtered.size(); i += 2)
    out.push_back(static_cast<float>(filtered[i] + mean));
  return out;
}

}  // namespace somnilex
