#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/recording.hpp"

namespace somnilex {

// Plain-text hypnogram comparison: one header line, one row per epoch
// (epoch_index, truth, predicted), and one agreement summary line. The
// columnar layout is meant for external plotting tools.
inline void export_hypnogram(const Hypnogram& truth, const Hypnogram& predicted,
                             const std::string& path) {
  if (truth.labels.size() != predicted.labels.size())
    throw ShapeError("export_hypnogram: truth has " +
                     std::to_string(truth.labels.size()) +
                     " epochs, prediction has " +
                     std::to_string(predicted.labels.size()));
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write hypnogram file: " + path);
  out << "epoch_index\ttruth\tpredicted\n";
  std::size_t agree = 0;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    out << i << "\t" << stage_name(truth.labels[i]) << "\t"
        << stage_name(predicted.labels[i]) << "\n";
    if (truth.labels[i] == predicted.labels[i]) ++agree;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "# agreement %zu/%zu = %.6f\n", agree,
                truth.labels.size(),
                truth.labels.empty()
                    ? 1.0
                    : static_cast<double>(agree) / truth.labels.size());
  out << buf;
  if (!out) throw IoError("write failure on hypnogram file: " + path);
}

}  // namespace somnilex
