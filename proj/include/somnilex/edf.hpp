#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/recording.hpp"

namespace somnilex {

// Reader/writer for the EDF subset used by the ingestion pipeline:
// 256-byte ASCII global header, 256 bytes of per-signal header fields per
// signal (field-major, in standard EDF order: 16/80/8/8/8/8/8/80/8/32), and
// data records of 16-bit little-endian two's-complement samples. EDF+
// annotations and discontinuous records are out of scope.

struct EdfSignal {
  std::string label;          // trimmed of trailing spaces
  std::string transducer;
  std::string physical_dim;
  double physical_min = 0.0;
  double physical_max = 0.0;
  int digital_min = 0;
  int digital_max = 0;
  std::string prefiltering;
  int samples_per_record = 0;

  double gain() const {
    return (physical_max - physical_min) /
           (static_cast<double>(digital_max) - digital_min);
  }
};

struct EdfData {
  std::string version;
  std::string patient_id;
  std::string recording_id;
  std::string start_date;
  std::string start_time;
  int num_records = 0;
  double record_seconds = 0.0;
  std::vector<EdfSignal> signals;
  std::vector<std::vector<std::int16_t>> digital;  // [signal][sample]

  std::vector<float> physical(int sig) const {
    const EdfSignal& s = signals.at(sig);
    const double g = s.gain();
    std::vector<float> out;
    out.reserve(digital[sig].size());
    for (std::int16_t d : digital[sig])
      out.push_back(static_cast<float>(g * (d - s.digital_min) +
                                       s.physical_min));
    return out;
  }

  int sample_rate(int sig) const {
    const double r = signals.at(sig).samples_per_record / record_seconds;
    return static_cast<int>(r + 0.5);
  }

  Recording to_recording(const std::string& subject_id) const {
    Recording rec;
    rec.subject_id = subject_id;
    rec.sample_rate_hz = signals.empty() ? 0 : sample_rate(0);
    for (std::size_t i = 0; i < signals.size(); ++i)
      rec.channels.push_back({signals[i].label, physical(static_cast<int>(i))});
    return rec;
  }
};

namespace edf_detail {

inline constexpr int kGlobalHeaderBytes = 256;
inline constexpr int kPerSignalHeaderBytes = 256;

inline std::string rtrim(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
  return s;
}

inline void check_ascii(const std::string& field, std::int64_t offset) {
  for (std::size_t i = 0; i < field.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(field[i]);
    if (c < 0x20 || c > 0x7e)
      throw ParseError("EDF header: non-ASCII byte 0x" +
                           [&] {
                             char buf[8];
                             std::snprintf(buf, sizeof buf, "%02x", c);
                             return std::string(buf);
                           }() +
                           " at byte offset " +
                           std::to_string(offset + static_cast<std::int64_t>(i)),
                       offset + static_cast<std::int64_t>(i));
  }
}

inline std::string take(const std::string& raw, std::size_t& pos, int len) {
  std::string field = raw.substr(pos, len);
  check_ascii(field, static_cast<std::int64_t>(pos));
  pos += len;
  return field;
}

inline double parse_num(const std::string& field, std::int64_t offset,
                        const char* what) {
  const std::string t = rtrim(field);
  try {
    std::size_t used = 0;
    const std::string lt = [&] {
      std::string s = t;
      std::size_t b = s.find_first_not_of(' ');
      return b == std::string::npos ? std::string() : s.substr(b);
    }();
    double v = std::stod(lt, &used);
    if (used != lt.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("EDF header: cannot parse ") + what +
                         " from \"" + t + "\" at byte offset " +
                         std::to_string(offset),
                     offset);
  }
}

inline std::string fixed_field(const std::string& value, int width,
                               const char* what) {
  if (static_cast<int>(value.size()) > width)
    throw IoError(std::string("EDF field ") + what + " value \"" + value +
                  "\" exceeds " + std::to_string(width) + " bytes");
  check_ascii(value, -1);
  std::string out = value;
  out.resize(width, ' ');
  return out;
}

inline std::string fixed_num(double v, int width, const char* what) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return fixed_field(buf, width, what);
}

}  // namespace edf_detail

inline EdfData read_edf(const std::string& path) {
  using namespace edf_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open EDF file: " + path);
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());

  if (contents.size() < kGlobalHeaderBytes)
    throw ParseError("EDF file shorter than the 256-byte global header (" +
                         std::to_string(contents.size()) + " bytes)",
                     static_cast<std::int64_t>(contents.size()));

  EdfData edf;
  std::size_t pos = 0;
  edf.version = rtrim(take(contents, pos, 8));
  edf.patient_id = rtrim(take(contents, pos, 80));
  edf.recording_id = rtrim(take(contents, pos, 80));
  edf.start_date = rtrim(take(contents, pos, 8));
  edf.start_time = rtrim(take(contents, pos, 8));
  const std::string header_bytes_field = take(contents, pos, 8);
  pos += 44;  // reserved
  const std::string num_records_field = take(contents, pos, 8);    // bytes 236-244
  const std::string record_dur_field = take(contents, pos, 8);     // bytes 244-252
  const std::string num_signals_field = take(contents, pos, 4);    // bytes 252-256

  const int declared_header_bytes =
      static_cast<int>(parse_num(header_bytes_field, 184, "header byte count"));
  edf.num_records =
      static_cast<int>(parse_num(num_records_field, 236, "record count"));
  edf.record_seconds = parse_num(record_dur_field, 244, "record duration");
  const int ns =
      static_cast<int>(parse_num(num_signals_field, 252, "signal count"));
  if (ns <= 0)
    throw ParseError("EDF header declares " + std::to_string(ns) +
                         " signals at byte offset 252",
                     252);
  if (edf.record_seconds <= 0)
    throw ParseError("EDF header declares non-positive record duration", 244);

  const std::size_t header_total =
      kGlobalHeaderBytes +
      static_cast<std::size_t>(ns) * kPerSignalHeaderBytes;
  if (declared_header_bytes != static_cast<int>(header_total))
    throw ParseError("EDF header byte count " +
                         std::to_string(declared_header_bytes) +
                         " does not match 256*(1+ns)=" +
                         std::to_string(header_total),
                     184);
  if (contents.size() < header_total)
    throw ParseError("EDF file truncated inside the per-signal header region",
                     static_cast<std::int64_t>(contents.size()));

  // Per-signal fields are stored field-major: all labels, all transducers, ...
  edf.signals.resize(ns);
  auto field_block = [&](int width) {
    std::vector<std::string> fields(ns);
    for (int i = 0; i < ns; ++i) fields[i] = take(contents, pos, width);
    return fields;
  };
  const auto labels = field_block(16);
  const auto transducers = field_block(80);
  const auto dims = field_block(8);
  const auto pmins = field_block(8);
  const auto pmaxs = field_block(8);
  const auto dmins = field_block(8);
  const auto dmaxs = field_block(8);
  const auto prefs = field_block(80);
  const auto sprs = field_block(8);
  field_block(32);  // reserved

  std::size_t record_bytes = 0;
  for (int i = 0; i < ns; ++i) {
    EdfSignal& s = edf.signals[i];
    s.label = rtrim(labels[i]);
    s.transducer = rtrim(transducers[i]);
    s.physical_dim = rtrim(dims[i]);
    s.physical_min = parse_num(pmins[i], 256 + 16LL * ns + 80LL * ns + 8LL * i,
                               "physical minimum");
    s.physical_max = parse_num(pmaxs[i], -1, "physical maximum");
    s.digital_min = static_cast<int>(parse_num(dmins[i], -1, "digital minimum"));
    s.digital_max = static_cast<int>(parse_num(dmaxs[i], -1, "digital maximum"));
    s.prefiltering = rtrim(prefs[i]);
    s.samples_per_record =
        static_cast<int>(parse_num(sprs[i], -1, "samples per record"));
    if (s.digital_min == s.digital_max)
      throw ParseError("EDF signal \"" + s.label +
                       "\": digital_min equals digital_max, scaling undefined");
    if (s.samples_per_record <= 0)
      throw ParseError("EDF signal \"" + s.label +
                       "\": non-positive samples per record");
    record_bytes += static_cast<std::size_t>(s.samples_per_record) * 2;
  }

  const std::size_t data_bytes = contents.size() - header_total;
  const std::size_t available_records = data_bytes / record_bytes;
  if (available_records < static_cast<std::size_t>(edf.num_records))
    throw ParseError(
        "EDF file truncated: header declares " +
            std::to_string(edf.num_records) + " data records but record " +
            std::to_string(available_records) + " is incomplete",
        -1, static_cast<std::int64_t>(available_records));

  edf.digital.resize(ns);
  for (int i = 0; i < ns; ++i)
    edf.digital[i].reserve(static_cast<std::size_t>(edf.num_records) *
                           edf.signals[i].samples_per_record);
  const unsigned char* raw =
      reinterpret_cast<const unsigned char*>(contents.data()) + header_total;
  for (int r = 0; r < edf.num_records; ++r) {
    for (int i = 0; i < ns; ++i) {
      for (int k = 0; k < edf.signals[i].samples_per_record; ++k) {
        const std::uint16_t lo = *raw++;
        const std::uint16_t hi = *raw++;
        edf.digital[i].push_back(
            static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8))));
      }
    }
  }
  return edf;
}

struct EdfWriteOptions {
  double physical_min = -1000.0;  // microvolts
  double physical_max = 1000.0;
  int digital_min = -32768;
  int digital_max = 32767;
  double record_seconds = 1.0;
  std::string physical_dim = "uV";
};

// Writes a Recording as EDF. Returns the quantized digital samples actually
// written, so callers can verify bit-exact recovery on read-back.
inline std::vector<std::vector<std::int16_t>> write_edf(
    const Recording& rec, const std::string& path,
    const EdfWriteOptions& opt = {}) {
  using namespace edf_detail;
  rec.validate();
  if (rec.channels.empty()) throw IoError("write_edf: recording has no channels");
  const int spr =
      static_cast<int>(rec.sample_rate_hz * opt.record_seconds + 0.5);
  if (spr <= 0) throw IoError("write_edf: record duration too short");
  const std::size_t n = rec.num_samples();
  if (n % spr != 0)
    throw IoError("write_edf: channel length " + std::to_string(n) +
                  " is not a whole number of " + std::to_string(spr) +
                  "-sample records");
  const int num_records = static_cast<int>(n / spr);
  const int ns = static_cast<int>(rec.channels.size());
  const double gain = (opt.physical_max - opt.physical_min) /
                      (static_cast<double>(opt.digital_max) - opt.digital_min);

  // Quantize first so errors surface before any bytes are written.
  std::vector<std::vector<std::int16_t>> digital(ns);
  for (int i = 0; i < ns; ++i) {
    const auto& ch = rec.channels[i];
    digital[i].reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double v = ch.samples[k];
      if (v < opt.physical_min || v > opt.physical_max)
        throw IoError("write_edf: amplitude " + std::to_string(v) +
                      " outside declared physical range on channel " + ch.name +
                      " at sample " + std::to_string(k));
      const double d = std::nearbyint((v - opt.physical_min) / gain +
                                      opt.digital_min);
      digital[i].push_back(static_cast<std::int16_t>(d));
    }
  }

  std::string header;
  header += fixed_field("0", 8, "version");
  header += fixed_field(rec.subject_id, 80, "patient id");
  header += fixed_field("Startdate 01.01.01", 80, "recording id");
  header += fixed_field("01.01.01", 8, "start date");
  header += fixed_field("00.00.00", 8, "start time");
  header += fixed_num(256.0 * (1 + ns), 8, "header bytes");
  header += std::string(44, ' ');
  header += fixed_num(num_records, 8, "record count");
  header += fixed_num(opt.record_seconds, 8, "record duration");
  header += fixed_num(ns, 4, "signal count");

  auto field_block = [&](int width, auto&& fn) {
    for (int i = 0; i < ns; ++i) header += fn(i, width);
  };
  field_block(16, [&](int i, int w) {
    return fixed_field(rec.channels[i].name, w, "channel label");
  });
  field_block(80, [&](int, int w) { return fixed_field("", w, "transducer"); });
  field_block(8, [&](int, int w) {
    return fixed_field(opt.physical_dim, w, "physical dimension");
  });
  field_block(8, [&](int, int w) {
    return fixed_num(opt.physical_min, w, "physical minimum");
  });
  field_block(8, [&](int, int w) {
    return fixed_num(opt.physical_max, w, "physical maximum");
  });
  field_block(8, [&](int, int w) {
    return fixed_num(opt.digital_min, w, "digital minimum");
  });
  field_block(8, [&](int, int w) {
    return fixed_num(opt.digital_max, w, "digital maximum");
  });
  field_block(80, [&](int, int w) { return fixed_field("", w, "prefiltering"); });
  field_block(8, [&](int, int w) {
    return fixed_num(spr, w, "samples per record");
  });
  field_block(32, [&](int, int w) { return fixed_field("", w, "reserved"); });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<char> buf;
  buf.reserve(static_cast<std::size_t>(ns) * spr * 2);
  for (int r = 0; r < num_records; ++r) {
    buf.clear();
    for (int i = 0; i < ns; ++i) {
      for (int k = 0; k < spr; ++k) {
        const std::uint16_t u = static_cast<std::uint16_t>(
            digital[i][static_cast<std::size_t>(r) * spr + k]);
        buf.push_back(static_cast<char>(u & 0xff));
        buf.push_back(static_cast<char>((u >> 8) & 0xff));
      }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("write failure on " + path);
  return digital;
}

}  // namespace somnilex
