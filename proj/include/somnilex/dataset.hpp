#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/recording.hpp"

namespace somnilex {

// Native dataset layout: one directory per subject containing
//   header.txt   human-readable key:value metadata
//   <NAME>.f32   raw little-endian 32-bit float samples, one file per channel
//   labels.u8    one byte per epoch, stage index 0-4
// Channel sample counts are exactly epoch_count * 3000.

struct SubjectRecord {
  Recording recording;
  Hypnogram hypnogram;
  bool filtered = false;  // band-pass already applied?
};

namespace dataset_detail {

inline void write_f32_le(std::ofstream& out, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * 4));
  } else {
    for (float f : v) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      char b[4] = {static_cast<char>(u), static_cast<char>(u >> 8),
                   static_cast<char>(u >> 16), static_cast<char>(u >> 24)};
      out.write(b, 4);
    }
  }
}

inline std::vector<float> read_f32_le(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open channel file: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (raw.size() % 4 != 0)
    throw ParseError("channel file " + path + " size " +
                     std::to_string(raw.size()) + " is not a multiple of 4");
  std::vector<float> v(raw.size() / 4);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(v.data(), raw.data(), raw.size());
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto* b = reinterpret_cast<const unsigned char*>(raw.data() + 4 * i);
      std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) |
                        (static_cast<std::uint32_t>(b[3]) << 24);
      std::memcpy(&v[i], &u, 4);
    }
  }
  return v;
}

}  // namespace dataset_detail

inline void write_native_subject(const std::filesystem::path& dir,
                                 const SubjectRecord& subj) {
  namespace fs = std::filesystem;
  subj.recording.validate();
  const std::size_t expect =
      static_cast<std::size_t>(subj.hypnogram.labels.size()) * kEpochSamples;
  if (subj.recording.num_samples() != expect)
    throw ShapeError("subject " + subj.recording.subject_id + ": " +
                     std::to_string(subj.hypnogram.labels.size()) +
                     " labels require " + std::to_string(expect) +
                     " samples per channel, got " +
                     std::to_string(subj.recording.num_samples()));
  fs::create_directories(dir);

  std::ofstream hdr(dir / "header.txt");
  if (!hdr) throw IoError("cannot write " + (dir / "header.txt").string());
  hdr << "somnilex-dataset: 1\n";
  hdr << "subject_id: " << subj.recording.subject_id << "\n";
  hdr << "sample_rate_hz: " << subj.recording.sample_rate_hz << "\n";
  hdr << "epoch_count: " << subj.hypnogram.labels.size() << "\n";
  hdr << "filtered: " << (subj.filtered ? 1 : 0) << "\n";
  hdr << "channels:";
  for (const auto& c : subj.recording.channels) hdr << " " << c.name;
  hdr << "\n";

  for (const auto& c : subj.recording.channels) {
    std::ofstream ch(dir / (c.name + ".f32"), std::ios::binary);
    if (!ch) throw IoError("cannot write channel file for " + c.name);
    dataset_detail::write_f32_le(ch, c.samples);
  }
  std::ofstream lab(dir / "labels.u8", std::ios::binary);
  for (Stage s : subj.hypnogram.labels)
    lab.put(static_cast<char>(static_cast<std::uint8_t>(s)));
}

inline SubjectRecord read_native_subject(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::ifstream hdr(dir / "header.txt");
  if (!hdr) throw IoError("cannot open " + (dir / "header.txt").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(hdr, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    std::string val = line.substr(colon + 1);
    const auto b = val.find_first_not_of(' ');
    kv[key] = b == std::string::npos ? "" : val.substr(b);
  }
  for (const char* req : {"subject_id", "sample_rate_hz", "epoch_count", "channels"})
    if (!kv.count(req))
      throw ParseError("dataset header " + (dir / "header.txt").string() +
                       " missing key: " + req);

  SubjectRecord subj;
  subj.recording.subject_id = kv["subject_id"];
  subj.recording.sample_rate_hz = std::stoi(kv["sample_rate_hz"]);
  subj.filtered = kv.count("filtered") && kv["filtered"] == "1";
  const std::size_t epoch_count = std::stoul(kv["epoch_count"]);

  std::istringstream chs(kv["channels"]);
  std::string name;
  while (chs >> name) {
    Channel c;
    c.name = name;
    c.samples = dataset_detail::read_f32_le((dir / (name + ".f32")).string());
    subj.recording.channels.push_back(std::move(c));
  }
  subj.recording.validate();

  std::ifstream lab(dir / "labels.u8", std::ios::binary);
  if (!lab) throw IoError("cannot open " + (dir / "labels.u8").string());
  std::string raw((std::istreambuf_iterator<char>(lab)),
                  std::istreambuf_iterator<char>());
  if (raw.size() != epoch_count)
    throw ParseError("label file has " + std::to_string(raw.size()) +
                     " entries, header declares " + std::to_string(epoch_count));
  for (char c : raw)
    subj.hypnogram.labels.push_back(stage_from_index(static_cast<int>(
        static_cast<unsigned char>(c))));

  const std::size_t expect = epoch_count * kEpochSamples;
  if (subj.recording.num_samples() != expect)
    throw ParseError("subject " + subj.recording.subject_id + ": channels hold " +
                     std::to_string(subj.recording.num_samples()) +
                     " samples, header implies " + std::to_string(expect));
  return subj;
}

inline std::vector<std::filesystem::path> list_native_subjects(
    const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw IoError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "header.txt"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw IoError("no subjects found under dataset root " + root.string());
  return dirs;
}

inline std::vector<SubjectRecord> read_native_dataset(
    const std::filesystem::path& root) {
  std::vector<SubjectRecord> out;
  for (const auto& dir : list_native_subjects(root))
    out.push_back(read_native_subject(dir));
  return out;
}

inline void write_native_dataset(const std::filesystem::path& root,
                                 const std::vector<SubjectRecord>& subjects) {
  for (const auto& s : subjects)
    write_native_subject(root / s.recording.subject_id, s);
}

}  // namespace somnilex
