#ifndef SSRC_IO_HPP
#define SSRC_IO_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssrc/metrics.hpp"
#include "ssrc/nn.hpp"
#include "ssrc/types.hpp"

namespace ssrc {

// ---------------------------------------------------------------------------
// Container: magic "SSRC", u16 LE version, then sections of
//   tag (4 bytes) + u64 LE payload length + payload.
// Numeric payloads are little-endian float64, row-major, complex interleaved.
// Unknown sections are skipped with a warning, never fatal.
// ---------------------------------------------------------------------------

constexpr uint16_t kContainerVersion = 1;

struct Section {
  std::array<char, 4> tag{};
  std::vector<uint8_t> payload;

  std::string tag_str() const { return std::string(tag.data(), 4); }
};

inline Section make_section(const char* tag, std::vector<uint8_t> payload) {
  Section s;
  std::memcpy(s.tag.data(), tag, 4);
  s.payload = std::move(payload);
  return s;
}

namespace wire {

inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(uint8_t(v & 0xff));
  b.push_back(uint8_t(v >> 8));
}
inline void put_u64(std::vector<uint8_t>& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(uint8_t((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::vector<uint8_t>& b, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(b, bits);
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    if (pos + n > buf.size()) throw std::runtime_error(std::string("truncated ") + what);
  }
  uint16_t u16(const char* what = "field") {
    need(2, what);
    uint16_t v = uint16_t(buf[pos]) | (uint16_t(buf[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  uint64_t u64(const char* what = "field") {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64(const char* what = "field") {
    uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace wire

inline void container_save(const std::string& path, const std::vector<Section>& sections) {
  std::vector<uint8_t> out;
  out.push_back('S');
  out.push_back('S');
  out.push_back('R');
  out.push_back('C');
  wire::put_u16(out, kContainerVersion);
  for (const Section& s : sections) {
    for (char c : s.tag) out.push_back(uint8_t(c));
    wire::put_u64(out, s.payload.size());
    out.insert(out.end(), s.payload.begin(), s.payload.end());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("container_save: cannot open " + path);
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw std::runtime_error("container_save: write failed for " + path);
}

struct ContainerData {
  std::vector<Section> sections;
  std::vector<std::string> warnings;

  const Section* find(const std::string& tag) const {
    for (const Section& s : sections)
      if (s.tag_str() == tag) return &s;
    return nullptr;
  }
};

inline const std::vector<std::string>& known_tags() {
  static const std::vector<std::string> tags = {"KSPC", "MASK", "MAPS", "IMG ", "PRM ", "META"};
  return tags;
}

inline ContainerData container_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("container_load: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 6 || buf[0] != 'S' || buf[1] != 'S' || buf[2] != 'R' || buf[3] != 'C')
    throw std::runtime_error("container_load: bad magic in " + path);
  uint16_t version = uint16_t(buf[4]) | (uint16_t(buf[5]) << 8);
  if (version > kContainerVersion)
    throw std::runtime_error("container_load: version " + std::to_string(version) +
                             " newer than reader");

  ContainerData out;
  size_t pos = 6;
  while (pos < buf.size()) {
    if (pos + 12 > buf.size())
      throw std::runtime_error("container_load: truncated section header");
    Section s;
    std::memcpy(s.tag.data(), &buf[pos], 4);
    pos += 4;
    uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= uint64_t(buf[pos + i]) << (8 * i);
    pos += 8;
    if (pos + len > buf.size())
      throw std::runtime_error("container_load: truncated section " + s.tag_str());
    s.payload.assign(buf.begin() + pos, buf.begin() + pos + len);
    pos += len;
    bool known = false;
    for (const auto& t : known_tags())
      if (t == s.tag_str()) known = true;
    if (!known)
      out.warnings.push_back("skipping unknown section " + s.tag_str());
    else
      out.sections.push_back(std::move(s));
  }
  return out;
}

// ---- typed encoders ----

inline std::vector<uint8_t> encode_image(const ComplexImage& img) {
  std::vector<uint8_t> b;
  wire::put_u64(b, uint64_t(img.height));
  wire::put_u64(b, uint64_t(img.width));
  for (const cplx& z : img.data) {
    wire::put_f64(b, z.real());
    wire::put_f64(b, z.imag());
  }
  return b;
}

inline ComplexImage decode_image(const std::vector<uint8_t>& payload) {
  wire::Reader r{payload};
  int h = int(r.u64("IMG height")), w = int(r.u64("IMG width"));
  ComplexImage img(h, w);
  for (cplx& z : img.data) {
    double re = r.f64("IMG data"), im = r.f64("IMG data");
    z = cplx(re, im);
  }
  return img;
}

inline std::vector<uint8_t> encode_kspace(const MultiCoilKSpace& k) {
  std::vector<uint8_t> b;
  wire::put_u64(b, uint64_t(k.num_coils));
  wire::put_u64(b, uint64_t(k.height));
  wire::put_u64(b, uint64_t(k.width));
  wire::put_f64(b, k.noise_sigma);
  for (const auto& coil : k.data)
    for (const cplx& z : coil) {
      wire::put_f64(b, z.real());
      wire::put_f64(b, z.imag());
    }
  return b;
}

inline MultiCoilKSpace decode_kspace(const std::vector<uint8_t>& payload) {
  wire::Reader r{payload};
  int nc = int(r.u64("KSPC coils")), h = int(r.u64("KSPC height")), w = int(r.u64("KSPC width"));
  MultiCoilKSpace k(nc, h, w);
  k.noise_sigma = r.f64("KSPC sigma");
  for (auto& coil : k.data)
    for (cplx& z : coil) {
      double re = r.f64("KSPC data"), im = r.f64("KSPC data");
      z = cplx(re, im);
    }
  return k;
}

inline std::vector<uint8_t> encode_mask(const SamplingMask& m) {
  std::vector<uint8_t> b;
  wire::put_u64(b, uint64_t(m.height));
  wire::put_u64(b, uint64_t(m.width));
  wire::put_u64(b, uint64_t(m.acs.half_rows));
  wire::put_u64(b, uint64_t(m.acs.half_cols));
  for (uint8_t v : m.values) wire::put_f64(b, double(v));
  return b;
}

inline SamplingMask decode_mask(const std::vector<uint8_t>& payload) {
  wire::Reader r{payload};
  int h = int(r.u64("MASK height")), w = int(r.u64("MASK width"));
  SamplingMask m(h, w);
  m.acs.half_rows = int(r.u64("MASK acs"));
  m.acs.half_cols = int(r.u64("MASK acs"));
  for (uint8_t& v : m.values) v = uint8_t(r.f64("MASK data"));
  return m;
}

inline std::vector<uint8_t> encode_maps(const SensitivityMaps& s) {
  std::vector<uint8_t> b;
  wire::put_u64(b, uint64_t(s.num_coils));
  wire::put_u64(b, uint64_t(s.height));
  wire::put_u64(b, uint64_t(s.width));
  for (uint8_t v : s.support) wire::put_f64(b, double(v));
  for (const auto& coil : s.data)
    for (const cplx& z : coil) {
      wire::put_f64(b, z.real());
      wire::put_f64(b, z.imag());
    }
  return b;
}

inline SensitivityMaps decode_maps(const std::vector<uint8_t>& payload) {
  wire::Reader r{payload};
  int nc = int(r.u64("MAPS coils")), h = int(r.u64("MAPS height")), w = int(r.u64("MAPS width"));
  SensitivityMaps s(nc, h, w);
  for (uint8_t& v : s.support) v = uint8_t(r.f64("MAPS support"));
  for (auto& coil : s.data)
    for (cplx& z : coil) {
      double re = r.f64("MAPS data"), im = r.f64("MAPS data");
      z = cplx(re, im);
    }
  return s;
}

inline std::vector<uint8_t> encode_params(const NetworkParams& p) {
  std::vector<uint8_t> b;
  wire::put_u64(b, p.fingerprint);
  wire::put_u64(b, p.params.size());
  for (const auto& [name, t] : p.params) {
    wire::put_u64(b, name.size());
    b.insert(b.end(), name.begin(), name.end());
    wire::put_u64(b, t.shape.size());
    for (int d : t.shape) wire::put_u64(b, uint64_t(d));
    for (double v : t.data) wire::put_f64(b, v);
  }
  return b;
}

inline NetworkParams decode_params(const std::vector<uint8_t>& payload) {
  wire::Reader r{payload};
  NetworkParams p;
  p.fingerprint = r.u64("PRM fingerprint");
  uint64_t n = r.u64("PRM count");
  for (uint64_t i = 0; i < n; ++i) {
    uint64_t len = r.u64("PRM name");
    r.need(len, "PRM name");
    std::string name(reinterpret_cast<const char*>(&payload[r.pos]), len);
    r.pos += len;
    uint64_t nd = r.u64("PRM dims");
    std::vector<int> shape;
    for (uint64_t d = 0; d < nd; ++d) shape.push_back(int(r.u64("PRM dims")));
    ad::Tensor t(shape);
    for (double& v : t.data) v = r.f64("PRM data");
    p.add(name, std::move(t));
  }
  return p;
}

// META: UTF-8 key=value lines
inline std::vector<uint8_t> encode_meta(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return std::vector<uint8_t>(s.begin(), s.end());
}

inline std::vector<std::pair<std::string, std::string>> decode_meta(
    const std::vector<uint8_t>& payload) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::string s(payload.begin(), payload.end());
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return kv;
}

// ---- image and table export ----

// 16-bit PGM with linear windowing [lo, hi] -> [0, 65535], clamped.
inline void export_pgm(const RealImage& img, const std::string& path, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("export_pgm: need lo < hi");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("export_pgm: cannot open " + path);
  f << "P5\n" << img.width << " " << img.height << "\n65535\n";
  for (double v : img.data) {
    double t = (v - lo) / (hi - lo);
    int q = int(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
    f.put(char((q >> 8) & 0xff));  // PGM 16-bit samples are big-endian
    f.put(char(q & 0xff));
  }
  if (!f) throw std::runtime_error("export_pgm: write failed for " + path);
}

// RFC-4180 quoting
inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i)
    f << (i ? "," : "") << csv_escape(header[i]);
  f << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << csv_escape(row[i]);
    f << "\n";
  }
  if (!f) throw std::runtime_error("write_csv: write failed for " + path);
}

inline uint64_t file_fnv1a(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("file_fnv1a: cannot open " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (f.get(c)) {
    h ^= uint8_t(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ssrc

#endif
