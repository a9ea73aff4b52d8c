#include "copho/serialize.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "copho/errors.hpp"

namespace copho {

namespace {

constexpr char kModelMagic[9] = "COPHOMDL";
constexpr char kScheduleMagic[9] = "COPHOSCH";
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void put_u8(std::string& s, std::uint8_t v) { s.push_back(static_cast<char>(v)); }

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i32(std::string& s, std::int32_t v) { put_u32(s, static_cast<std::uint32_t>(v)); }

void put_f64(std::string& s, double v) { put_u64(s, std::bit_cast<std::uint64_t>(v)); }

void put_matrix(std::string& s, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(s, m(r, c));
  }
}

void put_vector(std::string& s, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(s, v(i));
}

class Cursor {
 public:
  explicit Cursor(const std::string& bytes) : s_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(s_[pos_++]);
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(s_[pos_++])) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(s_[pos_++])) << (8 * i);
    return v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  void fill(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
  }

  void fill(Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
  }

  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t k) const {
    if (pos_ + k > s_.size()) throw FormatError("serialized payload is truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

void write_container(const std::string& path, const char magic[9], const std::string& payload) {
  std::string file;
  file.reserve(payload.size() + 28);
  file.append(magic, 8);
  put_u32(file, kVersion);
  put_u64(file, payload.size());
  file += payload;
  put_u64(file, fnv1a(file));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(file.data(), static_cast<std::streamsize>(file.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

std::string read_container(const std::string& path, const char magic[9]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string file = buf.str();
  if (file.size() < 28) throw FormatError("'" + path + "': file too short for its container");
  if (file.compare(0, 8, magic, 8) != 0) {
    throw FormatError("'" + path + "': unrecognized magic bytes");
  }
  Cursor header(file);
  for (int i = 0; i < 8; ++i) header.u8();  // magic
  const std::uint32_t version = header.u32();
  if (version != kVersion) {
    throw FormatError("'" + path + "': unsupported format version " + std::to_string(version));
  }
  const std::uint64_t len = header.u64();
  if (file.size() != 28 + len) {
    throw FormatError("'" + path + "': payload length does not match the file size");
  }
  const std::string body = file.substr(0, file.size() - 8);
  Cursor tail(file.substr(file.size() - 8));
  if (fnv1a(body) != tail.u64()) throw FormatError("'" + path + "': checksum mismatch");
  return file.substr(20, len);
}

void check_dim(int v, int lo, int hi, const char* what) {
  if (v < lo || v > hi) {
    throw FormatError(std::string("serialized ") + what + " out of range: " + std::to_string(v));
  }
}

}  // namespace

void save_model(const std::string& path, const MpnnModel& m) {
  m.config.validate();
  std::string p;
  put_i32(p, m.config.layers);
  put_i32(p, m.config.hidden);
  put_i32(p, m.config.node_classes);
  put_i32(p, m.config.edge_classes);
  put_i32(p, m.config.time_dim);
  put_u8(p, m.config.marker_channels ? 1 : 0);
  put_u8(p, m.config.head == MpnnConfig::Head::Denoiser ? 1 : 0);
  for (int l = 0; l < m.config.layers; ++l) {
    put_matrix(p, m.w.w_self[l]);
    for (const Matrix& wm : m.w.w_msg[l]) put_matrix(p, wm);
    put_vector(p, m.w.bias[l]);
  }
  put_vector(p, m.w.w_out);
  put_f64(p, m.w.b_out);
  put_matrix(p, m.w.w_node);
  put_vector(p, m.w.b_node);
  put_matrix(p, m.w.w_edge);
  put_vector(p, m.w.b_edge);
  write_container(path, kModelMagic, p);
}

MpnnModel load_model(const std::string& path) {
  const std::string p = read_container(path, kModelMagic);
  Cursor c(p);
  MpnnConfig cfg;
  cfg.layers = c.i32();
  cfg.hidden = c.i32();
  cfg.node_classes = c.i32();
  cfg.edge_classes = c.i32();
  cfg.time_dim = c.i32();
  check_dim(cfg.layers, 1, 256, "layer count");
  check_dim(cfg.hidden, 1, 65536, "hidden width");
  check_dim(cfg.node_classes, 1, 4096, "node class count");
  check_dim(cfg.edge_classes, 1, 4096, "edge class count");
  check_dim(cfg.time_dim, 0, 65536, "time embedding width");
  const std::uint8_t markers = c.u8();
  const std::uint8_t head = c.u8();
  if (markers > 1) throw FormatError("serialized marker flag out of range");
  if (head > 1) throw FormatError("serialized head tag out of range");
  cfg.marker_channels = markers == 1;
  cfg.head = head == 1 ? MpnnConfig::Head::Denoiser : MpnnConfig::Head::Regression;
  cfg.validate();

  MpnnModel m = make_zero_model(cfg);
  for (int l = 0; l < cfg.layers; ++l) {
    c.fill(m.w.w_self[l]);
    for (Matrix& wm : m.w.w_msg[l]) c.fill(wm);
    c.fill(m.w.bias[l]);
  }
  c.fill(m.w.w_out);
  m.w.b_out = c.f64();
  c.fill(m.w.w_node);
  c.fill(m.w.b_node);
  c.fill(m.w.w_edge);
  c.fill(m.w.b_edge);
  if (!c.done()) throw FormatError("'" + path + "': trailing bytes after the model weights");
  return m;
}

void save_schedule(const std::string& path, const NoiseSchedule& s) {
  if (s.T < 1 || s.beta.size() != s.T + 1) {
    throw std::invalid_argument("save_schedule: schedule is not fully built");
  }
  std::string p;
  put_i32(p, s.T);
  put_i32(p, s.a);
  put_i32(p, s.b);
  put_vector(p, s.beta);
  write_container(path, kScheduleMagic, p);
}

NoiseSchedule load_schedule(const std::string& path) {
  const std::string p = read_container(path, kScheduleMagic);
  Cursor c(p);
  const int T = c.i32();
  const int a = c.i32();
  const int b = c.i32();
  check_dim(T, 1, 1000000, "step count");
  check_dim(a, 1, 4096, "node class count");
  check_dim(b, 1, 4096, "edge class count");
  Vector beta(T + 1);
  c.fill(beta);
  if (!c.done()) throw FormatError("'" + path + "': trailing bytes after the beta sequence");
  return schedule_from_betas(T, a, b, beta);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace copho
