#include "grelu/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string_view>

#include "grelu/data.hpp"
#include "grelu/error.hpp"

namespace grelu {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view m) { out_.write(m.data(), 4); }
  template <class T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void matrix(const Matrix& a) {
    out_.write(reinterpret_cast<const char*>(a.data()),
               static_cast<std::streamsize>(a.size() * sizeof(double)));
  }
  void bytes(const std::vector<unsigned char>& b) {
    out_.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }

 private:
  std::ostream& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in)
      : buf_(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return buf_.size() - pos_; }

  void magic(std::string_view m) {
    need(4);
    if (std::memcmp(buf_.data() + pos_, m.data(), 4) != 0) {
      throw FormatError("bad magic, expected " + std::string(m), pos_);
    }
    pos_ += 4;
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  // Reads rows*cols doubles after checking the file holds them all.
  Matrix matrix(std::size_t rows, std::size_t cols) {
    const std::uint64_t count = checked_count(rows, cols);
    need_elems(count, sizeof(double));
    Matrix a(rows, cols);
    std::memcpy(a.data(), buf_.data() + pos_, count * sizeof(double));
    for (std::size_t e = 0; e < count; ++e) {
      if (!std::isfinite(a.data()[e])) {
        throw FormatError("non-finite value", pos_ + e * sizeof(double));
      }
    }
    pos_ += count * sizeof(double);
    return a;
  }
  const unsigned char* take(std::size_t n) {
    need(n);
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
    pos_ += n;
    return p;
  }
  void expect_end() const {
    if (pos_ != buf_.size()) throw FormatError("trailing bytes", pos_);
  }
  void need_elems(std::uint64_t count, std::uint64_t width) const {
    if (count > remaining() / width) throw FormatError("truncated file", buf_.size());
  }

 private:
  void need(std::uint64_t n) const {
    if (n > remaining()) throw FormatError("truncated file", buf_.size());
  }
  std::uint64_t checked_count(std::uint64_t rows, std::uint64_t cols) const {
    if (cols != 0 && rows > UINT64_MAX / cols) throw FormatError("size overflow", pos_);
    return rows * cols;
  }

  std::string buf_;
  std::uint64_t pos_ = 0;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return f;
}

void finish(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw IoError("write failed for " + path);
}

void write_header(ByteWriter& w, const NetworkShape& s, std::uint32_t flags) {
  w.magic("GRNW");
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(flags);
  w.put<std::uint64_t>(s.d_x);
  w.put<std::uint64_t>(s.d_y);
  w.put<std::uint64_t>(s.m);
  w.put<std::uint64_t>(s.L);
}

}  // namespace

void write_network(const GReluNetwork& net, std::ostream& out) {
  ByteWriter w(out);
  write_header(w, net.shape(), 0);
  w.matrix(net.C());
  w.matrix(net.B());
  for (std::size_t k = 1; k <= net.shape().L; ++k) w.matrix(net.Psi(k));
  for (std::size_t k = 1; k <= net.shape().L; ++k) w.matrix(net.W(k));
}

void write_network(const ReluNetwork& net, std::ostream& out) {
  ByteWriter w(out);
  std::uint32_t flags = grnw::kNoPsi;
  if (net.readout() == ReadoutMode::Linear) flags |= grnw::kLinearReadout;
  write_header(w, net.shape(), flags);
  w.matrix(net.C());
  w.matrix(net.B());
  for (std::size_t k = 1; k <= net.shape().L; ++k) w.matrix(net.Wt(k));
}

Checkpoint read_checkpoint(std::istream& in) {
  ByteReader r(in);
  r.magic("GRNW");
  const std::uint64_t at_version = r.offset();
  if (r.get<std::uint32_t>() != 1) throw FormatError("unsupported version", at_version);
  const std::uint64_t at_flags = r.offset();
  const auto flags = r.get<std::uint32_t>();
  if (flags & ~(grnw::kNoPsi | grnw::kLinearReadout)) {
    throw FormatError("unknown flag bits", at_flags);
  }
  const bool relu = flags & grnw::kNoPsi;
  if (!relu && (flags & grnw::kLinearReadout)) {
    throw FormatError("linear readout flag without Psi-omitted flag", at_flags);
  }
  const std::uint64_t at_shape = r.offset();
  NetworkShape s;
  s.d_x = r.get<std::uint64_t>();
  s.d_y = r.get<std::uint64_t>();
  s.m = r.get<std::uint64_t>();
  s.L = r.get<std::uint64_t>();
  try {
    s.validate();
  } catch (const Error& e) {
    throw FormatError(e.what(), at_shape);
  }
  // Reject absurd shapes before any allocation.
  const std::uint64_t mm = s.m * s.m;
  if (s.m > (1ull << 31) || s.L > (1ull << 20) || mm / s.m != s.m) {
    throw FormatError("implausible shape", at_shape);
  }
  const std::uint64_t blocks = relu ? s.L : 2 * s.L;
  r.need_elems(s.m * s.d_x + s.d_y * s.m, sizeof(double));

  auto frozen = std::make_shared<FrozenLayers>();
  frozen->C = r.matrix(s.m, s.d_x);
  frozen->B = r.matrix(s.d_y, s.m);
  r.need_elems(blocks * mm, sizeof(double));
  if (!relu) {
    for (std::size_t k = 0; k < s.L; ++k) frozen->Psi.push_back(r.matrix(s.m, s.m));
  }
  std::vector<Matrix> weights;
  for (std::size_t k = 0; k < s.L; ++k) weights.push_back(r.matrix(s.m, s.m));
  r.expect_end();
  if (relu) {
    const ReadoutMode mode =
        (flags & grnw::kLinearReadout) ? ReadoutMode::Linear : ReadoutMode::Rectified;
    return ReluNetwork(s, std::move(frozen), std::move(weights), mode);
  }
  return GReluNetwork(s, std::move(frozen), std::move(weights));
}

void save_network(const GReluNetwork& net, const std::string& path) {
  auto f = open_out(path);
  write_network(net, f);
  finish(f, path);
}

void save_network(const ReluNetwork& net, const std::string& path) {
  auto f = open_out(path);
  write_network(net, f);
  finish(f, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  auto f = open_in(path);
  return read_checkpoint(f);
}

GReluNetwork load_network(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  if (auto* g = std::get_if<GReluNetwork>(&c)) return std::move(*g);
  throw FormatError(path + " holds a ReLU network, expected GReLU", 8);
}

ReluNetwork load_relu_network(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  if (auto* r = std::get_if<ReluNetwork>(&c)) return std::move(*r);
  throw FormatError(path + " holds a GReLU network, expected ReLU", 8);
}

void write_gates(const GateSet& gates, std::ostream& out) {
  ByteWriter w(out);
  const std::size_t layers = gates.empty() ? 0 : gates.front().masks.size();
  const std::size_t m = layers == 0 ? 0 : gates.front().masks.front().size();
  for (const GatePattern& g : gates) {
    if (g.masks.size() != layers) throw DimensionError("gate patterns differ in depth");
    for (const BitMask& b : g.masks) {
      if (b.size() != m) throw DimensionError("gate masks differ in width");
    }
  }
  w.magic("GRGP");
  w.put<std::uint64_t>(gates.size());
  w.put<std::uint64_t>(layers);
  w.put<std::uint64_t>(m);
  std::vector<unsigned char> bytes((m + 7) / 8);
  for (const GatePattern& g : gates) {
    for (const BitMask& b : g.masks) {
      std::fill(bytes.begin(), bytes.end(), 0);
      const auto& words = b.words();
      for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(words[i / 8] >> (8 * (i % 8)));
      }
      w.bytes(bytes);
    }
  }
}

GateSet read_gates(std::istream& in) {
  ByteReader r(in);
  r.magic("GRGP");
  const std::uint64_t at_shape = r.offset();
  const auto n = r.get<std::uint64_t>();
  const auto layers = r.get<std::uint64_t>();
  const auto m = r.get<std::uint64_t>();
  const std::uint64_t row = (m + 7) / 8;
  if (m > (1ull << 40) || layers > (1ull << 20)) throw FormatError("implausible shape", at_shape);
  if (n != 0 && layers != 0 && row != 0) {
    if (n > UINT64_MAX / layers) throw FormatError("implausible shape", at_shape);
    r.need_elems(n * layers, row);
  }
  const unsigned pad_bits = static_cast<unsigned>(row * 8 - m);
  const unsigned char pad_mask =
      pad_bits == 0 ? 0 : static_cast<unsigned char>(0xFFu << (8 - pad_bits));
  GateSet gates(n);
  for (auto& g : gates) {
    g.masks.reserve(layers);
    for (std::uint64_t k = 0; k < layers; ++k) {
      const std::uint64_t at = r.offset();
      const unsigned char* p = r.take(row);
      if (row > 0 && (p[row - 1] & pad_mask)) {
        throw FormatError("nonzero padding bits", at + row - 1);
      }
      BitMask b(m);
      for (std::uint64_t u = 0; u < m; ++u) {
        if ((p[u / 8] >> (u % 8)) & 1u) b.set(u);
      }
      g.masks.push_back(std::move(b));
    }
  }
  r.expect_end();
  return gates;
}

void save_gates(const GateSet& gates, const std::string& path) {
  auto f = open_out(path);
  write_gates(gates, f);
  finish(f, path);
}

GateSet load_gates(const std::string& path) {
  auto f = open_in(path);
  return read_gates(f);
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  ByteWriter w(out);
  w.magic("GRND");
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(ds.n());
  w.put<std::uint64_t>(ds.d_x());
  w.put<std::uint64_t>(ds.d_y());
  w.put<double>(ds.label_scale);
  w.matrix(ds.X);
  w.matrix(ds.Y);
}

Dataset read_dataset(std::istream& in) {
  ByteReader r(in);
  r.magic("GRND");
  const std::uint64_t at_version = r.offset();
  if (r.get<std::uint32_t>() != 1) throw FormatError("unsupported version", at_version);
  const std::uint64_t at_shape = r.offset();
  const auto n = r.get<std::uint64_t>();
  const auto dx = r.get<std::uint64_t>();
  const auto dy = r.get<std::uint64_t>();
  const std::uint64_t at_scale = r.offset();
  const auto scale = r.get<double>();
  if (!std::isfinite(scale)) throw FormatError("non-finite label scale", at_scale);
  if (dx > (1ull << 32) || dy > (1ull << 32)) throw FormatError("implausible shape", at_shape);
  if (n != 0) {
    if (n > UINT64_MAX / (dx + dy + 1)) throw FormatError("implausible shape", at_shape);
    r.need_elems(n * (dx + dy), sizeof(double));
  }
  Matrix X = r.matrix(n, dx);
  Matrix Y = r.matrix(n, dy);
  r.expect_end();
  try {
    return make_dataset(std::move(X), std::move(Y), scale);
  } catch (const Error& e) {
    throw FormatError(std::string("invalid dataset: ") + e.what(), at_shape);
  }
}

void save_dataset(const Dataset& ds, const std::string& path) {
  auto f = open_out(path);
  write_dataset(ds, f);
  finish(f, path);
}

Dataset load_dataset(const std::string& path) {
  auto f = open_in(path);
  return read_dataset(f);
}

}  // namespace grelu
