#include "becfocus/grid_io.hpp"

#include "becfocus/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace becfocus {

namespace {

constexpr char magic[8] = {'B', 'E', 'C', 'G', 'R', 'I', 'D', '\0'};

struct Header {
  std::uint32_t kind;
  std::int64_t n[3];
  double extent[3];
  double offset[3];
  double t;
  double scale;
};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T byteswap_any(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

class Reader {
public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open " + path);
    path_ = path;
  }
  template <typename T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw std::runtime_error("truncated grid file " + path_);
    return swap_ ? byteswap_any(v) : v;
  }
  void read_magic() {
    char m[8];
    in_.read(m, 8);
    if (!in_ || std::memcmp(m, magic, 8) != 0) throw std::runtime_error(path_ + " is not a grid file");
  }
  void set_swap(bool s) { swap_ = s; }
  bool at_end() {
    in_.peek();
    return in_.eof();
  }

private:
  std::ifstream in_;
  std::string path_;
  bool swap_ = false;
};

void write_header(std::ostream& os, const Header& h) {
  os.write(magic, 8);
  put<std::uint32_t>(os, grid_format_version);
  put<std::uint32_t>(os, grid_endian_tag);
  put<std::uint32_t>(os, h.kind);
  put<std::uint32_t>(os, 0);
  for (auto v : h.n) put<std::int64_t>(os, v);
  for (auto v : h.extent) put<double>(os, v);
  for (auto v : h.offset) put<double>(os, v);
  put<double>(os, h.t);
  put<double>(os, h.scale);
}

Header read_header(Reader& r, GridKind expected) {
  r.read_magic();
  const auto version_raw = r.get<std::uint32_t>();
  const auto tag = r.get<std::uint32_t>();
  if (tag == byteswap_any(grid_endian_tag)) {
    r.set_swap(true);
  } else if (tag != grid_endian_tag) {
    throw std::runtime_error("unrecognised endianness tag in grid file");
  }
  const std::uint32_t version = tag == grid_endian_tag ? version_raw : byteswap_any(version_raw);
  if (version != grid_format_version) {
    throw std::runtime_error("unsupported grid format version " + std::to_string(version));
  }
  Header h;
  h.kind = r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  if (h.kind != static_cast<std::uint32_t>(expected)) throw std::runtime_error("grid file holds a different kind");
  for (auto& v : h.n) v = r.get<std::int64_t>();
  for (auto& v : h.extent) v = r.get<double>();
  for (auto& v : h.offset) v = r.get<double>();
  h.t = r.get<double>();
  h.scale = r.get<double>();
  return h;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

} // namespace

void write_field(const std::string& path, const ComplexField3D& field) {
  auto os = open_out(path);
  const GridSpec& g = field.grid;
  Header h{static_cast<std::uint32_t>(GridKind::ComplexField),
           {g.n[0], g.n[1], g.n[2]},
           {g.extent(0), g.extent(1), g.extent(2)},
           {g.offset(0), g.offset(1), g.offset(2)},
           field.t,
           1.0};
  write_header(os, h);
  os.write(reinterpret_cast<const char*>(field.data.data()), sizeof(double) * 2 * field.data.size());
  if (!os) throw std::runtime_error("failed writing " + path);
}

ComplexField3D read_field(const std::string& path) {
  Reader r(path);
  const Header h = read_header(r, GridKind::ComplexField);
  GridSpec g;
  for (int i = 0; i < 3; ++i) {
    g.n[i] = int(h.n[i]);
    g.extent(i) = h.extent[i];
    g.offset(i) = h.offset[i];
  }
  g.validate();
  ComplexField3D f(g);
  f.t = h.t;
  for (long i = 0; i < f.data.size(); ++i) {
    const double re = r.get<double>();
    const double im = r.get<double>();
    f.data(i) = {re, im};
  }
  return f;
}

void write_deposit(const std::string& path, const DepositMap& map) {
  auto os = open_out(path);
  const PlaneGrid& g = map.grid;
  Header h{static_cast<std::uint32_t>(GridKind::RealMap),
           {g.n[0], g.n[1], 1},
           {g.extent(0), g.extent(1), 0.0},
           {g.offset(0), g.offset(1), 0.0},
           map.t_end,
           map.speed};
  write_header(os, h);
  // Eigen is column-major; emit row-major (y fastest).
  for (int i = 0; i < g.n[0]; ++i) {
    for (int j = 0; j < g.n[1]; ++j) put<double>(os, map.raw(i, j));
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

DepositMap read_deposit(const std::string& path) {
  Reader r(path);
  const Header h = read_header(r, GridKind::RealMap);
  DepositMap m;
  m.grid.n = {int(h.n[0]), int(h.n[1])};
  m.grid.extent = {h.extent[0], h.extent[1]};
  m.grid.offset = {h.offset[0], h.offset[1]};
  m.grid.validate();
  m.t_end = h.t;
  m.speed = h.scale;
  m.raw.resize(m.grid.n[0], m.grid.n[1]);
  for (int i = 0; i < m.grid.n[0]; ++i) {
    for (int j = 0; j < m.grid.n[1]; ++j) m.raw(i, j) = r.get<double>();
  }
  return m;
}

void write_deposit_csv(const std::string& path, const DepositMap& map) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << std::setprecision(17);
  os << "x,y,n0,raw\n";
  const Eigen::ArrayXd xs = map.grid.axis(0), ys = map.grid.axis(1);
  for (int i = 0; i < map.grid.n[0]; ++i) {
    for (int j = 0; j < map.grid.n[1]; ++j) {
      os << xs(i) << ',' << ys(j) << ',' << map.raw(i, j) * map.speed << ',' << map.raw(i, j) << '\n';
    }
  }
}

} // namespace becfocus
