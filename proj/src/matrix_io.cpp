#include "pudle/matrix_io.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pudle {
namespace {

// Compact SHA-256 (FIPS 180-4).
struct Sha256 {
  std::array<std::uint32_t, 8> h{0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u,
                                 0xa54ff53au, 0x510e527fu, 0x9b05688cu,
                                 0x1f83d9abu, 0x5be0cd19u};
  std::array<std::uint8_t, 64> buf{};
  std::uint64_t total = 0;
  std::size_t fill = 0;

  static std::uint32_t rotr(std::uint32_t x, int n) {
    return (x >> n) | (x << (32 - n));
  }

  void block(const std::uint8_t* p) {
    static const std::uint32_t k[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b,
        0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01,
        0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7,
        0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc,
        0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152,
        0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
        0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
        0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
        0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08,
        0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f,
        0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
        0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5],
                  g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
      std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      std::uint32_t ch = (e & f) ^ (~e & g);
      std::uint32_t t1 = hh + s1 + ch + k[i] + w[i];
      std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      std::uint32_t t2 = s0 + maj;
      hh = g; g = f; f = e; e = d + t1;
      d = c; c = b; b = a; a = t1 + t2;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d;
    h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
  }

  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    total += len;
    while (len > 0) {
      std::size_t take = std::min(len, buf.size() - fill);
      std::memcpy(buf.data() + fill, p, take);
      fill += take;
      p += take;
      len -= take;
      if (fill == buf.size()) {
        block(buf.data());
        fill = 0;
      }
    }
  }

  std::string hex() {
    std::uint64_t bits = total * 8;
    std::uint8_t pad = 0x80;
    update(&pad, 1);
    std::uint8_t zero = 0;
    while (fill != 56) update(&zero, 1);
    std::uint8_t len_be[8];
    for (int i = 0; i < 8; ++i)
      len_be[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    // bypass total bookkeeping for the length block
    std::memcpy(buf.data() + fill, len_be, 8);
    block(buf.data());
    char out[65];
    for (int i = 0; i < 8; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
    return std::string(out, 64);
  }
};

}  // namespace

std::string sha256_hex(const void* data, std::size_t len) {
  Sha256 s;
  s.update(data, len);
  return s.hex();
}

std::string sha256_hex(const std::string& s) {
  return sha256_hex(s.data(), s.size());
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "sha256_file: cannot open " + path.string());
  Sha256 s;
  std::array<char, 1 << 16> chunk;
  while (in) {
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    s.update(chunk.data(), static_cast<std::size_t>(in.gcount()));
  }
  return s.hex();
}

void save_matrix(const std::filesystem::path& base, const Matrix& m) {
  std::filesystem::path bin = base;
  bin += ".bin";
  std::filesystem::path meta = base;
  meta += ".meta.json";
  if (base.has_parent_path())
    std::filesystem::create_directories(base.parent_path());

  // row-major on disk
  std::vector<double> rowmajor(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      rowmajor[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    require(out.good(), "save_matrix: cannot open " + bin.string());
    out.write(reinterpret_cast<const char*>(rowmajor.data()),
              static_cast<std::streamsize>(rowmajor.size() * sizeof(double)));
  }
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["dtype"] = "f64";
  j["layout"] = "row-major";
  j["sha256"] = sha256_hex(rowmajor.data(), rowmajor.size() * sizeof(double));
  write_text_atomic(meta, j.dump(2) + "\n");
}

Matrix load_matrix(const std::filesystem::path& base) {
  std::filesystem::path bin = base;
  bin += ".bin";
  std::filesystem::path meta = base;
  meta += ".meta.json";
  std::ifstream mi(meta);
  require(mi.good(), "load_matrix: cannot open " + meta.string());
  nlohmann::json j = nlohmann::json::parse(mi);
  require(j.at("dtype") == "f64" && j.at("layout") == "row-major",
          "load_matrix: unsupported dtype/layout in " + meta.string());
  Index rows = j.at("rows").get<Index>();
  Index cols = j.at("cols").get<Index>();
  std::vector<double> rowmajor(static_cast<std::size_t>(rows * cols));
  {
    std::ifstream in(bin, std::ios::binary);
    require(in.good(), "load_matrix: cannot open " + bin.string());
    in.read(reinterpret_cast<char*>(rowmajor.data()),
            static_cast<std::streamsize>(rowmajor.size() * sizeof(double)));
    require(static_cast<std::size_t>(in.gcount()) ==
                rowmajor.size() * sizeof(double),
            "load_matrix: truncated " + bin.string());
  }
  std::string digest =
      sha256_hex(rowmajor.data(), rowmajor.size() * sizeof(double));
  require(digest == j.at("sha256").get<std::string>(),
          "load_matrix: sha256 mismatch for " + bin.string());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index jx = 0; jx < cols; ++jx)
      m(i, jx) = rowmajor[static_cast<std::size_t>(i * cols + jx)];
  return m;
}

void save_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ostringstream out;
  out << "r,c,value\n";
  out.precision(17);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      out << i << "," << j << "," << m(i, j) << "\n";
  write_text_atomic(path, out.str());
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "load_matrix_csv: cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  require(header == "r,c,value", "load_matrix_csv: bad header");
  std::vector<std::tuple<Index, Index, double>> cells;
  Index rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Index r, c;
    double v;
    if (std::sscanf(line.c_str(), "%ld,%ld,%lf", &r, &c, &v) != 3)
      throw std::runtime_error("load_matrix_csv: bad row: " + line);
    cells.emplace_back(r, c, v);
    rows = std::max(rows, r + 1);
    cols = std::max(cols, c + 1);
  }
  Matrix m = Matrix::Zero(rows, cols);
  for (auto& [r, c, v] : cells) m(r, c) = v;
  return m;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    require(out.good(), "write_text_atomic: cannot open " + tmp.string());
    out << contents;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace pudle
