// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_IO_HPP
#define ROMBAYES_IO_HPP

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rombayes/bayes.hpp"
#include "rombayes/common.hpp"
#include "rombayes/dense.hpp"

namespace rombayes {

namespace detail {

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& buf, double d) { put_u64(buf, std::bit_cast<std::uint64_t>(d)); }

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Binary matrix container: magic "RBM1", then rows and cols as unsigned 64-bit
// little-endian, then IEEE-754 binary64 little-endian data in column-major
// order. File size is exactly 20 + 8*rows*cols bytes; round trips are
// bit-exact.
inline void write_matrix_file(const std::filesystem::path& path, const DenseMatrix& m) {
  std::string buf;
  buf.reserve(20 + 8 * m.rows() * m.cols());
  buf.append("RBM1");
  detail::put_u64(buf, m.rows());
  detail::put_u64(buf, m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) detail::put_f64(buf, m(i, j));
  detail::write_file_bytes(path, buf);
}

inline DenseMatrix read_matrix_file(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 20 || bytes.compare(0, 4, "RBM1") != 0)
    throw IoError(path.string() + ": not a matrix file (bad magic)");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t rows = detail::get_u64(p + 4);
  const std::uint64_t cols = detail::get_u64(p + 12);
  const std::uint64_t expect = 20 + 8 * rows * cols;
  if (bytes.size() != expect)
    throw IoError(path.string() + ": truncated or oversized (have " + std::to_string(bytes.size()) +
                  " bytes, expected " + std::to_string(expect) + ")");
  DenseMatrix m(rows, cols);
  std::size_t off = 20;
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i, off += 8) m(i, j) = detail::get_f64(p + off);
  return m;
}

inline void write_vector_file(const std::filesystem::path& path, const Vector& v) {
  DenseMatrix m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.col(0).begin());
  write_matrix_file(path, m);
}

inline Vector read_vector_file(const std::filesystem::path& path) {
  DenseMatrix m = read_matrix_file(path);
  if (m.cols() != 1) throw IoError(path.string() + ": expected a single-column matrix");
  return Vector(m.col(0).begin(), m.col(0).end());
}

// Raw array of unsigned 64-bit little-endian values (interpolation indices).
inline void write_index_file(const std::filesystem::path& path, const std::vector<std::size_t>& idx) {
  std::string buf;
  buf.reserve(8 * idx.size());
  for (std::size_t v : idx) detail::put_u64(buf, v);
  detail::write_file_bytes(path, buf);
}

inline std::vector<std::size_t> read_index_file(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() % 8 != 0) throw IoError(path.string() + ": size not a multiple of 8");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::vector<std::size_t> idx(bytes.size() / 8);
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = static_cast<std::size_t>(detail::get_u64(p + 8 * i));
  return idx;
}

// key=value metadata, one pair per line, '#' comments and blank lines skipped.
inline void write_meta(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string buf;
  for (const auto& [k, v] : kv) buf += k + "=" + v + "\n";
  detail::write_file_bytes(path, buf);
}

inline std::map<std::string, std::string> read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const std::size_t eq = line.find('=', start);
    if (eq == std::string::npos) throw IoError(path.string() + ": malformed line '" + line + "'");
    std::string key = line.substr(start, eq - start);
    std::string val = line.substr(eq + 1);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::size_t vs = val.find_first_not_of(" \t");
    val = (vs == std::string::npos) ? "" : val.substr(vs);
    kv[key] = val;
  }
  return kv;
}

// Basis bundle directory: Q.m64 (state basis), V.m64 (nonlinear-term basis),
// p.idx (interpolation indices), meta.txt.
inline void save_bundle(const std::filesystem::path& dir, const DenseMatrix& q,
                        const DenseMatrix& v, const std::vector<std::size_t>& p,
                        const std::vector<std::pair<std::string, std::string>>& meta) {
  std::filesystem::create_directories(dir);
  write_matrix_file(dir / "Q.m64", q);
  write_matrix_file(dir / "V.m64", v);
  write_index_file(dir / "p.idx", p);
  write_meta(dir / "meta.txt", meta);
}

struct LoadedBundle {
  DenseMatrix q;
  DenseMatrix v;
  std::vector<std::size_t> p;
  std::map<std::string, std::string> meta;
};

inline LoadedBundle load_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "meta.txt"))
    throw IoError("basis bundle not found at " + dir.string());
  LoadedBundle b;
  b.q = read_matrix_file(dir / "Q.m64");
  b.v = read_matrix_file(dir / "V.m64");
  b.p = read_index_file(dir / "p.idx");
  b.meta = read_meta(dir / "meta.txt");
  require(b.v.cols() == b.p.size(), "bundle: V and p disagree on the interpolation dimension");
  require(b.q.rows() == b.v.rows(), "bundle: Q and V disagree on the full dimension");
  return b;
}

// Chain CSV: exact header iter,xi1,xi2,log_posterior,accepted; one row per MH
// step, 1-based iteration, floats at 17 significant digits (lossless round
// trip).
inline void write_chain_csv(const std::filesystem::path& path, const ChainResult& chain) {
  std::string buf = "iter,xi1,xi2,log_posterior,accepted\n";
  for (std::size_t i = 0; i < chain.size(); ++i) {
    buf += std::to_string(i + 1);
    buf += ',';
    buf += detail::format_g17(chain.xi1[i]);
    buf += ',';
    buf += detail::format_g17(chain.xi2[i]);
    buf += ',';
    buf += detail::format_g17(chain.log_post[i]);
    buf += ',';
    buf += chain.accepted[i] ? '1' : '0';
    buf += '\n';
  }
  detail::write_file_bytes(path, buf);
}

struct ChainData {
  std::vector<std::uint64_t> iter;
  Vector xi1, xi2, log_post;
  std::vector<std::uint8_t> accepted;

  std::size_t size() const { return xi1.size(); }
};

inline ChainData read_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "iter,xi1,xi2,log_posterior,accepted")
    throw IoError(path.string() + ": line 1: unexpected header '" + line + "'");
  ChainData d;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 5> fields;
    std::size_t start = 0, fi = 0;
    for (; fi < 5; ++fi) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        if (fi != 4) break;
        fields[fi] = line.substr(start);
        start = line.size();
      } else {
        fields[fi] = line.substr(start, comma - start);
        start = comma + 1;
      }
    }
    if (fi != 5)
      throw IoError(path.string() + ": line " + std::to_string(lineno) + ": expected 5 fields");
    try {
      std::size_t used = 0;
      d.iter.push_back(std::stoull(fields[0], &used));
      d.xi1.push_back(std::stod(fields[1]));
      d.xi2.push_back(std::stod(fields[2]));
      d.log_post.push_back(std::stod(fields[3]));
      const int acc = std::stoi(fields[4]);
      if (acc != 0 && acc != 1) throw std::invalid_argument("accepted flag");
      d.accepted.push_back(static_cast<std::uint8_t>(acc));
    } catch (const std::exception&) {
      throw IoError(path.string() + ": line " + std::to_string(lineno) + ": malformed row '" + line +
                    "'");
    }
  }
  return d;
}

}  // namespace rombayes

#endif  // ROMBAYES_IO_HPP
