#pragma once

// Binary snapshots, little-endian:
//   "QG2L" | u32 version | u32 N | f64 L | 8 x f64 (nu, r, beta, kappa, h1, h2, S1, S2)
//   | f64 time | u64 seed | layer 1 | layer 2
// Each layer is the full N x N coefficient table in FFT order, row-major,
// as interleaved (re, im) f64 pairs.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "qg2l/errors.hpp"
#include "qg2l/params.hpp"
#include "qg2l/spectral.hpp"

namespace qg2l {

inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr char kSnapshotMagic[4] = {'Q', 'G', '2', 'L'};

struct Snapshot {
  LayeredField q;
  double time = 0.0;
  std::uint64_t seed = 0;
  std::array<double, 8> constants{};  ///< nu, r, beta, kappa, h1, h2, S1, S2

  static std::array<double, 8> pack(const ModelParams& p) {
    return {p.nu, p.r, p.beta, p.kappa, p.h1, p.h2, p.s1, p.s2};
  }
};

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof bits);
  for (std::size_t i = 0; i < sizeof bits; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& data) : data_(data) {}

  template <class T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    if (pos_ + sizeof(U) > data_.size()) throw IoError("corrupt snapshot: truncated");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    T value;
    std::memcpy(&value, &bits, sizeof value);
    return value;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  void skip(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError("corrupt snapshot: truncated");
    pos_ += n;
  }

 private:
  const std::vector<unsigned char>& data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_snapshot(const Snapshot& s) {
  const auto& g = s.q.grid();
  std::vector<unsigned char> out(kSnapshotMagic, kSnapshotMagic + 4);
  detail::put_le(out, kSnapshotVersion);
  detail::put_le(out, static_cast<std::uint32_t>(g.n()));
  detail::put_le(out, g.length());
  for (double c : s.constants) detail::put_le(out, c);
  detail::put_le(out, s.time);
  detail::put_le(out, s.seed);
  for (int j = 0; j < 2; ++j) {
    for (const Complex& v : s.q[j].coefficients()) {
      detail::put_le(out, v.real());
      detail::put_le(out, v.imag());
    }
  }
  return out;
}

inline Snapshot decode_snapshot(const std::vector<unsigned char>& data) {
  if (data.size() < 4 || std::memcmp(data.data(), kSnapshotMagic, 4) != 0) {
    throw IoError("corrupt snapshot: bad magic");
  }
  detail::Reader in(data);
  in.skip(4);
  const auto version = in.get<std::uint32_t>();
  if (version != kSnapshotVersion) throw IoError("unsupported version " + std::to_string(version));
  const auto n = in.get<std::uint32_t>();
  const double length = in.get<double>();
  if (n < 16 || n % 2 != 0 || n > 1u << 14 || !(length > 0.0)) throw IoError("corrupt snapshot: bad grid header");
  Snapshot s{LayeredField(SpectralGrid::create(static_cast<int>(n), length))};
  for (double& c : s.constants) c = in.get<double>();
  s.time = in.get<double>();
  s.seed = in.get<std::uint64_t>();
  const std::size_t size = static_cast<std::size_t>(n) * n;
  if (in.remaining() != 2 * size * 16) throw IoError("corrupt snapshot: payload size mismatch");
  for (int j = 0; j < 2; ++j) {
    for (std::size_t idx = 0; idx < size; ++idx) {
      const double re = in.get<double>();
      const double im = in.get<double>();
      s.q[j][idx] = {re, im};
    }
  }
  return s;
}

inline void write_snapshot(const std::string& path, const Snapshot& s) {
  const auto bytes = encode_snapshot(s);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write snapshot '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for snapshot '" + path + "'");
}

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open snapshot '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace qg2l
