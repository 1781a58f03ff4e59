// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/formats.hpp"

#include "koopdmd/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace koopdmd {

namespace {

class Writer {
public:
  void magic(const char (&tag)[5]) { bytes_.insert(bytes_.end(), tag, tag + 4); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  template <typename Derived>
  void row_major(const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void expect_magic(const char (&tag)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, tag, 4) != 0) {
      throw Error(ErrorCode::Format, std::string("bad magic, expected ") + tag);
    }
    pos_ += 4;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  Eigen::MatrixXd row_major(Eigen::Index rows, Eigen::Index cols) {
    need(static_cast<std::size_t>(rows * cols) * 8);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f64();
    }
    return m;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void expect_end() const {
    if (remaining() != 0) throw Error(ErrorCode::Format, "trailing bytes after payload");
  }

private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::Format, "truncated payload");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kFlagRest = 1U;
constexpr std::uint32_t kFlagForcing = 2U;

// Guards size arithmetic against hostile headers.
void check_payload(std::uint64_t doubles, std::size_t remaining) {
  if (doubles > remaining / 8) throw Error(ErrorCode::Format, "header sizes exceed the payload");
}

}  // namespace

std::vector<std::uint8_t> encode_snapshots(const SnapshotSet& snaps) {
  snaps.validate();
  const Eigen::Index d = snaps.dim();
  const bool has_rest = snaps.rest_positions.size() > 0;
  Writer w;
  w.magic("KPSS");
  w.u32(kSnapshotVersion);
  w.u32((has_rest ? kFlagRest : 0U) | (snaps.has_forcing() ? kFlagForcing : 0U));
  w.u64(static_cast<std::uint64_t>(d / 6));
  w.u64(snaps.states.size());
  w.f64(snaps.h);
  for (const LiftedState& s : snaps.states) {
    for (Eigen::Index i = 0; i < d; ++i) w.f64(s.values()[i]);
  }
  if (has_rest) w.row_major(snaps.rest_positions);
  for (const ForceLift& f : snaps.forcing) {
    for (Eigen::Index i = 0; i < d; ++i) w.f64(f.values()[i]);
  }
  return w.take();
}

SnapshotSet decode_snapshots(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.expect_magic("KPSS");
  const std::uint32_t version = r.u32();
  if (version != kSnapshotVersion) throw Error(ErrorCode::Format, "unsupported snapshot version " + std::to_string(version));
  const std::uint32_t flags = r.u32();
  if (flags & ~(kFlagRest | kFlagForcing)) throw Error(ErrorCode::Format, "unknown snapshot flags");
  const std::uint64_t n = r.u64();
  const std::uint64_t frames = r.u64();
  SnapshotSet snaps;
  snaps.h = r.f64();
  if (!(snaps.h > 0.0)) throw Error(ErrorCode::Format, "snapshot h must be positive");
  if (n == 0 || frames < 2) throw Error(ErrorCode::Format, "snapshot header needs n >= 1 and at least 2 frames");
  check_payload(frames, r.remaining() / 6);
  check_payload(frames * 6 * n, r.remaining());

  const auto d = static_cast<Eigen::Index>(6 * n);
  snaps.states.reserve(frames);
  for (std::uint64_t t = 0; t < frames; ++t) {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = r.f64();
    snaps.states.emplace_back(std::move(v));
  }
  if (flags & kFlagRest) snaps.rest_positions = r.row_major(static_cast<Eigen::Index>(n), 3);
  if (flags & kFlagForcing) {
    check_payload((frames - 1) * 6 * n, r.remaining());
    for (std::uint64_t t = 0; t + 1 < frames; ++t) {
      Eigen::VectorXd v(d);
      for (Eigen::Index i = 0; i < d; ++i) v[i] = r.f64();
      snaps.forcing.emplace_back(std::move(v), snaps.h);
    }
  }
  r.expect_end();
  snaps.validate();
  return snaps;
}

std::vector<std::uint8_t> encode_model(const KoopmanModel& model) {
  if (!model.valid()) throw Error(ErrorCode::Domain, "cannot encode an empty model");
  if (model.dim() % 6 != 0) throw Error(ErrorCode::Dimension, "model dimension is not 6n; only lifted-state models serialize");
  Writer w;
  w.magic("KPDM");
  w.u32(kModelVersion);
  w.u64(static_cast<std::uint64_t>(model.dim() / 6));
  w.u64(static_cast<std::uint64_t>(model.rank()));
  w.f64(model.h());
  w.row_major(model.modes().real());
  w.row_major(model.modes().imag());
  for (Eigen::Index i = 0; i < model.rank(); ++i) w.f64(model.eigenvalues()[i].real());
  for (Eigen::Index i = 0; i < model.rank(); ++i) w.f64(model.eigenvalues()[i].imag());
  w.row_major(model.left_basis());
  w.row_major(model.reduced_eigvecs().real());
  w.row_major(model.reduced_eigvecs().imag());
  return w.take();
}

KoopmanModel decode_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.expect_magic("KPDM");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) throw Error(ErrorCode::Format, "unsupported model version " + std::to_string(version));
  const std::uint64_t n = r.u64();
  const std::uint64_t rank = r.u64();
  const double h = r.f64();
  if (n == 0 || rank == 0) throw Error(ErrorCode::Format, "model header needs n >= 1 and r >= 1");
  check_payload(rank, r.remaining());
  check_payload(n, r.remaining() / 6);
  const std::uint64_t expected = 3 * 6 * n * rank + 2 * rank + 2 * rank * rank;
  if (rank > r.remaining() / 8 / rank / 2 || expected * 8 != r.remaining()) {
    throw Error(ErrorCode::Format, "model payload length does not match its header");
  }
  const auto d = static_cast<Eigen::Index>(6 * n);
  const auto k = static_cast<Eigen::Index>(rank);

  Eigen::MatrixXcd modes(d, k);
  modes.real() = r.row_major(d, k);
  modes.imag() = r.row_major(d, k);
  Eigen::VectorXcd lambda(k);
  for (Eigen::Index i = 0; i < k; ++i) lambda[i].real(r.f64());
  for (Eigen::Index i = 0; i < k; ++i) lambda[i].imag(r.f64());
  Eigen::MatrixXd basis = r.row_major(d, k);
  Eigen::MatrixXcd phi(k, k);
  phi.real() = r.row_major(k, k);
  phi.imag() = r.row_major(k, k);
  r.expect_end();
  return KoopmanModel(std::move(modes), std::move(lambda), std::move(basis), std::move(phi), h);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void save_snapshots(const std::filesystem::path& path, const SnapshotSet& snaps) {
  write_file(path, encode_snapshots(snaps));
}

SnapshotSet load_snapshots(const std::filesystem::path& path) { return decode_snapshots(read_file(path)); }

void save_model(const std::filesystem::path& path, const KoopmanModel& model) { write_file(path, encode_model(model)); }

KoopmanModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace koopdmd
