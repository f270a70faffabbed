#pragma once

// Binary model files.
//
//   "KSMDL"            5 bytes
//   format version     u16
//   schema version     u16
//   label count        u32, then one u8 code per label
//   kind               u8 (0 single model, 1 ensemble)
//   member count       u32
//   per member:
//     C, gamma, temperature          f64
//     feature count (u32), mean[], std[]  f64
//     per label machine: sv count (u32), bias (f64), then per SV coef + features (f64)
//   CRC-32 of everything above      u32
//
// All integers and floats little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "kickscore/error.hpp"
#include "kickscore/svm.hpp"
#include "kickscore/wire.hpp"

namespace kickscore::svm {

inline constexpr std::array<std::uint8_t, 5> kModelMagic{'K', 'S', 'M', 'D', 'L'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

namespace detail {

class Writer {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return b_.size() - pos_; }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (remaining() < n)
      throw Error(ErrorCode::CorruptPayload, "truncated model file", pos_);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint64_t uint(std::size_t n) {
    auto s = take(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  double f64() { return std::bit_cast<double>(uint(8)); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

inline void write_member(Writer& w, const SvmModel& m) {
  w.f64(m.C);
  w.f64(m.gamma);
  w.f64(m.temperature);
  w.u32(static_cast<std::uint32_t>(kFeatureCount));
  for (double v : m.standardizer.mean) w.f64(v);
  for (double v : m.standardizer.std) w.f64(v);
  for (const auto& mach : m.machines) {
    w.u32(static_cast<std::uint32_t>(mach.support_vectors.size()));
    w.f64(mach.bias);
    for (std::size_t s = 0; s < mach.support_vectors.size(); ++s) {
      w.f64(mach.coef[s]);
      for (double v : mach.support_vectors[s]) w.f64(v);
    }
  }
}

inline SvmModel read_member(Reader& r, const std::vector<TechniqueLabel>& labels, std::uint16_t schema) {
  SvmModel m;
  m.schema_version = schema;
  m.labels = labels;
  m.C = r.f64();
  m.gamma = r.f64();
  m.temperature = r.f64();
  if (!(m.C > 0 && m.gamma > 0 && m.temperature > 0))
    throw Error(ErrorCode::CorruptPayload, "non-positive hyperparameter", r.pos());
  if (r.u32() != kFeatureCount) throw Error(ErrorCode::CorruptPayload, "feature count", r.pos());
  for (auto& v : m.standardizer.mean) v = r.f64();
  for (auto& v : m.standardizer.std) v = r.f64();
  for (std::size_t l = 0; l < labels.size(); ++l) {
    BinaryMachine mach;
    const std::uint32_t n = r.u32();
    // Each SV needs (1 + kFeatureCount) * 8 bytes; reject counts the file cannot hold.
    if (static_cast<std::uint64_t>(n) * (1 + kFeatureCount) * 8 > r.remaining())
      throw Error(ErrorCode::CorruptPayload, "support vector count exceeds file", r.pos());
    mach.bias = r.f64();
    mach.support_vectors.resize(n);
    mach.coef.resize(n);
    for (std::uint32_t s = 0; s < n; ++s) {
      mach.coef[s] = r.f64();
      for (auto& v : mach.support_vectors[s]) v = r.f64();
    }
    m.machines.push_back(std::move(mach));
  }
  return m;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_model(const TechniqueModel& model) {
  const std::vector<SvmModel>* members = nullptr;
  std::vector<SvmModel> single;
  std::uint8_t kind = 0;
  if (const auto* s = std::get_if<SvmModel>(&model)) {
    single.push_back(*s);
    members = &single;
  } else {
    members = &std::get<EnsembleModel>(model).members;
    kind = 1;
  }
  if (members->empty()) throw Error(ErrorCode::InvalidConfig, "empty ensemble");
  const auto& first = members->front();

  detail::Writer w;
  w.bytes(kModelMagic);
  w.u16(kModelFormatVersion);
  w.u16(first.schema_version);
  w.u32(static_cast<std::uint32_t>(first.labels.size()));
  for (auto l : first.labels) w.u8(static_cast<std::uint8_t>(l));
  w.u8(kind);
  w.u32(static_cast<std::uint32_t>(members->size()));
  for (const auto& m : *members) detail::write_member(w, m);
  boost::crc_32_type crc;
  crc.process_bytes(w.data().data(), w.data().size());
  w.u32(crc.checksum());
  return std::move(w.data());
}

inline TechniqueModel deserialize_model(std::span<const std::uint8_t> bytes) {
  detail::Reader r(bytes);
  if (bytes.size() < kModelMagic.size() ||
      !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin()))
    throw Error(ErrorCode::BadMagic, "not a model file", 0);
  r.take(kModelMagic.size());
  const auto format = r.u16();
  if (format != kModelFormatVersion)
    throw Error(ErrorCode::VersionMismatch, "model format version " + std::to_string(format), 5);
  const auto schema = r.u16();
  if (schema != kFeatureSchemaVersion)
    throw Error(ErrorCode::VersionMismatch,
                "feature schema " + std::to_string(schema) + ", expected " + std::to_string(kFeatureSchemaVersion), 7);
  if (bytes.size() < 4) throw Error(ErrorCode::CorruptPayload, "truncated model file", bytes.size());
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size() - 4);
  const auto tail = bytes.subspan(bytes.size() - 4);
  const std::uint32_t stored = tail[0] | (tail[1] << 8) | (tail[2] << 16) | (static_cast<std::uint32_t>(tail[3]) << 24);
  if (crc.checksum() != stored)
    throw Error(ErrorCode::CorruptPayload, "checksum mismatch (truncated or damaged)", bytes.size() - 4);
  detail::Reader body(bytes.first(bytes.size() - 4));
  body.take(9);

  const auto label_count = body.u32();
  if (label_count < 2 || label_count > kLabelCount)
    throw Error(ErrorCode::CorruptPayload, "label count " + std::to_string(label_count), body.pos());
  std::vector<TechniqueLabel> labels;
  for (std::uint32_t i = 0; i < label_count; ++i) {
    const auto l = label_from_index(body.u8());
    if (!l) throw Error(ErrorCode::CorruptPayload, "unknown label code", body.pos() - 1);
    labels.push_back(*l);
  }
  const auto kind = body.u8();
  if (kind > 1) throw Error(ErrorCode::CorruptPayload, "unknown model kind", body.pos() - 1);
  const auto members = body.u32();
  if (members < 1 || (kind == 0 && members != 1))
    throw Error(ErrorCode::CorruptPayload, "member count " + std::to_string(members), body.pos());
  std::vector<SvmModel> ms;
  for (std::uint32_t m = 0; m < members; ++m) ms.push_back(detail::read_member(body, labels, schema));
  if (body.remaining() != 0) throw Error(ErrorCode::CorruptPayload, "trailing bytes", body.pos());
  if (kind == 0) return std::move(ms.front());
  return EnsembleModel{std::move(ms)};
}

inline void save_model(const TechniqueModel& model, const std::string& path) {
  wire::write_file_bytes(path, serialize_model(model));
}

inline TechniqueModel load_model(const std::string& path) {
  return deserialize_model(wire::read_file_bytes(path));
}

}  // namespace kickscore::svm
