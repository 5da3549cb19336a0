#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "cdlab/netpbm.hpp"

namespace cdlab {

// Little-endian serialization helpers shared by the stream and model formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void bytes(const std::vector<std::uint8_t>& b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  std::size_t size() const { return out_.size(); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& in, std::string what) : in_(in), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  void expect_magic(const char* magic) {
    need(4);
    if (std::memcmp(in_.data() + pos_, magic, 4) != 0) throw FormatError(what_ + ": bad magic");
    pos_ += 4;
  }
  std::vector<std::uint8_t> take(std::uint64_t n) {
    need(n);
    std::vector<std::uint8_t> out(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_)
      throw FormatError(what_ + ": truncated at byte offset " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::vector<std::uint8_t>& in_;
  std::string what_;
  std::size_t pos_ = 0;
};

// MSB-first bit packing.
class BitWriter {
 public:
  void put(std::uint32_t value, int nbits) {
    for (int i = nbits - 1; i >= 0; --i) bit((value >> i) & 1u);
  }
  void bit(unsigned b) {
    acc_ = static_cast<std::uint8_t>((acc_ << 1) | (b & 1u));
    if (++fill_ == 8) {
      out_.push_back(acc_);
      acc_ = 0;
      fill_ = 0;
    }
  }
  std::uint64_t bit_count() const { return out_.size() * 8 + static_cast<std::uint64_t>(fill_); }
  // Pads the final partial byte with `pad` bits.
  std::vector<std::uint8_t> finish(unsigned pad = 0) {
    while (fill_ != 0) bit(pad);
    return std::move(out_);
  }

 private:
  std::vector<std::uint8_t> out_;
  std::uint8_t acc_ = 0;
  int fill_ = 0;
};

class BitLimitReached : public std::exception {
 public:
  const char* what() const noexcept override { return "bit reader exhausted"; }
};

class BitReader {
 public:
  BitReader(const std::uint8_t* data, std::size_t nbytes) : data_(data), limit_(nbytes * 8) {}

  unsigned bit() {
    if (pos_ >= limit_) throw BitLimitReached();
    const unsigned b = (data_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u;
    ++pos_;
    return b;
  }
  std::uint32_t get(int nbits) {
    std::uint32_t v = 0;
    for (int i = 0; i < nbits; ++i) v = (v << 1) | bit();
    return v;
  }
  std::uint64_t bit_pos() const { return pos_; }
  void set_limit(std::size_t nbytes) { limit_ = nbytes * 8; }
  std::size_t byte_pos() const { return static_cast<std::size_t>(pos_ >> 3); }

 private:
  const std::uint8_t* data_;
  std::uint64_t limit_;
  std::uint64_t pos_ = 0;
};

}  // namespace cdlab
