// Copyright 2026 The medner Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "medner/binio.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "medner/error.hpp"

namespace medner::binio {
namespace {

// Strings and matrices larger than this are treated as corruption.
constexpr std::uint32_t kMaxElements = 1u << 28;

template <typename T>
void to_le(T v, unsigned char* out) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
}

template <typename T>
T from_le(const unsigned char* in) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[i]) << (8 * i);
  return v;
}

}  // namespace

void Writer::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed");
}

void Writer::magic(const Magic& m) { bytes(m.data(), m.size()); }

void Writer::u8(std::uint8_t v) { bytes(&v, 1); }

void Writer::u32(std::uint32_t v) {
  unsigned char b[4];
  to_le(v, b);
  bytes(b, 4);
}

void Writer::u64(std::uint64_t v) {
  unsigned char b[8];
  to_le(v, b);
  bytes(b, 8);
}

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void Writer::matrix(const nn::Matrix<float>& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  std::string buf(static_cast<std::size_t>(m.size()) * 4, '\0');
  auto* p = reinterpret_cast<unsigned char*>(buf.data());
  for (Eigen::Index i = 0; i < m.size(); ++i) to_le(std::bit_cast<std::uint32_t>(m.data()[i]), p + 4 * i);
  bytes(buf.data(), buf.size());
}

void Reader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("truncated file");
}

void Reader::expect_magic(const Magic& m, std::string_view what) {
  Magic got{};
  in_.read(got.data(), got.size());
  if (static_cast<std::size_t>(in_.gcount()) != got.size() || got != m)
    throw FormatError("not a " + std::string(what) + " file (bad magic bytes)");
}

std::uint8_t Reader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint32_t Reader::u32() {
  unsigned char b[4];
  bytes(b, 4);
  return from_le<std::uint32_t>(b);
}

std::uint64_t Reader::u64() {
  unsigned char b[8];
  bytes(b, 8);
  return from_le<std::uint64_t>(b);
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::string() {
  const std::uint32_t n = u32();
  if (n > kMaxElements) throw FormatError("corrupt string length");
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

nn::Matrix<float> Reader::matrix() {
  const std::uint32_t rows = u32();
  const std::uint32_t cols = u32();
  if (static_cast<std::uint64_t>(rows) * cols > kMaxElements) throw FormatError("corrupt matrix shape");
  nn::Matrix<float> m(rows, cols);
  std::string buf(static_cast<std::size_t>(m.size()) * 4, '\0');
  bytes(buf.data(), buf.size());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<float>(from_le<std::uint32_t>(p + 4 * i));
  return m;
}

nn::Matrix<float> Reader::matrix(Eigen::Index rows, Eigen::Index cols, std::string_view what) {
  auto m = matrix();
  if (m.rows() != rows || m.cols() != cols)
    throw FormatError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " weights, found " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
  return m;
}

void Reader::expect_end(std::string_view what) {
  if (in_.peek() != std::char_traits<char>::eof())
    throw FormatError(std::string(what) + ": trailing bytes after payload");
}

}  // namespace medner::binio
