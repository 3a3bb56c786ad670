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

#pragma once

// Little-endian binary container helpers for embedding, encoder and model
// files. Every file starts with 8 magic bytes and a u32 format version; the
// exact per-file layouts are documented in docs/FORMATS.md.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "medner/nn.hpp"

namespace medner::binio {

using Magic = std::array<char, 8>;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void magic(const Magic& m);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void string(std::string_view s);
  // u32 rows, u32 cols, then rows*cols f32 in row-major order.
  void matrix(const nn::Matrix<float>& m);

 private:
  void bytes(const void* data, std::size_t n);
  std::ostream& out_;
};

// Every read throws FormatError when the stream ends early.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void expect_magic(const Magic& m, std::string_view what);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string string();
  nn::Matrix<float> matrix();
  // Reads a matrix and checks its shape.
  nn::Matrix<float> matrix(Eigen::Index rows, Eigen::Index cols, std::string_view what);
  // Throws FormatError unless the stream is exhausted.
  void expect_end(std::string_view what);

 private:
  void bytes(void* data, std::size_t n);
  std::istream& in_;
};

}  // namespace medner::binio
