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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace medner::utf8 {

// Returns true when `bytes` is well-formed UTF-8 (no overlongs, no surrogates).
bool is_valid(std::string_view bytes);

// Decodes to Unicode scalar values. Throws FormatError on malformed input.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view code_points);
void append(std::string& out, char32_t code_point);

// Number of scalar values in a valid UTF-8 string.
std::size_t length(std::string_view bytes);

// Byte offset of every scalar value plus a trailing entry equal to the byte
// size, so that substr(offsets[a], offsets[b] - offsets[a]) extracts [a, b).
std::vector<std::size_t> byte_offsets(std::string_view bytes);

// Extracts scalar-value range [start, end) from a valid UTF-8 string.
std::string substr(std::string_view bytes, std::size_t start, std::size_t end);

bool is_space(char32_t c);

}  // namespace medner::utf8
