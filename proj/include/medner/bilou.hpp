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

// BILOU label scheme and the transition system that constrains decoding.
//
// Action indices are laid out as O = 0, then four actions per label in scheme
// order: B = 1 + 4k, I = 2 + 4k, L = 3 + 4k, U = 4 + 4k. Appending labels to a
// scheme therefore never renumbers existing actions.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medner/corpus.hpp"

namespace medner {

enum class Move : std::uint8_t { kOut = 0, kBegin, kInside, kLast, kUnit };

struct Action {
  Move move = Move::kOut;
  int label = -1;  // -1 for O

  bool operator==(const Action&) const = default;
};

inline constexpr int kOutsideAction = 0;

class LabelScheme {
 public:
  LabelScheme() = default;
  explicit LabelScheme(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const { return labels_; }
  int num_labels() const { return static_cast<int>(labels_.size()); }
  int num_actions() const { return 4 * num_labels() + 1; }

  std::optional<int> label_index(std::string_view label) const;

  int action_index(Move move, int label) const;
  Action action(int index) const;
  std::string action_name(int index) const;
  int parse_action(std::string_view name) const;

  // This scheme's labels followed by `new_labels`. Throws if they overlap.
  LabelScheme extended(const std::vector<std::string>& new_labels) const;

  bool operator==(const LabelScheme&) const = default;

 private:
  std::vector<std::string> labels_;
};

struct TransitionState {
  std::size_t position = 0;
  std::optional<int> open_label;

  bool operator==(const TransitionState&) const = default;
};

// Legal actions in ascending index order. With no open entity: O, U-*, and B-*
// unless this is the last token. With an open entity of label l: L-l, and I-l
// unless this is the last token.
std::vector<int> valid_actions(const TransitionState& state, const LabelScheme& scheme,
                               bool is_last_token);

// Same as valid_actions but fills a dense mask of size num_actions.
void valid_action_mask(const TransitionState& state, int num_labels, bool is_last_token,
                       std::span<std::uint8_t> mask);

// Advances the state. Throws InvalidArgument if the action is illegal.
TransitionState apply_action(const TransitionState& state, const LabelScheme& scheme,
                             int action, bool is_last_token);

bool is_valid_sequence(std::span<const int> actions, const LabelScheme& scheme);

// One action per token. Throws ValidationError for spans that do not align to
// tokens and InvalidArgument for labels outside the scheme.
std::vector<int> gold_actions(std::span<const Token> tokens, std::span<const EntitySpan> spans,
                              const LabelScheme& scheme);

// Inverse of gold_actions. Throws InvalidArgument on an ill-formed sequence.
std::vector<EntitySpan> actions_to_spans(std::span<const Token> tokens,
                                         std::span<const int> actions,
                                         const LabelScheme& scheme);

// Parses a tag sequence ("B-X", "O", ...) into spans without a fixed scheme.
std::vector<EntitySpan> tags_to_spans(std::span<const Token> tokens,
                                      std::span<const std::string> tags);
std::vector<std::string> spans_to_tags(std::span<const Token> tokens,
                                       std::span<const EntitySpan> spans);

}  // namespace medner
