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

#include "medner/bilou.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "medner/error.hpp"

namespace medner {
namespace {

constexpr char kMovePrefix[] = {'O', 'B', 'I', 'L', 'U'};

}  // namespace

LabelScheme::LabelScheme(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::unordered_set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw InvalidArgument("entity label must be non-empty");
    if (!seen.insert(l).second) throw InvalidArgument("duplicate entity label '" + l + "'");
  }
}

std::optional<int> LabelScheme::label_index(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  return std::nullopt;
}

int LabelScheme::action_index(Move move, int label) const {
  if (move == Move::kOut) return kOutsideAction;
  if (label < 0 || label >= num_labels()) throw InvalidArgument("label index out of range");
  return 1 + 4 * label + (static_cast<int>(move) - 1);
}

Action LabelScheme::action(int index) const {
  if (index < 0 || index >= num_actions()) throw InvalidArgument("action index out of range");
  if (index == kOutsideAction) return Action{};
  const int k = index - 1;
  return Action{static_cast<Move>(1 + k % 4), k / 4};
}

std::string LabelScheme::action_name(int index) const {
  const Action a = action(index);
  if (a.move == Move::kOut) return "O";
  return std::string(1, kMovePrefix[static_cast<int>(a.move)]) + "-" + labels_[a.label];
}

int LabelScheme::parse_action(std::string_view name) const {
  if (name == "O") return kOutsideAction;
  if (name.size() < 3 || name[1] != '-') throw InvalidArgument("bad tag '" + std::string(name) + "'");
  const auto label = label_index(name.substr(2));
  if (!label) throw InvalidArgument("tag '" + std::string(name) + "' uses an unknown label");
  switch (name[0]) {
    case 'B': return action_index(Move::kBegin, *label);
    case 'I': return action_index(Move::kInside, *label);
    case 'L': return action_index(Move::kLast, *label);
    case 'U': return action_index(Move::kUnit, *label);
    default: throw InvalidArgument("bad tag '" + std::string(name) + "'");
  }
}

LabelScheme LabelScheme::extended(const std::vector<std::string>& new_labels) const {
  for (const auto& l : new_labels)
    if (label_index(l)) throw InvalidArgument("label '" + l + "' already exists in the scheme");
  std::vector<std::string> all = labels_;
  all.insert(all.end(), new_labels.begin(), new_labels.end());
  return LabelScheme(std::move(all));
}

void valid_action_mask(const TransitionState& state, int num_labels, bool is_last_token,
                       std::span<std::uint8_t> mask) {
  std::fill(mask.begin(), mask.end(), std::uint8_t{0});
  if (state.open_label) {
    const int base = 1 + 4 * *state.open_label;
    if (!is_last_token) mask[base + 1] = 1;  // I
    mask[base + 2] = 1;                      // L
    return;
  }
  mask[kOutsideAction] = 1;
  for (int l = 0; l < num_labels; ++l) {
    if (!is_last_token) mask[1 + 4 * l] = 1;  // B
    mask[4 + 4 * l] = 1;                      // U
  }
}

std::vector<int> valid_actions(const TransitionState& state, const LabelScheme& scheme,
                               bool is_last_token) {
  std::vector<std::uint8_t> mask(scheme.num_actions());
  valid_action_mask(state, scheme.num_labels(), is_last_token, mask);
  std::vector<int> out;
  for (int a = 0; a < scheme.num_actions(); ++a)
    if (mask[a]) out.push_back(a);
  return out;
}

TransitionState apply_action(const TransitionState& state, const LabelScheme& scheme, int action,
                             bool is_last_token) {
  std::vector<std::uint8_t> mask(scheme.num_actions());
  valid_action_mask(state, scheme.num_labels(), is_last_token, mask);
  if (action < 0 || action >= scheme.num_actions() || !mask[action])
    throw InvalidArgument("illegal action at position " + std::to_string(state.position));
  TransitionState next{state.position + 1, state.open_label};
  const Action a = scheme.action(action);
  if (a.move == Move::kBegin) next.open_label = a.label;
  if (a.move == Move::kLast) next.open_label.reset();
  return next;
}

bool is_valid_sequence(std::span<const int> actions, const LabelScheme& scheme) {
  std::vector<std::uint8_t> mask(scheme.num_actions());
  TransitionState state;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const bool last = i + 1 == actions.size();
    valid_action_mask(state, scheme.num_labels(), last, mask);
    const int a = actions[i];
    if (a < 0 || a >= scheme.num_actions() || !mask[a]) return false;
    state = apply_action(state, scheme, a, last);
  }
  return !state.open_label;
}

std::vector<int> gold_actions(std::span<const Token> tokens, std::span<const EntitySpan> spans,
                              const LabelScheme& scheme) {
  std::unordered_map<std::size_t, std::size_t> by_start, by_end;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    by_start[tokens[i].start] = i;
    by_end[tokens[i].end] = i;
  }
  std::vector<int> actions(tokens.size(), kOutsideAction);
  std::vector<bool> covered(tokens.size(), false);
  for (const EntitySpan& s : spans) {
    const auto label = scheme.label_index(s.label);
    if (!label) throw InvalidArgument("label '" + s.label + "' is not in the scheme");
    const auto a = by_start.find(s.start);
    const auto b = by_end.find(s.end);
    if (a == by_start.end() || b == by_end.end() || b->second < a->second)
      throw ValidationError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                            ") is not aligned to token boundaries");
    const std::size_t first = a->second;
    const std::size_t last = b->second;
    for (std::size_t i = first; i <= last; ++i) {
      if (covered[i]) throw ValidationError("overlapping spans");
      covered[i] = true;
    }
    if (first == last) {
      actions[first] = scheme.action_index(Move::kUnit, *label);
      continue;
    }
    actions[first] = scheme.action_index(Move::kBegin, *label);
    for (std::size_t i = first + 1; i < last; ++i) actions[i] = scheme.action_index(Move::kInside, *label);
    actions[last] = scheme.action_index(Move::kLast, *label);
  }
  return actions;
}

std::vector<EntitySpan> actions_to_spans(std::span<const Token> tokens, std::span<const int> actions,
                                         const LabelScheme& scheme) {
  if (tokens.size() != actions.size()) throw InvalidArgument("one action per token expected");
  if (!is_valid_sequence(actions, scheme)) throw InvalidArgument("ill-formed BILOU sequence");
  std::vector<EntitySpan> spans;
  std::size_t open_start = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const Action a = scheme.action(actions[i]);
    switch (a.move) {
      case Move::kUnit:
        spans.push_back({tokens[i].start, tokens[i].end, scheme.labels()[a.label]});
        break;
      case Move::kBegin:
        open_start = tokens[i].start;
        break;
      case Move::kLast:
        spans.push_back({open_start, tokens[i].end, scheme.labels()[a.label]});
        break;
      default:
        break;
    }
  }
  return spans;
}

std::vector<EntitySpan> tags_to_spans(std::span<const Token> tokens,
                                      std::span<const std::string> tags) {
  if (tokens.size() != tags.size()) throw InvalidArgument("one tag per token expected");
  std::vector<std::string> labels;
  for (const auto& t : tags) {
    if (t == "O") continue;
    if (t.size() < 3 || t[1] != '-') throw InvalidArgument("bad tag '" + t + "'");
    const std::string l = t.substr(2);
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
  }
  const LabelScheme scheme(labels);
  std::vector<int> actions;
  actions.reserve(tags.size());
  for (const auto& t : tags) actions.push_back(scheme.parse_action(t));
  return actions_to_spans(tokens, actions, scheme);
}

std::vector<std::string> spans_to_tags(std::span<const Token> tokens,
                                       std::span<const EntitySpan> spans) {
  std::vector<std::string> labels;
  for (const auto& s : spans)
    if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) labels.push_back(s.label);
  const LabelScheme scheme(labels);
  const auto actions = gold_actions(tokens, spans, scheme);
  std::vector<std::string> tags;
  tags.reserve(actions.size());
  for (int a : actions) tags.push_back(scheme.action_name(a));
  return tags;
}

}  // namespace medner
