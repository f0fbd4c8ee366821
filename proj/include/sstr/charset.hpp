// Copyright 2026 The SemanticSTR Desk Authors
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

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sstr {

// Case-insensitive alphanumeric charset: 0-9 -> 0..9, a-z -> 10..35, then
// the special tokens.
namespace charset {

inline constexpr int kGo = 36;
inline constexpr int kEos = 37;
inline constexpr int kPad = 38;
inline constexpr int kSize = 39;
inline constexpr int kNumSymbols = 36;

// Longest transcription a sample may carry; the decoder emits at most
// kMaxLength + 1 tokens (EOS included), one per feature column.
inline constexpr std::size_t kMaxLength = 25;
inline constexpr std::size_t kMaxSteps = kMaxLength + 1;

// -1 for characters outside the charset.
int index_of(char c);
char symbol(int index);

// Lowercases and drops characters outside the charset.
std::string normalize(std::string_view text);

// Token indices of normalize(text) followed by EOS.
std::vector<int> encode(std::string_view text);

// Maps indices back to symbols, stopping at EOS and skipping GO/PAD.
std::string decode(std::span<const int> tokens);

}  // namespace charset
}  // namespace sstr
