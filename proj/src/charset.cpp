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

#include "sstr/charset.hpp"

namespace sstr::charset {

int index_of(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'z') return 10 + (c - 'a');
  if (c >= 'A' && c <= 'Z') return 10 + (c - 'A');
  return -1;
}

char symbol(int index) {
  if (index >= 0 && index < 10) return static_cast<char>('0' + index);
  if (index >= 10 && index < kNumSymbols) return static_cast<char>('a' + (index - 10));
  return '\0';
}

std::string normalize(std::string_view text) {
  std::string out;
  for (char c : text) {
    const int i = index_of(c);
    if (i >= 0) out.push_back(symbol(i));
  }
  return out;
}

std::vector<int> encode(std::string_view text) {
  std::vector<int> out;
  for (char c : text) {
    const int i = index_of(c);
    if (i >= 0) out.push_back(i);
  }
  out.push_back(kEos);
  return out;
}

std::string decode(std::span<const int> tokens) {
  std::string out;
  for (int t : tokens) {
    if (t == kEos) break;
    if (t >= 0 && t < kNumSymbols) out.push_back(symbol(t));
  }
  return out;
}

}  // namespace sstr::charset
