#pragma once

#include <cstddef>
#include <stdexcept>

#include "pemlab/machine.hpp"

namespace pemlab::keys {

// A key and its input position share one word: key * 2^24 + position. Word
// order on packed values is (key, position) order, which makes every key
// distinct while keeping one word per element.
inline constexpr int kIndexBits = 24;
inline constexpr std::size_t kMaxIndex = (std::size_t{1} << kIndexBits) - 1;
inline constexpr Word kMaxKey = (Word{1} << (62 - kIndexBits)) - 1;

inline bool packable(Word key) { return key >= -kMaxKey && key <= kMaxKey; }

inline Word pack(Word key, std::size_t index) {
  if (!packable(key)) throw std::out_of_range("key outside the packable range");
  if (index > kMaxIndex) throw std::out_of_range("index outside the packable range");
  return key * (Word{1} << kIndexBits) + static_cast<Word>(index);
}

// Largest packed value carrying this key: p <= pack_upper(k) iff key(p) <= k.
inline Word pack_upper(Word key) { return pack(key, kMaxIndex); }

inline Word key_of(Word packed) { return packed >> kIndexBits; }
inline std::size_t index_of(Word packed) { return static_cast<std::size_t>(packed & static_cast<Word>(kMaxIndex)); }

}  // namespace pemlab::keys
