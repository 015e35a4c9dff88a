#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace selfret {

using TokenId = std::uint32_t;

// Reserved token ids, fixed across every vocabulary.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kSep = 4;
inline constexpr TokenId kNumSpecials = 5;

using TokenSeq = std::vector<TokenId>;

}  // namespace selfret
