#pragma once

// MCS index table 2 for PDSCH (256QAM), TS 38.214 Table 5.1.3.1-2.
// Indices 28-31 are reserved (retransmission-only) and rejected here.

#include <array>
#include <string>

#include "leasch/errors.hpp"

namespace leasch {

struct McsEntry {
  int index;
  int modulation_order;      // bits per symbol
  double code_rate_x1024;
  int se_x10000;             // spectral efficiency in 1e-4 bits/RE, as published

  double spectral_efficiency() const { return se_x10000 / 10000.0; }
};

inline constexpr int kMcsCount = 28;
inline constexpr int kMaxMcs = kMcsCount - 1;

inline constexpr std::array<McsEntry, kMcsCount> kMcsTable{{
    {0, 2, 120, 2344},    {1, 2, 193, 3770},    {2, 2, 308, 6016},    {3, 2, 449, 8770},
    {4, 2, 602, 11758},   {5, 4, 378, 14766},   {6, 4, 434, 16953},   {7, 4, 490, 19141},
    {8, 4, 553, 21602},   {9, 4, 616, 24063},   {10, 4, 658, 25703},  {11, 6, 466, 27305},
    {12, 6, 517, 30293},  {13, 6, 567, 33223},  {14, 6, 616, 36094},  {15, 6, 666, 39023},
    {16, 6, 719, 42129},  {17, 6, 772, 45234},  {18, 6, 822, 48164},  {19, 6, 873, 51152},
    {20, 8, 682.5, 53320}, {21, 8, 711, 55547}, {22, 8, 754, 58906},  {23, 8, 797, 62266},
    {24, 8, 841, 65703},  {25, 8, 885, 69141},  {26, 8, 916.5, 71602}, {27, 8, 948, 74063},
}};

inline constexpr double kMaxSpectralEfficiency = 7.4063;

inline const McsEntry& mcs_entry(int index) {
  if (index < 0 || index > kMaxMcs) {
    throw ValidationError("MCS index " + std::to_string(index) + " is not a valid data entry (0..27)");
  }
  return kMcsTable[static_cast<std::size_t>(index)];
}

}  // namespace leasch
