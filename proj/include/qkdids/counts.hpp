#pragma once

#include <array>
#include <cstdint>

namespace qkdids {

enum Intensity : int { kSignal = 0, kWeak = 1, kVacuum = 2 };
enum Basis : int { kZ = 0, kX = 1 };

inline constexpr int kIntensities = 3;
inline constexpr int kBases = 2;

/// Counts for one (intensity, Alice-basis) cell. `sifted` counts emissions
/// where Bob measured in the same basis; detections and errors are only
/// tallied on those.
struct CellCounts {
  std::uint64_t emitted = 0;
  std::uint64_t sifted = 0;
  std::uint64_t detected = 0;
  std::uint64_t errors = 0;

  CellCounts& operator+=(const CellCounts& o) {
    emitted += o.emitted;
    sifted += o.sifted;
    detected += o.detected;
    errors += o.errors;
    return *this;
  }
  bool operator==(const CellCounts&) const = default;
};

struct CellTable {
  std::array<std::array<CellCounts, kBases>, kIntensities> cell{};

  CellCounts& at(int mu, int basis) { return cell[mu][basis]; }
  const CellCounts& at(int mu, int basis) const { return cell[mu][basis]; }

  std::uint64_t emitted() const {
    std::uint64_t n = 0;
    for (const auto& row : cell)
      for (const auto& c : row) n += c.emitted;
    return n;
  }

  CellTable& operator+=(const CellTable& o) {
    for (int i = 0; i < kIntensities; ++i)
      for (int b = 0; b < kBases; ++b) cell[i][b] += o.cell[i][b];
    return *this;
  }
  bool operator==(const CellTable&) const = default;
};

}  // namespace qkdids
