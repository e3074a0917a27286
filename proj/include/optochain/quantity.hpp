#pragma once

#include <optional>
#include <string>

namespace optochain {

enum class Dimension { Frequency, Length, Mass };

/// Parses "<number> <unit>" into SI (angular frequency in rad/s, length in
/// m, mass in atomic mass units). Cyclic units (Hz, kHz, MHz, GHz) are
/// multiplied by 2 pi. "kappa" is accepted for frequencies when `kappa`
/// (rad/s) is known. Throws ConfigError on a missing or unknown unit.
double parse_quantity(const std::string& text, Dimension dimension, std::optional<double> kappa = std::nullopt);

}  // namespace optochain
