#pragma once

#include "qlidar/params.hpp"

/// Parameter sets for the desk-scale reproductions of the stationary-target,
/// jamming and rangefinding experiments.
///
/// Measured quantities (efficiencies, loss, background, window, integration
/// time) are taken as quoted for the experiment. The pair rate is the one
/// free parameter and is set so the closed-form model lands on the reported
/// distinguishabilities and the 17x averaging factor; see README.
namespace qlidar::presets {

inline constexpr double kEtaS = 0.2329;
inline constexpr double kEtaI = 0.1958;
inline constexpr double kSourcePairRate = 6.8e6;     ///< [Hz] "50 uW" source
inline constexpr double kHighPumpPairRate = 60e6;    ///< [Hz] 52 dB regime

/// 33.5 dB loss, 1 MHz background, tau_c = 2 ns, T = 0.1 s.
SystemParams stationary_33db();
/// 52 dB loss, 1 MHz background, tau_c = 2 ns, T = 1 s.
SystemParams stationary_52db();
/// 33.5 dB loss, 2.3 MHz mean background, T = 0.1 s.
SystemParams jamming();
/// 33.5 dB loss, 0.1 MHz background, tau_c = 0.2 ns, T = 0.1 s.
SystemParams rangefinding();

}  // namespace qlidar::presets
