#include "qlidar/presets.hpp"

namespace qlidar::presets {

namespace {

SourceSetup base_setup() {
  SourceSetup s;
  s.pair_rate = kSourcePairRate;
  s.loss_db = 33.5;
  s.eta_s = kEtaS;
  s.eta_i = kEtaI;
  s.signal_background_rate = 1e6;
  s.tau_c = 2e-9;
  s.t_int = 0.1;
  return s;
}

}  // namespace

SystemParams stationary_33db() { return make_params(base_setup()); }

SystemParams stationary_52db() {
  auto s = base_setup();
  s.pair_rate = kHighPumpPairRate;
  s.loss_db = 52.0;
  s.t_int = 1.0;
  return make_params(s);
}

SystemParams jamming() {
  auto s = base_setup();
  s.signal_background_rate = 2.3e6;
  return make_params(s);
}

SystemParams rangefinding() {
  auto s = base_setup();
  s.signal_background_rate = 0.1e6;
  s.tau_c = 0.2e-9;
  return make_params(s);
}

}  // namespace qlidar::presets
