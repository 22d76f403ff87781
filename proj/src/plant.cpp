#include "otmcp/plant.hpp"

#include <algorithm>
#include <limits>

namespace otmcp::plant {

namespace {

double clamp_sensor(double v, const Constants& k) { return std::clamp(v, 0.0, k.max_scaled); }

}  // namespace

void tick(PlantState& s, double dt_s, const Constants& k) {
  if (!(dt_s > 0.0)) return;

  s.temperature += dt_s * (k.heater_gain * s.heater_power - k.cooling_rate * (s.temperature - k.ambient_c));

  const double alpha = std::min(1.0, k.relaxation * dt_s);
  const double p_target = s.pump_running ? k.pressure_high : k.pressure_low;
  const double f_target = s.pump_running ? k.flow_high : k.flow_low;
  s.pressure += alpha * (p_target - s.pressure);
  s.flow_rate += alpha * (f_target - s.flow_rate);

  if (s.conveyor_speed > 0.0 && s.production_count < std::numeric_limits<std::uint16_t>::max()) {
    ++s.production_count;
  }

  s.temperature = clamp_sensor(s.temperature, k);
  s.pressure = clamp_sensor(s.pressure, k);
  s.flow_rate = clamp_sensor(s.flow_rate, k);
  ++s.ticks;
}

}  // namespace otmcp::plant
