#pragma once

#include <cstdint>

namespace otmcp::plant {

/// Process constants shared by the Modbus and node-model mocks.
struct Constants {
  double ambient_c = 20.0;
  double heater_gain = 0.005;  // degC per unit heater power per second
  double cooling_rate = 0.1;   // per second
  double relaxation = 0.2;     // fraction of the gap closed per 1 s tick
  double pressure_high = 120.0;
  double pressure_low = 101.3;
  double flow_high = 60.0;
  double flow_low = 0.0;
  double max_scaled = 6553.5;  // largest value a x10 fixed-point uint16 can hold
};

/// Simulated plant in physical units. Sensors evolve in `tick`; actuators
/// are set by the owning mock.
struct PlantState {
  double temperature = 23.4;
  double pressure = 101.3;
  double flow_rate = 50.0;
  double tank_level = 75.0;
  double vibration = 1.2;
  double ph = 7.0;
  double humidity = 45.0;
  double motor_speed = 1450.0;
  std::uint32_t production_count = 0;

  double valve_position = 0.0;
  double heater_power = 0.0;
  double fan_speed = 0.0;
  double conveyor_speed = 0.0;
  bool pump_running = true;
  bool emergency_stop = false;

  std::uint64_t ticks = 0;

  bool operator==(const PlantState&) const = default;
};

/// Advances the plant by `dt_s` seconds:
///   temperature += dt * (heater_gain * heater_power - cooling_rate * (temperature - ambient))
///   pressure, flow_rate relax toward their high (pump on) or low (pump off) targets
///   production_count += 1 while conveyor_speed > 0
/// All sensor values are clamped to [0, max_scaled].
void tick(PlantState& state, double dt_s, const Constants& k = {});

}  // namespace otmcp::plant
