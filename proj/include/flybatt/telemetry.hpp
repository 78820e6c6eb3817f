#pragma once

// Telemetry CSV. The first line is "# schema=1", the second the fixed header.
// Numbers are written with 9 significant digits so a written file re-parses to
// the same values it was written from.

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "flybatt/core.hpp"

namespace flybatt {

inline constexpr int kTelemetrySchema = 1;

inline const char* telemetry_header() {
  return "time,bus_voltage,current_total,current_primary,current_secondary,power,loss_power,"
         "active_source,primary_ocv,secondary_ocv,main_x,main_y,main_z,fb_id,fb_phase,fb_x,fb_y,fb_z,"
         "normal_force,required_friction,events";
}

struct TelemetryRow {
  double time = 0.0;
  double bus_voltage = 0.0;
  double current_total = 0.0;
  double current_primary = 0.0;
  double current_secondary = 0.0;
  double power = 0.0;
  double loss_power = 0.0;
  std::string active_source;
  double primary_ocv = 0.0;
  double secondary_ocv = 0.0;
  Vec3 main_position = Vec3::Zero();
  int fb_id = -1;
  std::string fb_phase;
  Vec3 fb_position = Vec3::Zero();
  double normal_force = 0.0;
  double required_friction = 0.0;
  std::string events;  // ';'-separated
};

/// Canonical number formatting used by every CSV the tool writes.
inline std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Rounds through the canonical text form.
inline double canonical(double v) { return std::stod(fmt9(v)); }

class TelemetryWriter {
 public:
  explicit TelemetryWriter(std::ostream& os) : os_(os) {
    os_ << "# schema=" << kTelemetrySchema << '\n' << telemetry_header() << '\n';
  }

  void write(const TelemetryRow& r) {
    std::string line;
    line.reserve(256);
    auto num = [&](double v) {
      if (!std::isfinite(v)) throw NumericError("telemetry", "row value");
      line += fmt9(v);
      line += ',';
    };
    num(r.time);
    num(r.bus_voltage);
    num(r.current_total);
    num(r.current_primary);
    num(r.current_secondary);
    num(r.power);
    num(r.loss_power);
    line += r.active_source;
    line += ',';
    num(r.primary_ocv);
    num(r.secondary_ocv);
    num(r.main_position.x());
    num(r.main_position.y());
    num(r.main_position.z());
    line += std::to_string(r.fb_id);
    line += ',';
    line += r.fb_phase;
    line += ',';
    num(r.fb_position.x());
    num(r.fb_position.y());
    num(r.fb_position.z());
    num(r.normal_force);
    num(r.required_friction);
    line += r.events;
    line += '\n';
    os_ << line;
    ++rows_;
  }

  std::size_t rows() const { return rows_; }
  void flush() { os_.flush(); }

 private:
  std::ostream& os_;
  std::size_t rows_ = 0;
};

inline TelemetryRow parse_telemetry_row(const std::string& line) {
  std::vector<std::string> f;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  if (f.size() != 21) throw ConfigError("telemetry row has " + std::to_string(f.size()) + " fields, expected 21");
  TelemetryRow r;
  auto d = [&](int i) { return std::stod(f[i]); };
  r.time = d(0);
  r.bus_voltage = d(1);
  r.current_total = d(2);
  r.current_primary = d(3);
  r.current_secondary = d(4);
  r.power = d(5);
  r.loss_power = d(6);
  r.active_source = f[7];
  r.primary_ocv = d(8);
  r.secondary_ocv = d(9);
  r.main_position = Vec3(d(10), d(11), d(12));
  r.fb_id = std::stoi(f[13]);
  r.fb_phase = f[14];
  r.fb_position = Vec3(d(15), d(16), d(17));
  r.normal_force = d(18);
  r.required_friction = d(19);
  r.events = f[20];
  return r;
}

inline std::vector<TelemetryRow> read_telemetry(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "# schema=" + std::to_string(kTelemetrySchema))
    throw ConfigError("telemetry: missing or unsupported schema line");
  if (!std::getline(is, line) || line != telemetry_header())
    throw ConfigError("telemetry: unexpected header");
  std::vector<TelemetryRow> rows;
  while (std::getline(is, line))
    if (!line.empty()) rows.push_back(parse_telemetry_row(line));
  return rows;
}

/// Trapezoidal integral of (bus power + losses) over the rows, in Wh.
inline double integrate_source_energy(const std::vector<TelemetryRow>& rows) {
  double wh = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double a = rows[i - 1].power + rows[i - 1].loss_power;
    const double b = rows[i].power + rows[i].loss_power;
    wh += 0.5 * (a + b) * (rows[i].time - rows[i - 1].time) / 3600.0;
  }
  return wh;
}

}  // namespace flybatt
