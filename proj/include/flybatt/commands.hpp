#pragma once

// Implementations behind the command-line subcommands. Each returns a process
// exit status: 0 success, 2 configuration error, 3 numeric failure.

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "flybatt/endurance.hpp"
#include "flybatt/engine.hpp"

namespace flybatt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// Default output directory: $FLYBATT_OUT_DIR, else the working directory.
inline std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("FLYBATT_OUT_DIR"); env && *env) return env;
  return ".";
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

struct RunOptions {
  std::string scenario;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
};

inline int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Scenario s = load_scenario(opt.scenario);
    if (opt.seed) s.sim.seed = *opt.seed;
    if (opt.duration) {
      if (!(*opt.duration > 0.0)) throw ConfigError("--duration must be > 0");
      s.sim.duration = *opt.duration;
    }
    const auto dir = opt.out_dir.empty() ? default_out_dir() : opt.out_dir;
    std::filesystem::create_directories(dir);
    const auto tel_path = dir / (s.name + "_telemetry.csv");
    const auto sum_path = dir / (s.name + "_summary.csv");
    std::ofstream tel(tel_path);
    if (!tel) throw ConfigError("cannot write " + tel_path.string());
    std::vector<std::string> warnings;
    const MissionResult r = run_mission(s, &tel, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    std::ofstream sum(sum_path);
    if (!sum) throw ConfigError("cannot write " + sum_path.string());
    write_summary_csv(sum, r.summary);
    write_summary_table(out, r.summary);
    out << "telemetry: " << tel_path.string() << " (" << r.telemetry_rows << " rows)\n";
    out << "summary:   " << sum_path.string() << '\n';
    return kExitOk;
  });
}

struct AnalyzeOptions {
  double m0 = 0.63;
  double phi = 190.0 / 820.0;
  double gamma = 128.5;
  double k_p = 164.4;
  std::optional<double> observed_time;  // s; enables the design comparison
  std::string curve_csv;                // optional output path
};

inline int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    EnduranceInputs in;
    in.m0 = opt.m0;
    in.phi = opt.phi;
    in.gamma = opt.gamma;
    in.k_p = opt.k_p;
    const EnduranceReport r = flight_time(in);
    char buf[128];
    auto line = [&](const char* k, const char* fmt, double v) {
      std::snprintf(buf, sizeof buf, fmt, v);
      out << "  " << k << std::string(24 - std::min<std::size_t>(24, std::strlen(k)), ' ') << buf << '\n';
    };
    out << "endurance report\n";
    line("m0", "%.4f kg", in.m0);
    line("phi", "%.6f", in.phi);
    line("battery mass", "%.4f kg", r.battery_mass);
    line("total mass", "%.4f kg", r.total_mass);
    line("hover power", "%.3f W", r.hover_power);
    line("flight time", "%.1f s", r.flight_time);
    line("normalized time", "%.4f", r.normalized_time);
    if (opt.observed_time) {
      const DesignComparison d = design_comparison(in, *opt.observed_time);
      out << "design comparison\n";
      line("observed time", "%.1f s", d.observed_time);
      line("observed normalized", "%.4f", d.observed_normalized);
      line("gamma / k_p", "%.6f", d.calibrated_gamma_over_kp);
      line("optimal phi", "%.6f", d.optimal_phi);
      line("optimal battery mass", "%.4f kg", d.optimal_battery_mass);
      line("optimal total mass", "%.4f kg", d.optimal_total_mass);
      line("optimal flight time", "%.1f s", d.optimal_time);
    }
    if (!opt.curve_csv.empty()) {
      std::ofstream csv(opt.curve_csv);
      if (!csv) throw ConfigError("cannot write " + opt.curve_csv);
      csv << "phi,normalized_time\n";
      for (const auto& p : normalized_curve(default_phi_grid())) csv << fmt9(p.phi) << ',' << fmt9(p.normalized_time) << '\n';
      out << "curve: " << opt.curve_csv << '\n';
    }
    return kExitOk;
  });
}

/// "a,b,c" lists values; "lo:hi:n" gives n evenly spaced values; "" is empty.
inline std::vector<std::string> parse_range(const std::string& spec) {
  std::vector<std::string> out;
  const std::string t = detail::trim(spec);
  if (t.empty()) return out;
  if (t.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(t);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError("range must be lo:hi:count");
    double lo = 0.0, hi = 0.0;
    long long n = 0;
    try {
      lo = detail::parse_double(parts[0]);
      hi = detail::parse_double(parts[1]);
      n = detail::parse_int(parts[2]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("range: ") + e.what());
    }
    if (n < 1) throw ConfigError("range count must be >= 1");
    for (long long i = 0; i < n; ++i)
      out.push_back(fmt9(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)));
    return out;
  }
  std::stringstream ss(t);
  std::string v;
  while (std::getline(ss, v, ',')) out.push_back(detail::trim(v));
  return out;
}

struct SweepRow {
  std::string value;
  MissionSummary summary;
};

inline std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& parameter,
                                       const std::vector<std::string>& values, unsigned threads = 0) {
  const std::string key = resolve_scenario_key(parameter);
  std::vector<Scenario> scenarios;
  for (const auto& v : values) {
    Scenario s = base;
    set_scenario_value(s, key, v);
    validate(s);
    scenarios.push_back(std::move(s));
  }
  std::vector<SweepRow> rows(values.size());
  std::vector<std::exception_ptr> errors(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < scenarios.size();) {
      try {
        rows[i] = {values[i], run_mission(scenarios[i]).summary};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, values.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::string& parameter, const std::vector<SweepRow>& rows) {
  os << parameter << ",total_time,solo_time,extension_factor,switches,contact_failures,"
     << "secondary_depletions,primary_energy_wh,termination\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    os << r.value << ',' << fmt9(s.total_time) << ',' << fmt9(s.solo_time) << ',' << fmt9(s.extension_factor)
       << ',' << s.switches << ',' << s.contact_failures << ',' << s.secondary_depletions << ','
       << fmt9(s.primary_energy) << ',' << s.termination << '\n';
  }
}

struct SweepOptions {
  std::string scenario;
  std::string parameter;
  std::string range;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

inline int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Scenario s = load_scenario(opt.scenario);
    if (opt.seed) s.sim.seed = *opt.seed;
    const std::string key = resolve_scenario_key(opt.parameter);
    const auto values = parse_range(opt.range);
    const auto rows = run_sweep(s, key, values, opt.threads);
    const auto dir = opt.out_dir.empty() ? default_out_dir() : opt.out_dir;
    std::filesystem::create_directories(dir);
    const auto path = dir / (s.name + "_sweep_" + key + ".csv");
    std::ofstream csv(path);
    if (!csv) throw ConfigError("cannot write " + path.string());
    write_sweep_csv(csv, key, rows);
    write_sweep_csv(out, key, rows);
    out << "sweep: " << path.string() << '\n';
    return kExitOk;
  });
}

}  // namespace flybatt
