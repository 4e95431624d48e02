#pragma once

// KPI computation: throughput, goodput, Jain's fairness index, invalid-action
// rate, time-quantized curves and multi-run aggregation.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leasch/errors.hpp"

namespace leasch::kpi {

inline constexpr int kSchemaVersion = 1;

// Decision log codes besides a UE index.
inline constexpr std::int16_t kIdle = -1;        // scheduler chose an ineligible UE
inline constexpr std::int16_t kNoEligible = -2;  // scheduler not invoked

/// Per-slot, per-UE accounting of one simulation run. Slot-major arrays,
/// index slot * n_ue + ue.
struct KpiRecord {
  std::string scheduler;
  std::uint64_t seed = 0;
  std::string fingerprint;
  int n_ue = 0;
  int numerology = 0;
  double slot_duration_s = 1e-3;
  int rbgs_per_slot = 0;
  int n_slots = 0;
  std::vector<std::int64_t> scheduled_bits;
  std::vector<std::int64_t> delivered_bits;
  std::vector<std::int32_t> grants;            // RBGs granted in the slot
  std::vector<std::string> eligible_bitmap;    // one char per RBG of the slot
  std::vector<std::int16_t> decisions;         // one entry per RBG
  std::int64_t invoked_rbgs = 0;
  std::int64_t idle_by_membership = 0;

  std::size_t at(int slot, int ue) const {
    return static_cast<std::size_t>(slot) * static_cast<std::size_t>(n_ue) + static_cast<std::size_t>(ue);
  }
  double seconds() const { return n_slots * slot_duration_s; }

  std::vector<std::int64_t> ue_totals(const std::vector<std::int64_t>& per_slot) const {
    std::vector<std::int64_t> out(static_cast<std::size_t>(n_ue), 0);
    for (int t = 0; t < n_slots; ++t) {
      for (int u = 0; u < n_ue; ++u) out[static_cast<std::size_t>(u)] += per_slot[at(t, u)];
    }
    return out;
  }
};

/// (sum x)^2 / (n * sum x^2); nullopt when every entry is zero.
inline std::optional<double> jfi(std::span<const double> x) {
  if (x.empty()) return std::nullopt;
  double s = 0.0, s2 = 0.0;
  for (double v : x) {
    if (v < 0.0) throw ValidationError("JFI needs non-negative values");
    s += v;
    s2 += v * v;
  }
  if (s2 == 0.0) return std::nullopt;
  return (s * s) / (static_cast<double>(x.size()) * s2);
}

struct RunSummary {
  std::string scheduler;
  std::uint64_t seed = 0;
  double throughput_bps = 0.0;
  double goodput_bps = 0.0;
  double jfi_throughput = std::nan("");
  double jfi_goodput = std::nan("");
  double jfi_grants = std::nan("");
  double invalid_rate = 0.0;
  std::int64_t total_rbgs = 0;
  std::int64_t granted_rbgs = 0;
  std::int64_t invoked_rbgs = 0;
  std::int64_t idle_rbgs = 0;
};

inline double jfi_or_nan(std::span<const double> x) { return jfi(x).value_or(std::nan("")); }

inline RunSummary summarize_run(const KpiRecord& rec) {
  if (rec.n_slots <= 0 || rec.n_ue <= 0) throw ValidationError("cannot summarize an empty record");
  const double secs = rec.seconds();
  const auto sched = rec.ue_totals(rec.scheduled_bits);
  const auto deliv = rec.ue_totals(rec.delivered_bits);
  std::vector<double> tput(sched.size()), gput(sched.size()), grants(sched.size(), 0.0);
  RunSummary s;
  s.scheduler = rec.scheduler;
  s.seed = rec.seed;
  for (std::size_t u = 0; u < sched.size(); ++u) {
    tput[u] = static_cast<double>(sched[u]) / secs;
    gput[u] = static_cast<double>(deliv[u]) / secs;
    s.throughput_bps += tput[u];
    s.goodput_bps += gput[u];
  }
  for (int t = 0; t < rec.n_slots; ++t) {
    for (int u = 0; u < rec.n_ue; ++u) grants[static_cast<std::size_t>(u)] += rec.grants[rec.at(t, u)];
  }
  s.jfi_throughput = jfi_or_nan(tput);
  s.jfi_goodput = jfi_or_nan(gput);
  s.jfi_grants = jfi_or_nan(grants);
  s.total_rbgs = static_cast<std::int64_t>(rec.decisions.size());
  for (double g : grants) s.granted_rbgs += static_cast<std::int64_t>(g);
  s.invoked_rbgs = rec.invoked_rbgs;
  s.idle_rbgs = rec.idle_by_membership;
  s.invalid_rate = rec.invoked_rbgs > 0
                       ? static_cast<double>(rec.idle_by_membership) / static_cast<double>(rec.invoked_rbgs)
                       : 0.0;
  return s;
}

struct Curves {
  int n_units = 0;
  std::vector<double> unit_seconds;
  std::vector<std::vector<double>> ue_throughput;  // [unit][ue], bits/s
  std::vector<std::vector<double>> ue_goodput;
  std::vector<double> cell_throughput;
  std::vector<double> cell_goodput;
};

/// Slot t falls in unit floor(t * n_units / n_slots).
inline Curves quantize_curves(const KpiRecord& rec, int n_units = 10) {
  if (n_units < 1) throw ValidationError("need at least one time unit");
  if (rec.n_slots < n_units) throw ValidationError("fewer slots than time units");
  Curves c;
  c.n_units = n_units;
  const auto nu = static_cast<std::size_t>(n_units);
  const auto nue = static_cast<std::size_t>(rec.n_ue);
  std::vector<std::vector<std::int64_t>> sb(nu, std::vector<std::int64_t>(nue, 0)), db = sb;
  std::vector<int> slots(nu, 0);
  for (int t = 0; t < rec.n_slots; ++t) {
    const auto b = static_cast<std::size_t>(static_cast<std::int64_t>(t) * n_units / rec.n_slots);
    slots[b] += 1;
    for (int u = 0; u < rec.n_ue; ++u) {
      sb[b][static_cast<std::size_t>(u)] += rec.scheduled_bits[rec.at(t, u)];
      db[b][static_cast<std::size_t>(u)] += rec.delivered_bits[rec.at(t, u)];
    }
  }
  for (std::size_t b = 0; b < nu; ++b) {
    const double secs = slots[b] * rec.slot_duration_s;
    c.unit_seconds.push_back(secs);
    std::vector<double> tu(nue), gu(nue);
    std::int64_t st = 0, gt = 0;
    for (std::size_t u = 0; u < nue; ++u) {
      tu[u] = static_cast<double>(sb[b][u]) / secs;
      gu[u] = static_cast<double>(db[b][u]) / secs;
      st += sb[b][u];
      gt += db[b][u];
    }
    c.ue_throughput.push_back(std::move(tu));
    c.ue_goodput.push_back(std::move(gu));
    c.cell_throughput.push_back(static_cast<double>(st) / secs);
    c.cell_goodput.push_back(static_cast<double>(gt) / secs);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Aggregation across runs

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

inline MetricStats stats_of(const std::vector<double>& v) {
  MetricStats m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct SchedulerAggregate {
  std::string scheduler;
  std::vector<std::uint64_t> seeds;
  MetricStats throughput_bps;
  MetricStats goodput_bps;
  MetricStats jfi_throughput;
  MetricStats jfi_grants;
  MetricStats invalid_rate;
};

/// Relative difference (a - b) / b of the means over the shared seed set.
struct PairedDelta {
  std::string scheduler;
  std::string baseline;
  double throughput = 0.0;
  double goodput = 0.0;
  double jfi = 0.0;
};

struct Aggregate {
  std::vector<SchedulerAggregate> schedulers;
  std::vector<PairedDelta> deltas;

  const SchedulerAggregate& of(const std::string& name) const {
    for (const auto& s : schedulers) {
      if (s.scheduler == name) return s;
    }
    throw ValidationError("no aggregate for scheduler " + name);
  }
  const PairedDelta& delta(const std::string& a, const std::string& b) const {
    for (const auto& d : deltas) {
      if (d.scheduler == a && d.baseline == b) return d;
    }
    throw ValidationError("no delta for " + a + " vs " + b);
  }
};

inline double relative_delta(double a, double b) { return (a - b) / b; }

/// Groups runs by scheduler label (first-seen order). With `paired`, every
/// group must cover the same seed set and all ordered pairs get deltas.
inline Aggregate aggregate_runs(const std::vector<RunSummary>& runs, bool paired = true) {
  if (runs.empty()) throw ValidationError("nothing to aggregate");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunSummary*>> groups;
  for (const auto& r : runs) {
    if (!groups.contains(r.scheduler)) order.push_back(r.scheduler);
    groups[r.scheduler].push_back(&r);
  }
  Aggregate agg;
  std::optional<std::set<std::uint64_t>> reference;
  for (const auto& name : order) {
    const auto& g = groups[name];
    SchedulerAggregate a;
    a.scheduler = name;
    std::vector<double> t, gp, j, jg, inv;
    std::set<std::uint64_t> seeds;
    for (const auto* r : g) {
      if (!seeds.insert(r->seed).second) throw ValidationError("duplicate seed for scheduler " + name);
      a.seeds.push_back(r->seed);
      t.push_back(r->throughput_bps);
      gp.push_back(r->goodput_bps);
      j.push_back(r->jfi_throughput);
      jg.push_back(r->jfi_grants);
      inv.push_back(r->invalid_rate);
    }
    if (paired) {
      if (!reference) {
        reference = seeds;
      } else if (*reference != seeds) {
        throw ValidationError("paired comparison needs the same seed set for every scheduler");
      }
    }
    a.throughput_bps = stats_of(t);
    a.goodput_bps = stats_of(gp);
    a.jfi_throughput = stats_of(j);
    a.jfi_grants = stats_of(jg);
    a.invalid_rate = stats_of(inv);
    agg.schedulers.push_back(std::move(a));
  }
  if (paired) {
    for (const auto& a : agg.schedulers) {
      for (const auto& b : agg.schedulers) {
        if (a.scheduler == b.scheduler) continue;
        agg.deltas.push_back({a.scheduler, b.scheduler,
                              relative_delta(a.throughput_bps.mean, b.throughput_bps.mean),
                              relative_delta(a.goodput_bps.mean, b.goodput_bps.mean),
                              relative_delta(a.jfi_throughput.mean, b.jfi_throughput.mean)});
      }
    }
  }
  return agg;
}

// ---------------------------------------------------------------------------
// Output formats

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const RunSummary& s) {
  return {{"scheduler", s.scheduler},
          {"seed", s.seed},
          {"throughput_bps", s.throughput_bps},
          {"goodput_bps", s.goodput_bps},
          {"jfi_throughput", number_or_null(s.jfi_throughput)},
          {"jfi_goodput", number_or_null(s.jfi_goodput)},
          {"jfi_grants", number_or_null(s.jfi_grants)},
          {"invalid_rate", s.invalid_rate},
          {"total_rbgs", s.total_rbgs},
          {"granted_rbgs", s.granted_rbgs},
          {"invoked_rbgs", s.invoked_rbgs},
          {"idle_rbgs", s.idle_rbgs}};
}

inline nlohmann::json to_json(const MetricStats& m) {
  return {{"mean", number_or_null(m.mean)}, {"std", number_or_null(m.std)}};
}

inline nlohmann::json to_json(const Aggregate& a) {
  nlohmann::json j;
  j["schedulers"] = nlohmann::json::array();
  for (const auto& s : a.schedulers) {
    j["schedulers"].push_back({{"scheduler", s.scheduler},
                               {"runs", s.seeds.size()},
                               {"seeds", s.seeds},
                               {"throughput_bps", to_json(s.throughput_bps)},
                               {"goodput_bps", to_json(s.goodput_bps)},
                               {"jfi_throughput", to_json(s.jfi_throughput)},
                               {"jfi_grants", to_json(s.jfi_grants)},
                               {"invalid_rate", to_json(s.invalid_rate)}});
  }
  j["paired_deltas"] = nlohmann::json::array();
  for (const auto& d : a.deltas) {
    j["paired_deltas"].push_back({{"scheduler", d.scheduler},
                                  {"baseline", d.baseline},
                                  {"throughput", number_or_null(d.throughput)},
                                  {"goodput", number_or_null(d.goodput)},
                                  {"jfi", number_or_null(d.jfi)}});
  }
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

/// One row per (slot, UE). `decision` is the number of RBGs granted to the UE
/// in the slot; `eligible_bitmap` has one 0/1 character per RBG.
inline void write_run_csv(const std::string& path, const KpiRecord& rec) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "# fingerprint=" << rec.fingerprint << " seed=" << rec.seed << " scheduler=" << rec.scheduler
      << " numerology=" << rec.numerology << " slot_duration_s=" << rec.slot_duration_s
      << " rbgs_per_slot=" << rec.rbgs_per_slot << " invoked_rbgs=" << rec.invoked_rbgs
      << " idle_rbgs=" << rec.idle_by_membership << '\n';
  out << "slot,ue,scheduled_bits,delivered_bits,decision,eligible_bitmap\n";
  for (int t = 0; t < rec.n_slots; ++t) {
    for (int u = 0; u < rec.n_ue; ++u) {
      const auto i = rec.at(t, u);
      out << t << ',' << u << ',' << rec.scheduled_bits[i] << ',' << rec.delivered_bits[i] << ','
          << rec.grants[i] << ',' << rec.eligible_bitmap[i] << '\n';
    }
  }
}

/// Appends the quantized curves of one run, long format.
inline void write_curves_csv(std::ostream& out, const KpiRecord& rec, const Curves& c) {
  out.precision(17);
  for (int b = 0; b < c.n_units; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    for (int u = 0; u < rec.n_ue; ++u) {
      out << rec.scheduler << ',' << rec.seed << ',' << b << ',' << u << ','
          << c.ue_throughput[bi][static_cast<std::size_t>(u)] << ',' << c.ue_goodput[bi][static_cast<std::size_t>(u)]
          << '\n';
    }
    out << rec.scheduler << ',' << rec.seed << ',' << b << ",cell," << c.cell_throughput[bi] << ','
        << c.cell_goodput[bi] << '\n';
  }
}

inline const char* curves_csv_header() { return "scheduler,seed,unit,ue,throughput_bps,goodput_bps\n"; }

}  // namespace leasch::kpi
