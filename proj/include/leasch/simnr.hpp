#pragma once

// Slot/RBG-level single-cell NR downlink simulator. One scheduler call per
// RBG; HARQ retransmissions run out of band and only block eligibility.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "leasch/errors.hpp"
#include "leasch/kpi.hpp"
#include "leasch/mcs.hpp"
#include "leasch/rng.hpp"
#include "leasch/sched.hpp"

namespace leasch::simnr {

inline constexpr int kSubcarriersPerRb = 12;
inline constexpr int kSymbolsPerSlot = 14;

inline int slots_per_frame(int numerology) {
  if (numerology < 0 || numerology > 2) {
    throw ConfigError("unsupported numerology " + std::to_string(numerology) + " (0, 1 or 2)");
  }
  return 10 << numerology;
}

inline int rbgs_per_slot(int n_rb, int rbg_size) {
  if (n_rb < 1 || rbg_size < 1) throw ConfigError("RB count and RBG size must be positive");
  return (n_rb + rbg_size - 1) / rbg_size;
}

/// floor(SE * RBs * 12 * 14), exact on the published 4-decimal SE values.
inline std::int64_t tb_bits(const McsEntry& mcs, int n_rbs) {
  const std::int64_t res = static_cast<std::int64_t>(n_rbs) * kSubcarriersPerRb * kSymbolsPerSlot;
  return static_cast<std::int64_t>(mcs.se_x10000) * res / 10000;
}

struct GridPreset {
  int numerology;
  int bandwidth_mhz;
  int n_rb;
};

inline constexpr GridPreset kGridPresets[] = {{0, 5, 25}, {1, 10, 24}, {2, 20, 24}};

struct CellConfig {
  int numerology = 0;
  int bandwidth_mhz = 5;
  int n_rb = 25;
  int rbg_size = 2;
  int n_ue = 4;
  int frames = 250;
  double coherence_s = 0.25;
  double bler = 0.1;
  int harq_rtt = 4;      // slots
  int max_retx = 3;
  bool full_buffer = true;
  double p_buffer_on = 0.7;  // per-slot on probability when !full_buffer
  bool custom_grid = false;  // allow (numerology, bandwidth, n_rb) outside the presets
  // true: all RBGs a UE wins in a slot form one transport block, decoded at
  // the end of the slot. false: every RBG grant is its own transport block.
  bool tb_per_slot = true;

  static CellConfig preset(int numerology) {
    for (const auto& p : kGridPresets) {
      if (p.numerology == numerology) {
        CellConfig c;
        c.numerology = p.numerology;
        c.bandwidth_mhz = p.bandwidth_mhz;
        c.n_rb = p.n_rb;
        return c;
      }
    }
    throw ConfigError("no preset for numerology " + std::to_string(numerology));
  }

  double slot_duration_s() const { return 1e-3 / static_cast<double>(1 << numerology); }
  int slots_per_frame() const { return simnr::slots_per_frame(numerology); }
  int rbgs_per_slot() const { return simnr::rbgs_per_slot(n_rb, rbg_size); }
  int redraw_period_slots() const {
    return std::max(1, static_cast<int>(std::lround(coherence_s / slot_duration_s())));
  }
  /// RBs in RBG `k`; the last RBG is short when n_rb is not a multiple.
  int rbg_rbs(int k) const {
    const int start = k * rbg_size;
    return std::min(rbg_size, n_rb - start);
  }

  void validate() const {
    slots_per_frame();
    if (rbg_size < 1) throw ConfigError("RBG size must be >= 1");
    if (n_rb < 1) throw ConfigError("RB count must be >= 1");
    if (n_ue < 1) throw ConfigError("need at least one UE");
    if (frames < 0) throw ConfigError("frame count must be non-negative");
    if (!(coherence_s > 0.0)) throw ConfigError("channel coherence must be positive");
    if (!(bler >= 0.0 && bler <= 1.0)) throw ConfigError("BLER must be in [0, 1]");
    if (harq_rtt < 1) throw ConfigError("HARQ RTT must be >= 1 slot");
    if (max_retx < 0) throw ConfigError("max retransmissions must be >= 0");
    if (!(p_buffer_on >= 0.0 && p_buffer_on <= 1.0)) throw ConfigError("p_buffer_on must be in [0, 1]");
    if (!custom_grid) {
      bool ok = false;
      for (const auto& p : kGridPresets) {
        ok = ok || (p.numerology == numerology && p.bandwidth_mhz == bandwidth_mhz && p.n_rb == n_rb);
      }
      if (!ok) {
        throw ConfigError("(numerology, bandwidth, n_rb) must be one of (0,5,25), (1,10,24), (2,20,24) "
                          "unless custom_grid is set");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Channel: wideband MCS per UE, redrawn uniformly every coherence interval.

struct ChannelState {
  std::vector<int> mcs;
  int slots_until_redraw = 0;
};

inline ChannelState channel_init(const CellConfig& cfg, Rng& rng) {
  ChannelState c;
  c.mcs.resize(static_cast<std::size_t>(cfg.n_ue));
  for (auto& m : c.mcs) m = uniform_int(rng, 0, kMaxMcs);
  c.slots_until_redraw = cfg.redraw_period_slots();
  return c;
}

/// Advances the channel by one slot.
inline ChannelState channel_step(ChannelState chan, const CellConfig& cfg, Rng& rng) {
  chan.slots_until_redraw -= 1;
  if (chan.slots_until_redraw <= 0) {
    for (auto& m : chan.mcs) m = uniform_int(rng, 0, kMaxMcs);
    chan.slots_until_redraw = cfg.redraw_period_slots();
  }
  return chan;
}

// ---------------------------------------------------------------------------
// UE context and HARQ

struct HarqProcess {
  std::int64_t tb_bits = 0;
  int remaining = 0;   // slots until the next retransmission attempt
  int retx = 0;        // failed retransmissions so far
  bool armed = false;  // false during the slot in which the process opened
};

struct UeContext {
  bool buffered = true;
  std::optional<HarqProcess> harq;
  std::int64_t pending_tb_bits = 0;  // granted this slot, not yet decoded (tb_per_slot)
  std::int64_t scheduled_bits = 0;
  std::int64_t delivered_bits = 0;
  std::int64_t dropped_bits = 0;
  std::int64_t grants = 0;

  bool eligible() const { return buffered && !harq; }
};

inline sandbox::BitVector eligible_set(const std::vector<UeContext>& ues) {
  sandbox::BitVector e(ues.size());
  for (std::size_t u = 0; u < ues.size(); ++u) e[u] = ues[u].eligible() ? 1 : 0;
  return e;
}

struct GrantOutcome {
  std::int64_t tb_bits = 0;
  bool delivered = false;
};

/// First transmission of a transport block: delivered with probability
/// 1 - BLER, otherwise it opens the UE's HARQ process.
inline bool transmit_tb(UeContext& ue, std::int64_t tb, const CellConfig& cfg, Rng& rng) {
  const bool ok = !bernoulli(rng, cfg.bler);
  if (ok) {
    ue.delivered_bits += tb;
  } else if (cfg.max_retx > 0) {
    ue.harq = HarqProcess{tb, cfg.harq_rtt, 0, false};
  } else {
    ue.dropped_bits += tb;
  }
  return ok;
}

/// Grants one RBG worth `tb` bits. With tb_per_slot the bits join the UE's
/// slot transport block and `delivered` stays false until finish_slot.
inline GrantOutcome apply_grant(UeContext& ue, std::int64_t tb, const CellConfig& cfg, Rng& rng) {
  if (!ue.eligible()) throw ContractViolation("grant to an ineligible UE");
  ue.scheduled_bits += tb;
  ue.grants += 1;
  if (cfg.tb_per_slot) {
    ue.pending_tb_bits += tb;
    return {tb, false};
  }
  return {tb, transmit_tb(ue, tb, cfg, rng)};
}

/// Decodes the slot transport blocks accumulated under tb_per_slot.
inline void finish_slot(std::vector<UeContext>& ues, const CellConfig& cfg, Rng& rng) {
  for (auto& ue : ues) {
    if (ue.pending_tb_bits == 0) continue;
    transmit_tb(ue, ue.pending_tb_bits, cfg, rng);
    ue.pending_tb_bits = 0;
  }
}

/// End-of-slot HARQ processing; returns bits delivered by retransmissions.
inline std::vector<std::int64_t> harq_tick(std::vector<UeContext>& ues, const CellConfig& cfg, Rng& rng) {
  std::vector<std::int64_t> delivered(ues.size(), 0);
  for (std::size_t u = 0; u < ues.size(); ++u) {
    auto& ue = ues[u];
    if (!ue.harq) continue;
    auto& p = *ue.harq;
    if (!p.armed) {
      p.armed = true;
      continue;
    }
    if (--p.remaining > 0) continue;
    if (!bernoulli(rng, cfg.bler)) {
      ue.delivered_bits += p.tb_bits;
      delivered[u] = p.tb_bits;
      ue.harq.reset();
    } else if (++p.retx >= cfg.max_retx) {
      ue.dropped_bits += p.tb_bits;
      ue.harq.reset();
    } else {
      p.remaining = cfg.harq_rtt;
    }
  }
  return delivered;
}

// ---------------------------------------------------------------------------

/// Runs `frames` frames. The channel and traffic streams depend only on
/// (seed, cfg), so different schedulers see identical channel traces.
inline kpi::KpiRecord run_simulation(const CellConfig& cfg, sched::Scheduler& scheduler, int frames,
                                     std::uint64_t seed) {
  cfg.validate();
  if (frames < 0) throw ConfigError("frame count must be non-negative");
  Rng chan_rng = make_rng(seed, Stream::channel);
  Rng harq_rng = make_rng(seed, Stream::harq);
  Rng traffic_rng = make_rng(seed, Stream::traffic);

  const int n_ue = cfg.n_ue;
  const int n_rbg = cfg.rbgs_per_slot();
  const int n_slots = frames * cfg.slots_per_frame();
  const auto nue = static_cast<std::size_t>(n_ue);

  kpi::KpiRecord rec;
  rec.scheduler = scheduler.name();
  rec.seed = seed;
  rec.n_ue = n_ue;
  rec.numerology = cfg.numerology;
  rec.slot_duration_s = cfg.slot_duration_s();
  rec.rbgs_per_slot = n_rbg;
  rec.n_slots = n_slots;
  const auto cells = static_cast<std::size_t>(n_slots) * nue;
  rec.scheduled_bits.assign(cells, 0);
  rec.delivered_bits.assign(cells, 0);
  rec.grants.assign(cells, 0);
  rec.eligible_bitmap.assign(cells, std::string(static_cast<std::size_t>(n_rbg), '0'));
  rec.decisions.reserve(static_cast<std::size_t>(n_slots) * static_cast<std::size_t>(n_rbg));

  scheduler.reset(n_ue);
  std::vector<UeContext> ues(nue);
  ChannelState chan = channel_init(cfg, chan_rng);
  std::vector<double> achievable(nue);
  std::vector<double> slot_delivered(nue);
  sandbox::BitVector buffered(nue);

  for (int t = 0; t < n_slots; ++t) {
    for (std::size_t u = 0; u < nue; ++u) {
      ues[u].buffered = cfg.full_buffer || bernoulli(traffic_rng, cfg.p_buffer_on);
      buffered[u] = ues[u].buffered ? 1 : 0;
    }
    std::vector<std::int64_t> delivered_before(nue);
    for (std::size_t u = 0; u < nue; ++u) delivered_before[u] = ues[u].delivered_bits;

    for (int k = 0; k < n_rbg; ++k) {
      const auto eligible = eligible_set(ues);
      for (std::size_t u = 0; u < nue; ++u) {
        if (eligible[u]) rec.eligible_bitmap[rec.at(t, static_cast<int>(u))][static_cast<std::size_t>(k)] = '1';
      }
      if (!sched::any_eligible(eligible)) {
        rec.decisions.push_back(kpi::kNoEligible);
        continue;
      }
      const int rbs = cfg.rbg_rbs(k);
      for (std::size_t u = 0; u < nue; ++u) achievable[u] = static_cast<double>(tb_bits(mcs_entry(chan.mcs[u]), rbs));

      rec.invoked_rbgs += 1;
      const auto decision = scheduler.decide({eligible, buffered, chan.mcs, achievable});
      if (!decision.ue) {
        rec.idle_by_membership += 1;
        rec.decisions.push_back(kpi::kIdle);
        continue;
      }
      const int chosen = *decision.ue;
      if (chosen < 0 || chosen >= n_ue || !eligible[static_cast<std::size_t>(chosen)]) {
        throw ContractViolation(scheduler.name() + " granted UE " + std::to_string(chosen) +
                                ", which is not eligible");
      }
      const auto out = apply_grant(ues[static_cast<std::size_t>(chosen)],
                                   tb_bits(mcs_entry(chan.mcs[static_cast<std::size_t>(chosen)]), rbs), cfg, harq_rng);
      rec.scheduled_bits[rec.at(t, chosen)] += out.tb_bits;
      rec.grants[rec.at(t, chosen)] += 1;
      rec.decisions.push_back(static_cast<std::int16_t>(chosen));
    }

    finish_slot(ues, cfg, harq_rng);
    harq_tick(ues, cfg, harq_rng);
    for (std::size_t u = 0; u < nue; ++u) {
      const auto d = ues[u].delivered_bits - delivered_before[u];
      rec.delivered_bits[rec.at(t, static_cast<int>(u))] = d;
      slot_delivered[u] = static_cast<double>(d);
    }
    scheduler.end_slot(slot_delivered);
    chan = channel_step(std::move(chan), cfg, chan_rng);
  }
  return rec;
}

}  // namespace leasch::simnr
