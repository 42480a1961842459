#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "acapmm/pipesim.hpp"
#include "oracles.hpp"

using namespace acapmm;

namespace {

ColumnSimParams params(std::int64_t depth, std::int64_t batches, std::int64_t ctc) {
  ColumnSimParams p;
  p.depth = depth;
  p.num_batches = batches;
  p.ctc_steps = ctc;
  return p;
}

void expect_matches_oracle(const TransferOrder& o, const ColumnSimParams& p) {
  const auto r = simulate_column(o, p);
  const auto x = oracle::simulate(o, p.ctc_steps, p.banks_per_core);
  EXPECT_EQ(r.makespan_steps, x.makespan);
  EXPECT_EQ(r.transfer_bubbles, x.transfer_bubbles);
  EXPECT_EQ(r.compute_bubbles, x.compute_bubbles);
  for (const auto& [tile, step] : x.arrival) EXPECT_EQ(r.arrival(tile), step);
  for (const auto& s : r.per_core_timeline) {
    const auto [start, end] = x.compute.at({s.batch, s.core});
    EXPECT_EQ(s.start_step, start);
    EXPECT_EQ(s.end_step, end);
  }
}

}  // namespace

TEST(Column, LexReferenceTrace) {
  const auto r = simulate_column(lex_order(4, 4), params(4, 4, 4));
  const auto fb = r.first_transfer_bubble();
  ASSERT_TRUE(fb.has_value());
  EXPECT_EQ(fb->step, 10);
  EXPECT_EQ(fb->blocked.id, 2);
  EXPECT_EQ(r.arrival({2, 2}), 13);
  const auto idle = r.idle_of(0);
  ASSERT_EQ(idle.size(), 1u);
  EXPECT_EQ(idle[0].start_step, 13);
  EXPECT_EQ(idle[0].end_step, 18);
  EXPECT_EQ(r.makespan_steps, 34);
}

TEST(Column, ZigzagReferenceTrace) {
  const auto r = simulate_column(zigzag_order(4, 4), params(4, 4, 4));
  EXPECT_EQ(r.transfer_bubbles, 0);
  EXPECT_EQ(r.compute_bubbles, 0);
  EXPECT_EQ(r.makespan_steps, 28);
}

TEST(Column, DepthOneHasNoBubbles) {
  for (std::int64_t n = 1; n <= 6; ++n)
    for (std::int64_t ctc = 1; ctc <= 6; ++ctc) {
      const auto r = simulate_column(lex_order(n, 1), params(1, n, ctc));
      EXPECT_EQ(r.transfer_bubbles, 0);
      EXPECT_EQ(r.compute_bubbles, 0);
    }
}

TEST(Column, MatchesOracle) {
  for (std::int64_t d = 1; d <= 5; ++d)
    for (std::int64_t n = 1; n <= 5; ++n)
      for (std::int64_t ctc = 1; ctc <= 5; ++ctc) {
        expect_matches_oracle(lex_order(n, d), params(d, n, ctc));
        expect_matches_oracle(zigzag_order(n, d), params(d, n, ctc));
      }
}

TEST(Column, RandomOrdersMatchOracle) {
  std::mt19937 rng(17);
  for (int it = 0; it < 200; ++it) {
    const std::int64_t d = 1 + rng() % 4, n = 1 + rng() % 4, ctc = 1 + rng() % 4;
    auto o = lex_order(n, d);
    std::shuffle(o.sequence.begin(), o.sequence.end(), rng);
    auto p = params(d, n, ctc);
    p.banks_per_core = 2 + std::int64_t(rng() % 2);
    // Arbitrary orders can deadlock; both models must agree when they don't.
    try {
      const auto r = simulate_column(o, p);
      const auto x = oracle::simulate(o, ctc, p.banks_per_core);
      EXPECT_EQ(r.makespan_steps, x.makespan);
      EXPECT_EQ(r.transfer_bubbles, x.transfer_bubbles);
    } catch (const SimulationError&) {
    }
  }
}

TEST(Column, DeadlockIsReported) {
  // Core 1 needs batch 0 from core 0 first, but both of its banks fill
  // with later batches before core 0's batch-0 tile is sent.
  TransferOrder o{3, 2, {{0, 1}, {1, 1}, {2, 1}, {0, 0}, {1, 0}, {2, 0}}};
  auto p = params(2, 3, 2);
  EXPECT_THROW(simulate_column(o, p), SimulationError);
}

TEST(Column, BadParams) {
  EXPECT_THROW(simulate_column(lex_order(2, 2), params(2, 3, 1)), ConfigError);
  EXPECT_THROW(simulate_column(lex_order(2, 2), params(2, 2, 0)), ConfigError);
  auto o = lex_order(2, 2);
  o.sequence.pop_back();
  EXPECT_THROW(simulate_column(o, params(2, 2, 1)), ConfigError);
}

TEST(Column, SingleBankSerializes) {
  auto p = params(1, 3, 2);
  p.banks_per_core = 1;
  const auto r = simulate_column(lex_order(3, 1), p);
  // Delivery waits for the previous compute to end each time.
  EXPECT_EQ(r.arrival({1, 0}), 3);
  EXPECT_EQ(r.makespan_steps, 8);
}

TEST(Column, DrainDelaysLastCore) {
  auto p = params(2, 2, 2);
  const auto base = simulate_column(zigzag_order(2, 2), p);
  p.drain_steps = 3;
  const auto drained = simulate_column(zigzag_order(2, 2), p);
  EXPECT_GE(drained.makespan_steps, base.makespan_steps + 3);
}

TEST(Column, TimelineCsv) {
  const auto r = simulate_column(lex_order(4, 4), params(4, 4, 4));
  std::ostringstream os;
  write_timeline_csv(os, r);
  const auto csv = os.str();
  EXPECT_EQ(csv.rfind("entity,kind,start_step,end_step,batch,id\n", 0), 0u);
  EXPECT_NE(csv.find("channel,transfer_bubble,10,10,2,2\n"), std::string::npos);
  EXPECT_NE(csv.find("core0,compute_bubble,13,18,"), std::string::npos);
  std::ostringstream again;
  write_timeline_csv(again, simulate_column(lex_order(4, 4), params(4, 4, 4)));
  EXPECT_EQ(csv, again.str());
}

// ---------------------------------------------------------------------------

namespace {

const PlatformSpec kSpec = vck190_reference();

MappingConfig design(TileDims t, ArrayDims a, BatchDims b, MMShape s) {
  MappingConfig c;
  c.shape = s;
  c.tile = t;
  c.array = a;
  c.batch = b;
  c.bf_lhs = a.C;
  c.bf_rhs = 1;
  return c;
}

}  // namespace

TEST(Timing, MatchesOracle) {
  std::mt19937 rng(23);
  for (int it = 0; it < 500; ++it) {
    const auto c = design({8 << (rng() % 3), 2 << (rng() % 5), 8 << (rng() % 3)},
                          {1 + std::int64_t(rng() % 4), 1 + std::int64_t(rng() % 4),
                           1 + std::int64_t(rng() % 4)},
                          {1 + std::int64_t(rng() % 4), 1 + std::int64_t(rng() % 4),
                           1 + std::int64_t(rng() % 4)},
                          {1 + std::int64_t(rng() % 3000), 1 + std::int64_t(rng() % 3000),
                           1 + std::int64_t(rng() % 3000), DType::FP32});
    const auto t = design_timing(c, kSpec);
    EXPECT_NEAR(t.predicted_ops_per_s, oracle::predicted(c, kSpec),
                1e-9 * t.predicted_ops_per_s);
    const auto b = throughput_upper_bounds(c, kSpec);
    EXPECT_LE(t.predicted_ops_per_s, b.roof() * (1 + 1e-12));
  }
}

TEST(Timing, Bounds) {
  // 384 cores; a 1536 x 1024 output block reuses operands 307 times per byte.
  auto c = design({32, 32, 32}, {6, 4, 16}, {8, 1, 2}, {6144, 6144, 6144, DType::FP32});
  auto t = design_timing(c, kSpec);
  EXPECT_EQ(t.bound, Bound::Compute);
  EXPECT_LE(t.predicted_ops_per_s, 384 * 16e9);

  // A 64 x 64 output block moves 128 KiB of operands per 4096-cycle phase.
  c = design({32, 32, 32}, {2, 8, 2}, {1, 1, 1}, {4096, 4096, 4096, DType::FP32});
  EXPECT_EQ(design_timing(c, kSpec).bound, Bound::Offchip);

  // Operands take longer to arrive than to multiply.
  auto fast = kSpec;
  fast.offchip_bw_bytes_per_s = 1e18;
  c = design({8, 2, 8}, {1, 1, 1}, {1, 1, 1}, {64, 64, 64, DType::FP32});
  EXPECT_EQ(design_timing(c, fast).bound, Bound::Plio);
}

TEST(Timing, InfiniteBandwidthReachesComputeBound) {
  auto fast = kSpec;
  fast.offchip_bw_bytes_per_s = 1e30;
  const auto c = design({32, 32, 32}, {2, 4, 4}, {2, 2, 2}, {2048, 2048, 2048, DType::FP32});
  const auto t = design_timing(c, fast);
  EXPECT_EQ(t.bound, Bound::Compute);
  EXPECT_NEAR(t.predicted_ops_per_s, peak_throughput(fast, fast.dtype(DType::FP32), 32),
              1e-9 * t.predicted_ops_per_s);
}

TEST(Timing, MemoryBoundLinearInCtc) {
  auto c = design({32, 32, 32}, {1, 1, 1}, {1, 1, 1}, {32, 32, 32, DType::FP32});
  const auto b = throughput_upper_bounds(c, kSpec);
  EXPECT_DOUBLE_EQ(b.memory_bound,
                   kSpec.offchip_bw_bytes_per_s * onchip_ctc(c, kSpec.dtype(DType::FP32)));
  // onchip_ctc 250 on the whole array would hit the peak exactly.
  EXPECT_DOUBLE_EQ(kSpec.offchip_bw_bytes_per_s * 250, 6.4e12);
  EXPECT_DOUBLE_EQ(kSpec.offchip_bw_bytes_per_s * 125, 3.2e12);
}

TEST(Timing, ColumnParams) {
  const auto c = design({32, 32, 32}, {2, 4, 3}, {2, 1, 3}, {512, 512, 512, DType::FP32});
  const auto p = column_params(c, kSpec);
  EXPECT_EQ(p.depth, 4);
  EXPECT_EQ(p.num_batches, 6);
  EXPECT_EQ(p.ctc_steps, 4);
}
