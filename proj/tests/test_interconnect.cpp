#include <gtest/gtest.h>

#include <random>

#include "acapmm/interconnect.hpp"
#include "oracles.hpp"

using namespace acapmm;

namespace {

const PlatformSpec kSpec = vck190_reference();

MappingConfig broadcast_1x4x4(std::int64_t bf_lhs = 4) {
  MappingConfig c;
  c.shape = {128, 128, 128, DType::FP32};
  c.tile = {32, 32, 32};
  c.array = {1, 4, 4};
  c.bf_lhs = bf_lhs;
  return c;
}

PlatformSpec single_row() {
  auto s = vck190_reference();
  s.rows = 1;
  s.cols = 8;
  return s;
}

// One row: every chain is one core, chain c sits in column c.
MappingConfig row_of_four(std::int64_t bf_lhs) {
  MappingConfig c;
  c.shape = {32, 32, 128, DType::FP32};
  c.tile = {32, 32, 32};
  c.array = {1, 1, 4};
  c.bf_lhs = bf_lhs;
  return c;
}

// Entries that put every stream except the LHS ones at its own column.
std::vector<std::int64_t> entries_for(const PortPlan& plan, std::int64_t lhs_entry_step) {
  std::vector<std::int64_t> e;
  for (const auto& s : plan.streams) {
    if (s.kind == StreamKind::Lhs)
      e.push_back(s.broadcast_group * lhs_entry_step);
    else
      e.push_back(s.chains.front());
  }
  return e;
}

}  // namespace

TEST(PacketFactor, Goldens) {
  EXPECT_EQ(packet_factor(broadcast_1x4x4(), kSpec), 4);
  auto c = broadcast_1x4x4();
  c.tile = {8, 2, 8};  // ctc 0.25
  EXPECT_EQ(packet_factor(c, kSpec), 1);
  c = broadcast_1x4x4();
  c.shape.dtype = DType::INT8;  // ctc 1
  EXPECT_EQ(packet_factor(c, kSpec), 1);
  c = broadcast_1x4x4();
  c.array.B = 2;
  EXPECT_EQ(packet_factor(c, kSpec), 2);
  c = broadcast_1x4x4();
  c.tile = {64, 64, 64};  // ctc 8, capped by max_packet_factor
  c.array.B = 8;
  EXPECT_EQ(packet_factor(c, kSpec), 4);
}

TEST(Ports, OnePortForSixteenCores) {
  const auto p = port_plan(broadcast_1x4x4(), kSpec);
  EXPECT_EQ(p.packet_factor, 4);
  EXPECT_EQ(p.lhs_in_ports, 1);
  EXPECT_EQ(port_plan(broadcast_1x4x4(2), kSpec).lhs_in_ports, 2);
  EXPECT_TRUE(p.feasible);
  // A x B x C = 16 destinations, all reached by the single LHS stream.
  ASSERT_EQ(p.streams.front().kind, StreamKind::Lhs);
  EXPECT_EQ(p.streams.front().tiles.size(), 4u);
  EXPECT_EQ(p.streams.front().chains.size(), 4u);
}

TEST(Ports, SingleCore) {
  MappingConfig c;
  c.shape = {8, 8, 8, DType::FP32};
  c.tile = {8, 2, 8};
  const auto p = port_plan(c, kSpec);
  EXPECT_EQ(p.packet_factor, 1);
  EXPECT_EQ(p.lhs_in_ports, 1);
  EXPECT_EQ(p.rhs_in_ports, 1);
  EXPECT_EQ(p.out_ports, 1);
}

TEST(Ports, BroadcastMustDivide) {
  EXPECT_THROW(port_plan(broadcast_1x4x4(3), kSpec), ConfigError);
  auto c = broadcast_1x4x4();
  c.array.A = 4;
  c.bf_rhs = 3;
  EXPECT_THROW(port_plan(c, kSpec), ConfigError);
}

TEST(Ports, TooMany) {
  MappingConfig c;
  c.shape = {4096, 4096, 4096, DType::FP32};
  c.tile = {8, 2, 8};  // p = 1
  c.array = {16, 4, 6};
  const auto p = port_plan(c, kSpec);
  EXPECT_EQ(p.lhs_in_ports, 16 * 4 * 6);
  EXPECT_FALSE(p.feasible);
}

TEST(Ports, PlSideRate) {
  auto s = vck190_reference();
  s.pl_channel_bytes_per_pl_cycle = 8;  // 1.84 GB/s per channel
  const auto p = port_plan(broadcast_1x4x4(), s);
  EXPECT_DOUBLE_EQ(p.pl_demand_bytes_per_s, 4e9);
  EXPECT_DOUBLE_EQ(p.pl_capacity_bytes_per_s, 8 * 230e6);
  EXPECT_FALSE(p.feasible);
  EXPECT_TRUE(port_plan(broadcast_1x4x4(), kSpec).feasible);
}

TEST(Ports, MatchOracle) {
  std::mt19937 rng(3);
  for (int it = 0; it < 500; ++it) {
    MappingConfig c;
    c.shape = {1024, 1024, 1024, DType::FP32};
    c.tile = {8 << (rng() % 3), 2 << (rng() % 5), 8 << (rng() % 3)};
    c.array = {1 + std::int64_t(rng() % 6), 1 + std::int64_t(rng() % 8),
               1 + std::int64_t(rng() % 6)};
    auto dl = divisors(c.array.C);
    auto dr = divisors(c.array.A);
    c.bf_lhs = dl[rng() % dl.size()];
    c.bf_rhs = dr[rng() % dr.size()];
    const auto p = port_plan(c, kSpec);
    const auto o = oracle::streams(c, kSpec);
    EXPECT_EQ(p.packet_factor, oracle::packet_factor(c, kSpec));
    EXPECT_EQ(p.total_in, std::int64_t(o.in.size()));
    EXPECT_EQ(p.total_out, std::int64_t(o.out.size()));
    EXPECT_EQ(std::int64_t(p.streams.size()), p.total_in + p.total_out);
  }
}

TEST(Congestion, OnePortFourColumns) {
  const auto spec = single_row();
  const auto c = row_of_four(4);
  const auto plan = port_plan(c, spec);
  ASSERT_EQ(plan.lhs_in_ports, 1);
  const auto r = congestion(c, spec, plan, entries_for(plan, 0));
  EXPECT_EQ(r.horizontal_segments, 3);
}

TEST(Congestion, TwoPortsTwoColumnsEach) {
  const auto spec = single_row();
  const auto c = row_of_four(2);
  const auto plan = port_plan(c, spec);
  ASSERT_EQ(plan.lhs_in_ports, 2);
  const auto r = congestion(c, spec, plan, entries_for(plan, 2));
  EXPECT_EQ(r.horizontal_segments, 2);
  EXPECT_LT(r.horizontal_segments,
            congestion(row_of_four(4), spec, port_plan(row_of_four(4), spec),
                       entries_for(port_plan(row_of_four(4), spec), 0))
                .horizontal_segments);
}

TEST(Congestion, EntryAtOwnColumn) {
  const auto spec = single_row();
  const auto c = row_of_four(1);
  const auto plan = port_plan(c, spec);
  std::vector<std::int64_t> e;
  for (const auto& s : plan.streams) e.push_back(s.chains.front());
  EXPECT_EQ(congestion(c, spec, plan, e).horizontal_segments, 0);
}

TEST(Congestion, BadEntries) {
  const auto spec = single_row();
  const auto c = row_of_four(4);
  const auto plan = port_plan(c, spec);
  EXPECT_THROW(congestion(c, spec, plan, std::vector<std::int64_t>{0}), ConfigError);
  auto e = entries_for(plan, 0);
  e[0] = spec.cols;
  EXPECT_THROW(congestion(c, spec, plan, e), ConfigError);
}

TEST(Congestion, DefaultMatchesOracleAndFastPath) {
  std::mt19937 rng(5);
  for (int it = 0; it < 1000; ++it) {
    auto spec = vck190_reference();
    spec.rows = 1 + std::int64_t(rng() % 8);
    spec.cols = 1 + std::int64_t(rng() % 40);
    MappingConfig c;
    c.shape = {512, 512, 512, DType::FP32};
    c.tile = {8 << (rng() % 3), 2 << (rng() % 5), 8 << (rng() % 3)};
    c.array = {1 + std::int64_t(rng() % 6), 1 + std::int64_t(rng() % 10),
               1 + std::int64_t(rng() % 6)};
    auto dl = divisors(c.array.C);
    auto dr = divisors(c.array.A);
    c.bf_lhs = dl[rng() % dl.size()];
    c.bf_rhs = dr[rng() % dr.size()];
    const auto r = congestion(c, spec);
    const auto o = oracle::congestion(c, spec);
    EXPECT_EQ(r.horizontal_segments, o.segments);
    EXPECT_EQ(r.max_segments_per_boundary, o.max_crossings);
    EXPECT_EQ(max_trunk_crossings(c, spec, packet_factor(c, spec)), o.max_crossings);
    EXPECT_EQ(r.feasible, o.max_crossings <= spec.switch_ew_ports);
  }
}

TEST(Placement, Packing) {
  const auto spec = vck190_reference();
  auto p = placement({6, 4, 16}, spec);
  EXPECT_EQ(p.chains_per_column, 2);
  EXPECT_EQ(p.columns_needed, 48);
  EXPECT_TRUE(p.fits);
  p = placement({1, 12, 2}, spec);
  EXPECT_EQ(p.columns_per_chain, 2);
  EXPECT_EQ(p.columns_needed, 4);
  EXPECT_EQ(p.column_of(1), 2);
  p = placement({1, 5, 51}, spec);  // 255 cores but 51 columns
  EXPECT_FALSE(p.fits);
}
