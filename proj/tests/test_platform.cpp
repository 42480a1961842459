#include <gtest/gtest.h>

#include "acapmm/io.hpp"
#include "acapmm/platform.hpp"

using namespace acapmm;

namespace {

const char* kMinimal = R"({
  "rows": 2, "cols": 3, "core_clock_hz": 1e9, "pl_clock_hz": 2.5e8,
  "pl_buffer_bytes": 4096, "offchip_bw_bytes_per_s": 1e10,
  "dtypes": [["FP32", 4, 8]]
})";

std::string with(const std::string& field, const std::string& value) {
  auto j = nlohmann::json::parse(kMinimal);
  j[field] = nlohmann::json::parse(value);
  return j.dump();
}

std::string without(const std::string& field) {
  auto j = nlohmann::json::parse(kMinimal);
  j.erase(field);
  return j.dump();
}

void expect_parse_error(const std::string& doc, const std::string& needle) {
  try {
    load_platform(doc);
    FAIL() << "accepted: " << doc;
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Platform, ReferenceDocument) {
  const auto s = load_platform(read_file(ACAPMM_DATA "/vck190.json"));
  EXPECT_EQ(s.cores(), 400);
  EXPECT_EQ(s.num_interface_tiles, 39);
  EXPECT_EQ(s, vck190_reference());
}

TEST(Platform, DefaultsApply) {
  const auto s = load_platform(kMinimal);
  EXPECT_EQ(s.max_packet_factor, 4);
  EXPECT_EQ(s.switch_ew_ports, 4);
  EXPECT_EQ(s.local_mem_bytes, 32768);
  EXPECT_EQ(s.neighbor_mem_bytes, 131072);
  EXPECT_EQ(s.num_interface_tiles, 39);
  EXPECT_EQ(s.in_channels_per_tile, 8);
  EXPECT_EQ(s.out_channels_per_tile, 6);
  EXPECT_EQ(s.channel_bytes_per_core_cycle, 4);
  EXPECT_EQ(s.pl_channel_bytes_per_pl_cycle, 0);
}

TEST(Platform, Errors) {
  expect_parse_error(with("rows", "0"), "rows must be positive");
  expect_parse_error(with("cols", "-2"), "cols must be positive");
  expect_parse_error(with("offchip_bw_bytes_per_s", "0"), "offchip_bw_bytes_per_s");
  expect_parse_error(without("pl_clock_hz"), "pl_clock_hz");
  expect_parse_error(with("dtypes", R"([["FP64", 8, 4]])"), "FP64");
  expect_parse_error(with("dtypes", R"([["FP32", 4, 8], ["FP32", 4, 8]])"), "twice");
  expect_parse_error(with("dtypes", "[]"), "dtypes");
  expect_parse_error(with("rows", "2.5"), "rows");
  expect_parse_error(with("bogus", "1"), "bogus");
  expect_parse_error("{ not json", "platform document");
  expect_parse_error(with("neighbor_mem_bytes", "1024"), "neighbor_mem_bytes");
}

TEST(Platform, RoundTrip) {
  auto s = vck190_reference();
  s.dtypes.push_back({DType::INT8, 1, 64, AtomicDims{8, 8, 8}});
  s.dtypes.erase(s.dtypes.begin() + 2);
  s.pl_channel_bytes_per_pl_cycle = 8;
  const auto text = to_json(s).dump();
  EXPECT_EQ(load_platform(text), s);
  EXPECT_EQ(to_json(load_platform(text)).dump(), text);
}

TEST(Platform, PeakThroughput) {
  const auto s = vck190_reference();
  EXPECT_DOUBLE_EQ(peak_throughput(s, s.dtype(DType::FP32), 400), 6.4e12);
  EXPECT_DOUBLE_EQ(peak_throughput(s, s.dtype(DType::INT16), 400), 25.6e12);
  EXPECT_DOUBLE_EQ(peak_throughput(s, s.dtype(DType::INT8), 400), 1.024e14);
  EXPECT_DOUBLE_EQ(peak_throughput(s, s.dtype(DType::INT8), 0), 0.0);
  EXPECT_THROW(peak_throughput(s, s.dtype(DType::FP32), 401), ConfigError);
}

TEST(Platform, RequiredCtc) {
  EXPECT_DOUBLE_EQ(required_ctc(6400e9, 25.6e9), 250.0);
  EXPECT_NEAR(required_ctc(19500e9, 1555e9), 12.54, 0.01);
  for (double x : {1e-3, 1.0, 7.5, 1e12}) EXPECT_DOUBLE_EQ(required_ctc(x, x), 1.0);
  EXPECT_THROW(required_ctc(1.0, 0.0), ConfigError);
  EXPECT_THROW(required_ctc(1.0, -1.0), ConfigError);
}

TEST(Platform, UnknownDtypeLookup) {
  const auto s = load_platform(kMinimal);
  EXPECT_TRUE(s.has_dtype(DType::FP32));
  EXPECT_FALSE(s.has_dtype(DType::INT8));
  EXPECT_THROW((void)s.dtype(DType::INT8), ConfigError);
}
