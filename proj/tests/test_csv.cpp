#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <etchvm/csv.hpp>

using namespace etchvm;
namespace fs = std::filesystem;

namespace {

class CsvTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "etchvm_csv_test";
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path file(const std::string& name) const { return dir_ / name; }
  void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
  }
  std::string read_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  }
  fs::path dir_;
};

std::vector<WaferRecord> two_records() {
  WaferRecord a, b;
  a.condition = {20.0, 5.0, 50.0};
  a.thickness_nm = {266.2, 265.6, 266.0, 266.2, 266.6, 266.7, 266.4, 266.0, 265.8};
  b.condition = {40.0, 20.0, 110.0};
  b.thickness_nm = {170.125, 171.0, 169.5, 170.7, 171.2, 170.0, 169.9, 170.3, 170.6};
  return {a, b};
}

}  // namespace

TEST_F(CsvTest, ProcessRoundTripPreservesDoubles) {
  const auto recs = two_records();
  save_process_csv(file("p.csv"), recs);
  const auto loaded = load_process_csv(file("p.csv"));
  ASSERT_EQ(loaded.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(loaded[i].condition.pressure, recs[i].condition.pressure);
    EXPECT_EQ(loaded[i].condition.cf4_flow, recs[i].condition.cf4_flow);
    EXPECT_EQ(loaded[i].condition.rf_top_power, recs[i].condition.rf_top_power);
    for (std::size_t j = 0; j < kThicknessPoints; ++j)
      EXPECT_EQ(loaded[i].thickness_nm[j], recs[i].thickness_nm[j]);
  }
}

TEST_F(CsvTest, ProcessHeaderExactString) {
  save_process_csv(file("p.csv"), two_records());
  const auto text = read_text(file("p.csv"));
  EXPECT_EQ(text.rfind(std::string(kProcessCsvHeader) + "\n", 0), 0u);
  EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST_F(CsvTest, ProcessRejectsWrongHeader) {
  write_text(file("bad.csv"), "pressure,flow,power\n20,5,50\n");
  EXPECT_THROW(load_process_csv(file("bad.csv")), DataError);
}

TEST_F(CsvTest, ProcessRejectsShortRowWithLineNumber) {
  write_text(file("bad.csv"), std::string(kProcessCsvHeader) +
                                  "\n20,5,50,266.2,265.6,266.0,266.2,266.6,266.7,266.4,266.0\n");
  try {
    load_process_csv(file("bad.csv"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST_F(CsvTest, ProcessRejectsNonNumericCell) {
  write_text(file("bad.csv"), std::string(kProcessCsvHeader) +
                                  "\n20,5,50,266.2,oops,266.0,266.2,266.6,266.7,266.4,266.0,265.8\n");
  EXPECT_THROW(load_process_csv(file("bad.csv")), DataError);
}

TEST_F(CsvTest, ProcessSkipsBlankLines) {
  write_text(file("p.csv"),
             std::string(kProcessCsvHeader) +
                 "\n\n20,5,50,266.2,265.6,266.0,266.2,266.6,266.7,266.4,266.0,265.8\n\n");
  EXPECT_EQ(load_process_csv(file("p.csv")).size(), 1u);
}

TEST_F(CsvTest, MissingFileThrows) {
  EXPECT_THROW(load_process_csv(file("absent.csv")), DataError);
}

TEST_F(CsvTest, RgbRoundTripWithAndWithoutDepth) {
  std::vector<RgbSample> samples{{228.8, 151.2, 216.3, -53.7},
                                 {12.5, 0.0, 255.0, std::nan("")}};
  save_rgb_csv(file("rgb.csv"), samples);
  const auto loaded = load_rgb_csv(file("rgb.csv"), true);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].r, 228.8);
  EXPECT_EQ(loaded[0].depth_nm, -53.7);
  EXPECT_EQ(loaded[1].b, 255.0);
  EXPECT_TRUE(std::isnan(loaded[1].depth_nm));
}

TEST_F(CsvTest, RgbMissingDepthRejectedByDefault) {
  write_text(file("rgb.csv"), std::string(kRgbCsvHeader) + "\n10,20,30,\n");
  EXPECT_THROW(load_rgb_csv(file("rgb.csv")), DataError);
  EXPECT_NO_THROW(load_rgb_csv(file("rgb.csv"), true));
}

TEST_F(CsvTest, DepthTargetRoundTrip) {
  std::vector<DepthTargetRow> rows{{{20.0, 5.0, 50.0}, -36.8},
                                   {{40.0, 20.0, 110.0}, std::nan("")}};
  save_depth_target_csv(file("d.csv"), rows);
  const auto loaded = load_depth_target_csv(file("d.csv"), true);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].condition.pressure, 20.0);
  EXPECT_EQ(loaded[0].depth_nm, -36.8);
  EXPECT_TRUE(std::isnan(loaded[1].depth_nm));
  EXPECT_THROW(load_depth_target_csv(file("d.csv")), DataError);
}

TEST_F(CsvTest, PredictionReportRoundTrip) {
  std::vector<PredictionReportRow> rows(2);
  rows[0].index = 0;
  rows[0].mean_nm = -36.81;
  rows[0].std_nm = 1.25;
  rows[0].true_nm = -36.5;
  rows[0].abs_error_nm = 0.31;
  rows[0].band = "1sigma";
  rows[1].index = 1;
  rows[1].mean_nm = -83.1;
  rows[1].std_nm = 0.5;
  save_prediction_report(file("r.csv"), rows);
  const auto text = read_text(file("r.csv"));
  EXPECT_EQ(text.rfind(std::string(kPredictionReportHeader) + "\n", 0), 0u);
  const auto loaded = load_prediction_report(file("r.csv"));
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].index, 0u);
  EXPECT_EQ(loaded[0].mean_nm, -36.81);
  ASSERT_TRUE(loaded[0].true_nm.has_value());
  EXPECT_EQ(*loaded[0].true_nm, -36.5);
  EXPECT_EQ(loaded[0].band, "1sigma");
  EXPECT_FALSE(loaded[1].true_nm.has_value());
  EXPECT_FALSE(loaded[1].abs_error_nm.has_value());
  EXPECT_TRUE(loaded[1].band.empty());
}

TEST_F(CsvTest, RgbRejectsOutOfRangeChannel) {
  write_text(file("rgb.csv"), std::string(kRgbCsvHeader) + "\n300,20,30,-10\n");
  EXPECT_THROW(load_rgb_csv(file("rgb.csv")), DataError);
}
