#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <etchvm/dic.hpp>

using namespace etchvm;
namespace fs = std::filesystem;

namespace {

class DicTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "etchvm_dic_test";
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path write(const std::string& name, const std::string& bytes) {
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return p;
  }
  fs::path dir_;
};

const std::string kP3TwoByTwo =
    "P3\n"
    "# test image\n"
    "2 2\n"
    "255\n"
    "255 0 0   0 255 0\n"
    "0 0 255   10 20 30\n";

std::string p6_two_by_two() {
  std::string s = "P6\n2 2\n255\n";
  const unsigned char pix[12] = {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
  s.append(reinterpret_cast<const char*>(pix), 12);
  return s;
}

}  // namespace

TEST_F(DicTest, ParsesAsciiPixmap) {
  const auto img = read_ppm(write("a.ppm", kP3TwoByTwo));
  ASSERT_EQ(img.width, 2u);
  ASSERT_EQ(img.height, 2u);
  ASSERT_EQ(img.pixels.size(), 4u);
  EXPECT_EQ(img.pixels[0][0], 255);
  EXPECT_EQ(img.pixels[1][1], 255);
  EXPECT_EQ(img.pixels[3][2], 30);
}

TEST_F(DicTest, ParsesBinaryPixmapIdentically) {
  const auto a = read_ppm(write("a.ppm", kP3TwoByTwo));
  const auto b = read_ppm(write("b.ppm", p6_two_by_two()));
  ASSERT_EQ(a.pixels.size(), b.pixels.size());
  for (std::size_t i = 0; i < a.pixels.size(); ++i) EXPECT_EQ(a.pixels[i], b.pixels[i]);
}

TEST_F(DicTest, CommentsAllowedAnywhereInHeader) {
  const auto img = read_ppm(write("c.ppm",
                                  "P3 # magic\n# width next\n2 # then height\n2\n# maxval\n255\n"
                                  "1 2 3 4 5 6 7 8 9 10 11 12\n"));
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.pixels[3][0], 10);
}

TEST_F(DicTest, RejectsWrongMagic) {
  EXPECT_THROW(read_ppm(write("bad.ppm", "P5\n2 2\n255\n")), DataError);
}

TEST_F(DicTest, RejectsNon255MaxVal) {
  EXPECT_THROW(read_ppm(write("bad.ppm", "P3\n1 1\n15\n1 1 1\n")), DataError);
  EXPECT_THROW(read_ppm(write("bad.ppm", "P3\n1 1\n65535\n1 1 1\n")), DataError);
}

TEST_F(DicTest, RejectsOversizedDimensions) {
  EXPECT_THROW(read_ppm(write("bad.ppm", "P3\n70000 1\n255\n")), DataError);
  EXPECT_THROW(read_ppm(write("bad.ppm", "P3\n0 5\n255\n")), DataError);
}

TEST_F(DicTest, RejectsTruncatedPixelData) {
  EXPECT_THROW(read_ppm(write("bad.ppm", "P3\n2 2\n255\n1 2 3 4 5\n")), DataError);
  std::string p6 = "P6\n2 2\n255\n";
  p6 += std::string(5, '\x7f');
  EXPECT_THROW(read_ppm(write("bad6.ppm", p6)), DataError);
}

TEST_F(DicTest, RejectsOutOfRangeAsciiSample) {
  EXPECT_THROW(read_ppm(write("bad.ppm", "P3\n1 1\n255\n256 0 0\n")), DataError);
}

TEST_F(DicTest, MissingFileThrows) {
  EXPECT_THROW(read_ppm(dir_ / "absent.ppm"), DataError);
}

TEST_F(DicTest, MeanOverFullImage) {
  const auto img = read_ppm(write("a.ppm", kP3TwoByTwo));
  const auto rgb = mean_rgb(img, {0, 0, 2, 2});
  EXPECT_NEAR(rgb[0], (255.0 + 0.0 + 0.0 + 10.0) / 4.0, 1e-12);
  EXPECT_NEAR(rgb[1], (0.0 + 255.0 + 0.0 + 20.0) / 4.0, 1e-12);
  EXPECT_NEAR(rgb[2], (0.0 + 0.0 + 255.0 + 30.0) / 4.0, 1e-12);
}

TEST_F(DicTest, MeanOverSubRectangle) {
  const auto img = read_ppm(write("a.ppm", kP3TwoByTwo));
  const auto rgb = mean_rgb(img, {1, 1, 1, 1});
  EXPECT_EQ(rgb[0], 10.0);
  EXPECT_EQ(rgb[1], 20.0);
  EXPECT_EQ(rgb[2], 30.0);
}

TEST_F(DicTest, RectMustStayInsideImage) {
  const auto img = read_ppm(write("a.ppm", kP3TwoByTwo));
  EXPECT_THROW(mean_rgb(img, {1, 1, 2, 1}), DataError);
  EXPECT_THROW(mean_rgb(img, {0, 2, 1, 1}), DataError);
  EXPECT_THROW(mean_rgb(img, {0, 0, 0, 2}), DataError);
}
