#include <gtest/gtest.h>

#include <fstream>

#include "cdlab/dataset.hpp"
#include "cdlab/netpbm.hpp"
#include "support.hpp"

namespace cdlab {
namespace {

std::vector<unsigned char> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

TEST(Netpbm, HandWrittenP5) {
  std::string s = "P5\n# comment\n3 2\n255\n";
  s += std::string("\x00\x7f\xff\x01\x02\x03", 6);
  const Image img = decode_netpbm(bytes_of(s));
  ASSERT_EQ(img.width(), 3);
  ASSERT_EQ(img.height(), 2);
  EXPECT_EQ(img.channels(), 1);
  EXPECT_EQ(img.at(0, 1, 0), 127.0);
  EXPECT_EQ(img.at(0, 2, 0), 255.0);
  EXPECT_EQ(img.at(0, 2, 1), 3.0);
}

TEST(Netpbm, EncodeLayoutIsExact) {
  Image img(2, 1, 3);
  img.set(0, 0, 0, 1);
  img.set(1, 0, 0, 2);
  img.set(2, 0, 0, 3);
  img.set(0, 1, 0, 4.4);  // rounds to 4
  img.set(1, 1, 0, 5.5);  // rounds to 6
  img.set(2, 1, 0, 255);
  const auto b = encode_netpbm(img);
  const std::string header = "P6\n2 1\n255\n";
  ASSERT_EQ(b.size(), header.size() + 6);
  EXPECT_EQ(std::string(b.begin(), b.begin() + header.size()), header);
  const std::vector<unsigned char> px(b.begin() + header.size(), b.end());
  EXPECT_EQ(px, (std::vector<unsigned char>{1, 2, 3, 4, 6, 255}));
}

TEST(Netpbm, RoundTrip) {
  for (int c : {1, 3}) {
    const Image img = testing::random_image(17, 5, c, 9 + c);
    EXPECT_EQ(decode_netpbm(encode_netpbm(img)), img);
  }
}

TEST(Netpbm, RejectsMalformed) {
  EXPECT_THROW(decode_netpbm(bytes_of("P2\n1 1\n255\n0")), FormatError);
  EXPECT_THROW(decode_netpbm(bytes_of("P5\n2 2\n255\n\x01")), FormatError);
  EXPECT_THROW(decode_netpbm(bytes_of("P5\n1 1\n65535\n\x01\x01")), FormatError);
  EXPECT_THROW(decode_netpbm(bytes_of("P5\n")), FormatError);
}

TEST(Netpbm, MissingFileIsIoError) { EXPECT_THROW(read_netpbm("/nonexistent/dir/x.pgm"), IoError); }

TEST(Dataset, SaveLoadRoundTrip) {
  const auto dir = testing::temp_dir("dataset_rt");
  const Dataset d = synth::desk_dataset(30, 4, "test");
  save_dataset(d, dir);
  const Dataset back = load_dataset(dir);
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.num_classes, synth::kDeskClasses);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.samples[i].name, d.samples[i].name);
    EXPECT_EQ(back.samples[i].label, d.samples[i].label);
    EXPECT_EQ(back.samples[i].image, d.samples[i].image);
  }
  EXPECT_EQ(dataset_hash(back), dataset_hash(d));
}

TEST(Dataset, LabelsCsvRows) {
  const auto dir = testing::temp_dir("dataset_csv");
  write_netpbm(dir / "a.pgm", Image(4, 4, 1, 10));
  write_netpbm(dir / "b.pgm", Image(4, 4, 1, 20));
  std::ofstream(dir / "labels.csv") << "filename,label\na.pgm,2\nb.pgm,0\n";
  const Dataset d = load_dataset(dir);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.samples[0].label, 2);
  EXPECT_EQ(d.num_classes, 3);
  EXPECT_THROW(load_dataset(dir, 2), ParameterError);
}

TEST(Dataset, MissingLabelsIsIoError) {
  const auto dir = testing::temp_dir("dataset_missing");
  EXPECT_THROW(load_dataset(dir), IoError);
}

TEST(Dataset, MixedShapesRejected) {
  const auto dir = testing::temp_dir("dataset_mixed");
  write_netpbm(dir / "a.pgm", Image(4, 4, 1, 10));
  write_netpbm(dir / "b.pgm", Image(5, 4, 1, 20));
  std::ofstream(dir / "labels.csv") << "a.pgm,0\nb.pgm,1\n";
  EXPECT_THROW(load_dataset(dir), ShapeError);
}

TEST(Synth, DeskIsBalancedAndDeterministic) {
  const Dataset a = synth::desk_dataset(40, 7, "train");
  const Dataset b = synth::desk_dataset(40, 7, "train");
  EXPECT_EQ(dataset_hash(a), dataset_hash(b));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i].label, static_cast<int>(i % 10));
  EXPECT_NE(dataset_hash(a), dataset_hash(synth::desk_dataset(40, 8, "train")));
  for (const auto& s : a.samples)
    for (double v : s.image.samples()) EXPECT_EQ(v, std::round(v));
}

}  // namespace
}  // namespace cdlab
