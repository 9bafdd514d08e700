#include "multisage/checkpoint.hpp"
#include "multisage/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace multisage;

namespace {

void expect_same(const ModelParams& a, const ModelParams& b) {
  EXPECT_EQ(a.mode, b.mode);
  EXPECT_EQ(a.activation, b.activation);
  EXPECT_EQ(a.output_activation, b.output_activation);
  EXPECT_EQ(a.dims, b.dims);
  EXPECT_EQ(a.seed, b.seed);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    EXPECT_TRUE(a.layers[k].horizontal == b.layers[k].horizontal);
    EXPECT_TRUE(a.layers[k].vertical == b.layers[k].vertical);
    EXPECT_TRUE(a.layers[k].self == b.layers[k].self);
  }
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  for (Mode mode : {Mode::multisage, Mode::graphsage}) {
    Checkpoint ck{ModelParams::glorot(mode, Activation::sigmoid, {9, 4, 3}, 77), false, R"({"seed":77})"};
    ck.params.output_activation = Activation::relu;
    ck.params.layers[0].self(0, 0) = 1e-300;
    ck.params.layers[1].horizontal(1, 2) = -0.1;
    std::stringstream buf;
    write_checkpoint(buf, ck);
    auto back = read_checkpoint(buf);
    expect_same(ck.params, back.params);
    EXPECT_EQ(back.l2_normalize_output, false);
    EXPECT_EQ(back.provenance, ck.provenance);
    if (mode == Mode::graphsage) {
      for (const auto& w : back.params.layers) EXPECT_EQ(w.vertical.size(), 0);
    }
  }
}

TEST(Checkpoint, FileRoundTripWithoutProvenance) {
  const auto path = std::filesystem::temp_directory_path() / "multisage_ck_test.txt";
  Checkpoint ck{ModelParams::glorot(Mode::multisage, Activation::relu, {5, 2}, 1)};
  save_checkpoint(path, ck);
  auto back = load_checkpoint(path);
  expect_same(ck.params, back.params);
  EXPECT_TRUE(back.l2_normalize_output);
  EXPECT_TRUE(back.provenance.empty());
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), DataError);
}

TEST(Checkpoint, RejectsCorruptInput) {
  Checkpoint ck{ModelParams::glorot(Mode::multisage, Activation::relu, {3, 2}, 1)};
  std::stringstream buf;
  write_checkpoint(buf, ck);
  const auto text = buf.str();
  auto fails = [](const std::string& t) {
    std::istringstream in(t);
    EXPECT_THROW(read_checkpoint(in), DataError) << t.substr(0, 60);
  };
  fails("");
  fails("hello\n");
  fails(text.substr(0, text.size() / 2));
  fails(text.substr(0, text.rfind("end")));
  auto bad_number = text;
  bad_number.replace(bad_number.rfind('\n', bad_number.rfind("end") - 2) + 1, 1, "x");
  fails(bad_number);
  ck.provenance = "two\nlines";
  std::stringstream out;
  EXPECT_THROW(write_checkpoint(out, ck), std::invalid_argument);
}
