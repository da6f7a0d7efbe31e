#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cstring>

#include "support.hpp"
#include "vocalsym/io.hpp"

using namespace vocalsym;

TEST_CASE("format_double round-trips every bit") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20000; ++i) {
    double x = std::bit_cast<double>(rng());
    if (!std::isfinite(x)) continue;
    const double back = io::parse_double(io::format_double(x));
    CHECK(std::bit_cast<std::uint64_t>(back) == std::bit_cast<std::uint64_t>(x));
  }
  for (double x : {0.0, 1.0, -1.5, 0.1, 1e-310, 1.7976931348623157e308}) {
    CHECK(io::parse_double(io::format_double(x)) == x);
  }
}

TEST_CASE("parse_double and parse_int reject malformed text") {
  CHECK_THROWS_AS(io::parse_double(""), DataError);
  CHECK_THROWS_AS(io::parse_double("1.0x"), DataError);
  CHECK_THROWS_AS(io::parse_double("abc"), DataError);
  CHECK_THROWS_AS(io::parse_int("3.5"), DataError);
  CHECK(io::parse_int(" 42 ") == 42);
  CHECK(io::parse_double(" -2.5 ") == -2.5);
}

TEST_CASE("split keeps empty fields and trim strips whitespace") {
  const auto parts = io::split("a,,b,", ',');
  REQUIRE(parts.size() == 4);
  CHECK(parts[1].empty());
  CHECK(parts[3].empty());
  CHECK(io::trim("  x y \r\n") == "x y");
  CHECK(io::trim("   ").empty());
}

TEST_CASE("binary writer and reader agree") {
  io::BinaryWriter w;
  w.u32(7);
  w.u64(1ull << 40);
  w.i64(-3);
  w.f64(-0.25);
  const std::vector<double> xs = {1.0, 2.5, -1e-300};
  w.f64s(xs);
  w.str("subject");
  io::BinaryReader r(w.bytes());
  CHECK(r.u32() == 7u);
  CHECK(r.u64() == (1ull << 40));
  CHECK(r.i64() == -3);
  CHECK(r.f64() == -0.25);
  std::vector<double> back(3);
  r.f64s(back);
  CHECK(back == xs);
  CHECK(r.str() == "subject");
  CHECK(r.at_end());
  CHECK_THROWS_AS(r.u32(), DataError);
}

TEST_CASE("binary layout is little-endian") {
  io::BinaryWriter w;
  w.u32(0x01020304u);
  const auto& b = w.bytes();
  REQUIRE(b.size() == 4);
  CHECK(static_cast<unsigned char>(b[0]) == 0x04);
  CHECK(static_cast<unsigned char>(b[3]) == 0x01);
}

TEST_CASE("text files are written with parent directories and read back") {
  testsupport::TempDir dir("io");
  const auto path = dir / "a/b/c.txt";
  io::write_text_file(path, "hello\n");
  CHECK(io::read_text_file(path) == "hello\n");
  CHECK_THROWS_AS(io::read_text_file(dir / "missing.txt"), DataError);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a", 0, 1) != derive_seed(1, "a", 1, 0));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("subject-day tokens parse back") {
  const SubjectDayId id{"P07", 12, ClassLabel::PostTx};
  CHECK(SubjectDayId::parse_token(id.token()) == id);
  const auto two = SubjectDayId::parse_token("v1:3");
  CHECK(two.subject == "v1");
  CHECK(two.day == 3);
  CHECK(two.label == ClassLabel::Unlabeled);
  CHECK_THROWS_AS(SubjectDayId::parse_token("nope"), DataError);
  CHECK_THROWS_AS(parse_class_label("Sick"), DataError);
  CHECK(parse_class_label("Con") == ClassLabel::Control);
}
