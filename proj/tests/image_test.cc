#include <cmath>
#include <string>

#include "doctest.h"
#include "rqi/error.h"
#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/util/rng.h"
#include "test_util.h"

using namespace rqi;
using rqi::testing::random_plane;
using rqi::testing::TempDir;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("SplitMix64 reproduces the reference sequence") {
  SplitMix64 rng(1234567);
  CHECK(rng.next() == 6457827717110365317ull);
  CHECK(rng.next() == 3203168211198807973ull);
  CHECK(rng.next() == 9817491932198370423ull);
}

TEST_CASE("SplitMix64 bounded draws stay in range and cover it") {
  SplitMix64 rng(7);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.bounded(7);
    REQUIRE(v < 7);
    ++hist[v];
  }
  for (int h : hist) CHECK(h > 800);
}

TEST_CASE("load_image decodes binary PNM") {
  TempDir dir("pnm");
  SUBCASE("all-zero 2x2 P6") {
    auto bytes = bytes_of("P6\n2 2\n255\n");
    bytes.resize(bytes.size() + 12, 0);
    write_file_bytes(dir / "z.ppm", bytes);
    const ImageBuffer img = load_image(dir / "z.ppm");
    CHECK(img.width() == 2);
    CHECK(img.height() == 2);
    CHECK(img.channels() == 3);
    REQUIRE(img.data().size() == 12);
    for (auto v : img.data()) CHECK(v == 0);
  }
  SUBCASE("single-pixel P5 with a comment") {
    auto bytes = bytes_of("P5\n# one pixel\n1 1\n255\n");
    bytes.push_back(255);
    write_file_bytes(dir / "one.pgm", bytes);
    const ImageBuffer img = load_image(dir / "one.pgm");
    REQUIRE(img.data().size() == 1);
    CHECK(img.data()[0] == 255);
  }
  SUBCASE("16-bit PGM is reduced by a right shift") {
    auto bytes = bytes_of("P5 2 1 65535\n");
    for (std::uint8_t b : {0xAB, 0xCD, 0x00, 0xFF}) bytes.push_back(b);
    write_file_bytes(dir / "deep.pgm", bytes);
    const ImageBuffer img = load_image(dir / "deep.pgm");
    CHECK(img.data()[0] == 0xAB);
    CHECK(img.data()[1] == 0x00);
  }
}

TEST_CASE("PNG and PNM round-trip bit-exactly") {
  TempDir dir("png");
  ImageBuffer gray(4, 4, 1);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) gray.at(x, y, 0) = static_cast<std::uint8_t>(17 * (x + 4 * y));
  }
  save_image(gray, dir / "g.png");
  CHECK(load_image(dir / "g.png") == gray);
  save_image(gray, dir / "g.pgm");
  CHECK(load_image(dir / "g.pgm") == gray);

  SplitMix64 rng(3);
  ImageBuffer rgb(13, 7, 3);
  for (auto& v : rgb.data()) v = static_cast<std::uint8_t>(rng.bounded(256));
  save_image(rgb, dir / "c.png");
  CHECK(load_image(dir / "c.png") == rgb);
  save_image(rgb, dir / "c.ppm");
  CHECK(load_image(dir / "c.ppm") == rgb);
  CHECK(encode_png(rgb) == encode_png(rgb));
}

TEST_CASE("load_image error paths") {
  TempDir dir("bad");
  CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);
  write_file_bytes(dir / "junk.png", bytes_of("GIF89a not really"));
  CHECK_THROWS_AS(load_image(dir / "junk.png"), FormatError);
  auto png = encode_png(ImageBuffer(8, 8, 3));
  png.resize(png.size() / 2);
  write_file_bytes(dir / "trunc.png", png);
  CHECK_THROWS_AS(load_image(dir / "trunc.png"), FormatError);
  write_file_bytes(dir / "trunc.ppm", bytes_of("P6\n4 4\n255\n\x01\x02"));
  CHECK_THROWS_AS(load_image(dir / "trunc.ppm"), FormatError);
}

TEST_CASE("to_luma uses BT.601 weights") {
  ImageBuffer img(3, 1, 3, {255, 255, 255, 255, 0, 0, 0, 0, 255});
  const ImagePlane y = to_luma(img);
  CHECK(y.at(0, 0) == doctest::Approx(255.0).epsilon(1e-12));
  CHECK(y.at(1, 0) == doctest::Approx(76.245).epsilon(1e-12));
  CHECK(y.at(2, 0) == doctest::Approx(29.07).epsilon(1e-12));

  ImageBuffer g(2, 1, 1, {7, 200});
  const ImagePlane gy = to_luma(g);
  CHECK(gy.at(0, 0) == 7.0);
  CHECK(gy.at(1, 0) == 200.0);
}

TEST_CASE("gaussian_filter") {
  SUBCASE("constant planes are preserved") {
    const ImagePlane c(17, 12, 42.5);
    const ImagePlane out = gaussian_filter(c, 1.5, 5);
    for (double v : out.data()) CHECK(v == doctest::Approx(42.5).epsilon(1e-12));
  }
  SUBCASE("impulse response equals the direct 2-D convolution") {
    ImagePlane impulse(21, 21);
    impulse.at(10, 10) = 1.0;
    const ImagePlane out = gaussian_filter(impulse, 1.5, 5);
    // Oracle: normalised 2-D kernel evaluated directly.
    double total = 0.0;
    for (int dy = -5; dy <= 5; ++dy) {
      for (int dx = -5; dx <= 5; ++dx) total += std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
    }
    for (int dy = -5; dy <= 5; ++dy) {
      for (int dx = -5; dx <= 5; ++dx) {
        const double expect = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5)) / total;
        CHECK(out.at(10 + dx, 10 + dy) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
    CHECK(out.at(0, 0) == 0.0);
  }
  SUBCASE("mass is conserved under reflection") {
    const ImagePlane p = random_plane(23, 19, 11);
    const ImagePlane out = gaussian_filter(p, 2.0, 6);
    CHECK(std::fabs(plane_mean(out) - plane_mean(p)) <= 1e-9 * plane_mean(p));
  }
  SUBCASE("linearity") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const ImagePlane p = random_plane(20, 16, 100 + seed);
      const ImagePlane q = random_plane(20, 16, 200 + seed);
      const double a = 0.7, b = -1.3;
      ImagePlane mix(20, 16);
      for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = a * p.data()[i] + b * q.data()[i];
      const ImagePlane fm = gaussian_filter(mix, 1.2, 4);
      const ImagePlane fp = gaussian_filter(p, 1.2, 4);
      const ImagePlane fq = gaussian_filter(q, 1.2, 4);
      for (std::size_t i = 0; i < mix.size(); ++i) {
        const double expect = a * fp.data()[i] + b * fq.data()[i];
        CHECK(std::fabs(fm.data()[i] - expect) <= 1e-9 * std::max(1.0, std::fabs(expect)));
      }
    }
  }
  SUBCASE("radius must be smaller than the plane") {
    CHECK_THROWS_AS(gaussian_filter(ImagePlane(5, 9), 1.0, 5), DimensionError);
    CHECK_NOTHROW(gaussian_filter(ImagePlane(6, 9), 1.0, 5));
    CHECK_THROWS_AS(gaussian_filter(ImagePlane(9, 9), 0.0, 2), DimensionError);
  }
}

TEST_CASE("downscale_half") {
  const ImagePlane p(2, 2, std::vector<double>{0, 2, 4, 6});
  const ImagePlane d = downscale_half(p);
  CHECK(d.width() == 1);
  CHECK(d.height() == 1);
  CHECK(d.at(0, 0) == 3.0);

  const ImagePlane c = downscale_half(ImagePlane(8, 6, 9.0));
  CHECK(c.width() == 4);
  CHECK(c.height() == 3);
  for (double v : c.data()) CHECK(v == 9.0);

  ImagePlane ramp(4, 4);
  for (int i = 0; i < 16; ++i) ramp.data()[i] = i;
  const ImagePlane r = downscale_half(ramp);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      double sum = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) sum += (2 * y + dy) * 4 + (2 * x + dx);
      }
      CHECK(r.at(x, y) == sum / 4);
    }
  }

  const ImagePlane odd = downscale_half(random_plane(7, 5, 2));
  CHECK(odd.width() == 3);
  CHECK(odd.height() == 2);
  CHECK_THROWS_AS(downscale_half(ImagePlane(1, 8)), DimensionError);
}

TEST_CASE("downscale_half inverts pixel replication exactly") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ImagePlane p = random_plane(5 + static_cast<int>(seed), 3 + static_cast<int>(seed % 4), seed);
    CHECK(downscale_half(upsample_replicate(p, 2)) == p);
  }
}

TEST_CASE("crop and random_crops") {
  const ImagePlane p = random_plane(10, 8, 5);
  const ImagePlane c = crop(p, CropRect{3, 2, 4, 5});
  CHECK(c.width() == 4);
  CHECK(c.height() == 5);
  CHECK(c.at(0, 0) == p.at(3, 2));
  CHECK(c.at(3, 4) == p.at(6, 6));
  CHECK_THROWS_AS(crop(p, CropRect{7, 0, 4, 2}), DimensionError);

  const auto exact = random_crops(ImagePlane(16, 16), 16, 5, 99);
  REQUIRE(exact.size() == 5);
  for (const auto& r : exact) CHECK(r == CropRect{0, 0, 16, 16});

  CHECK(random_crops(p, 4, 20, 42) == random_crops(p, 4, 20, 42));
  CHECK(random_crops(p, 4, 20, 42) != random_crops(p, 4, 20, 43));

  const ImagePlane big(37, 23);
  const auto many = random_crops(big, 11, 10000, 7);
  bool saw_max_x = false;
  bool saw_max_y = false;
  for (const auto& r : many) {
    REQUIRE(r.x >= 0);
    REQUIRE(r.y >= 0);
    REQUIRE(r.x + r.w <= 37);
    REQUIRE(r.y + r.h <= 23);
    saw_max_x |= r.x == 26;
    saw_max_y |= r.y == 12;
  }
  CHECK(saw_max_x);
  CHECK(saw_max_y);
  CHECK_THROWS_AS(random_crops(big, 24, 1, 0), DimensionError);
}

TEST_CASE("random_crops offsets follow the documented generator") {
  SplitMix64 rng(2024);
  const auto x = static_cast<int>(rng.bounded(30 - 8 + 1));
  const auto y = static_cast<int>(rng.bounded(20 - 8 + 1));
  CHECK(random_crops(30, 20, 8, 1, 2024).front() == CropRect{x, y, 8, 8});
}

TEST_CASE("resampling helpers") {
  const ImagePlane c(12, 9, 50.0);
  const ImagePlane shrunk = resize_area(c, 5, 4);
  for (double v : shrunk.data()) CHECK(v == doctest::Approx(50.0));
  const ImagePlane grown = resize_bilinear(c, 20, 15);
  for (double v : grown.data()) CHECK(v == doctest::Approx(50.0));
  const ImagePlane p = random_plane(8, 8, 1);
  const ImagePlane area = resize_area(p, 4, 4);
  const ImagePlane half = downscale_half(p);
  for (std::size_t i = 0; i < area.size(); ++i) CHECK(area.data()[i] == doctest::Approx(half.data()[i]));
  const ImagePlane r = rotate90(random_plane(6, 4, 3));
  CHECK(r.width() == 4);
  CHECK(rotate90(rotate90(rotate90(rotate90(p)))) == p);
  CHECK(mirror_horizontal(mirror_horizontal(p)) == p);
}
