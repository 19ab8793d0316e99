#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <panerf/embedding.hpp>
#include <panerf/error.hpp>
#include <panerf/losses.hpp>

#include "oracles.hpp"
#include "tmpdir.hpp"

using namespace panerf;

namespace {

ImageBuffer<double> constant_image(int w, int h, double r, double g, double b) {
  ImageBuffer<double> img(w, h, 3, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  }
  return img;
}

double photometric_oracle(const Eigen::Matrix3Xd& r, const Eigen::Matrix3Xd& ref,
                          const std::vector<std::uint8_t>& valid, const std::vector<std::uint8_t>& sal,
                          double bg_weight) {
  double fg = 0, bg = 0;
  int nf = 0, nb = 0;
  for (Eigen::Index i = 0; i < r.cols(); ++i) {
    if (!valid[i]) continue;
    const double e = (r.col(i) - ref.col(i)).squaredNorm();
    if (sal[i]) {
      fg += e;
      ++nf;
    } else {
      bg += e;
      ++nb;
    }
  }
  return (nf ? fg / nf : 0.0) + bg_weight * (nb ? bg / nb : 0.0);
}

}  // namespace

TEST_CASE("photometric loss of identical colours is zero") {
  std::mt19937_64 rng(31);
  const Eigen::Matrix3Xd c = Eigen::Matrix3Xd::Random(3, 10);
  const std::vector<std::uint8_t> v(10, 1), s{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
  const auto res = photometric_loss(c, c, v, s, 0.3);
  CHECK(res.loss == 0.0);
  CHECK(res.gradient.isZero(0));
}

TEST_CASE("an all-invalid batch yields zero with both regions flagged") {
  const Eigen::Matrix3Xd a = Eigen::Matrix3Xd::Ones(3, 4), b = Eigen::Matrix3Xd::Zero(3, 4);
  const std::vector<std::uint8_t> v(4, 0), s{1, 1, 0, 0};
  const auto res = photometric_loss(a, b, v, s, 1.0);
  CHECK(res.loss == 0.0);
  CHECK(res.foreground_empty);
  CHECK(res.background_empty);
  CHECK(res.gradient.isZero(0));
}

TEST_CASE("two-pixel split loss") {
  Eigen::Matrix3Xd r = Eigen::Matrix3Xd::Zero(3, 2), ref = Eigen::Matrix3Xd::Zero(3, 2);
  r(0, 0) = 0.2;  // squared error 0.04
  r(1, 1) = 0.1;  // squared error 0.01
  const std::vector<std::uint8_t> v{1, 1}, s{1, 0};
  const auto res = photometric_loss(r, ref, v, s, 0.5);
  CHECK(res.loss == doctest::Approx(0.045).epsilon(1e-12));
  CHECK(res.foreground == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(res.background == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(res.foreground_count == 1);
  CHECK(res.background_count == 1);
  CHECK(res.gradient(0, 0) == doctest::Approx(0.4));
  CHECK(res.gradient(1, 1) == doctest::Approx(0.5 * 0.2));
}

TEST_CASE("photometric loss rejects mismatched lengths") {
  const Eigen::Matrix3Xd a = Eigen::Matrix3Xd::Zero(3, 3);
  const std::vector<std::uint8_t> v(2, 1), s(3, 1);
  CHECK_THROWS_AS(photometric_loss(a, a, v, s, 1.0), ContractError);
}

TEST_CASE("property: photometric loss matches the oracle, ignores order and invalid pixels") {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 100; ++t) {
    const int n = oracle::uniform_int(rng, 1, 40);
    Eigen::Matrix3Xd r(3, n), ref(3, n);
    std::vector<std::uint8_t> v(n), s(n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        r(c, i) = oracle::uniform(rng, 0, 1);
        ref(c, i) = oracle::uniform(rng, 0, 1);
      }
      v[i] = oracle::uniform(rng, 0, 1) < 0.8;
      s[i] = oracle::uniform(rng, 0, 1) < 0.5;
    }
    const double bw = oracle::uniform(rng, 0, 2);
    const auto base = photometric_loss(r, ref, v, s, bw);
    CHECK(std::abs(base.loss - photometric_oracle(r, ref, v, s, bw)) < 1e-12);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::Matrix3Xd r2(3, n + 3), ref2(3, n + 3);
    std::vector<std::uint8_t> v2(n + 3, 0), s2(n + 3, 1);
    for (int i = 0; i < n; ++i) {
      r2.col(i) = r.col(perm[i]);
      ref2.col(i) = ref.col(perm[i]);
      v2[i] = v[perm[i]];
      s2[i] = s[perm[i]];
    }
    r2.rightCols(3).setConstant(5.0);
    ref2.rightCols(3).setZero();
    const auto shuffled = photometric_loss(r2, ref2, v2, s2, bw);
    CHECK(std::abs(shuffled.loss - base.loss) < 1e-12);
    CHECK(shuffled.gradient.rightCols(3).isZero(0));

    // The loss is quadratic, so central differences are exact up to rounding.
    const int i = oracle::uniform_int(rng, 0, n - 1), c = oracle::uniform_int(rng, 0, 2);
    Eigen::Matrix3Xd rp = r, rm = r;
    rp(c, i) += 1e-6;
    rm(c, i) -= 1e-6;
    const double fd = (photometric_loss(rp, ref, v, s, bw).loss - photometric_loss(rm, ref, v, s, bw).loss) / 2e-6;
    CHECK(oracle::relative_error(fd, base.gradient(c, i)) < 1e-4);
  }
}

TEST_CASE("msc of an image with itself is zero") {
  std::mt19937_64 rng(33);
  const BuiltinEmbedding emb;
  const auto img = oracle::random_image(rng, 30, 30);
  const auto res = msc_loss(img, img, emb);
  REQUIRE(res.similarity.size() == 3);
  for (double s : res.similarity) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(res.loss) < 1e-12);
}

TEST_CASE("msc crop sizes follow the level fractions") {
  const BuiltinEmbedding emb;
  const auto img = constant_image(90, 90, 0.5, 0.5, 0.5);
  const auto res = msc_loss(img, img, emb, false);
  CHECK(res.crop_sizes == std::vector<int>{30, 60, 90});
  CHECK(res.gradient.data.empty());
}

TEST_CASE("anti-aligned features give the maximal loss 2L") {
  const BuiltinEmbedding emb;
  const auto ref = constant_image(24, 24, 0.5, 0.25, 0.75);
  const auto neg = constant_image(24, 24, -0.5, -0.25, -0.75);
  const auto res = msc_loss(neg, ref, emb);
  for (double s : res.similarity) CHECK(1.0 - s == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(res.loss == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("msc argument errors") {
  const BuiltinEmbedding emb;
  const auto a = constant_image(12, 12, 0.1, 0.2, 0.3);
  CHECK_THROWS_AS(msc_loss(a, constant_image(12, 9, 0, 0, 0), emb), ContractError);
  CHECK_THROWS_AS(msc_loss(constant_image(3, 3, 0, 0, 0), constant_image(3, 3, 0, 0, 0), emb), ConfigError);
}

TEST_CASE("property: msc is non-negative and zero exactly for matching levels") {
  std::mt19937_64 rng(34);
  const BuiltinEmbedding emb;
  for (int t = 0; t < 40; ++t) {
    const int s = 3 * oracle::uniform_int(rng, 2, 8);
    const auto a = oracle::random_image(rng, s, s);
    const auto b = oracle::random_image(rng, s, s);
    const auto res = msc_loss(a, b, emb, false);
    CHECK(res.loss >= 0.0);
    CHECK(res.loss <= 2.0 * emb.levels());
    CHECK(res.loss > 0.0);
  }
}

TEST_CASE("msc gradients match central finite differences") {
  std::mt19937_64 rng(35);
  oracle::GradCheck total;
  for (int t = 0; t < 10; ++t) total.merge(oracle::check_msc_instance(rng));
  CHECK(total.checked > 100);
  CHECK(total.max_error < 1e-4);
}

TEST_CASE("msc from precomputed features") {
  FeatureSet a, b;
  a.levels = {Eigen::VectorXf::Ones(4), Eigen::VectorXf::Ones(4)};
  b.levels = {Eigen::VectorXf::Ones(4), -Eigen::VectorXf::Ones(4)};
  const auto res = msc_loss_from_features(a, b);
  CHECK(res.loss == doctest::Approx(2.0));
  const auto path = oracle::scratch_dir("features") / "f.bin";
  write_feature_file(path, b);
  const auto back = read_feature_file(path);
  REQUIRE(back.levels.size() == 2);
  CHECK(back.levels[1] == b.levels[1]);
}

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 3)) == 0.0);
  CHECK(cosine_similarity(Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 2)) == doctest::Approx(1.0));
  CHECK(cosine_similarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 2)) == 0.0);
}

TEST_CASE("builtin embedding") {
  const BuiltinEmbedding emb({1.0}, 8, 2);
  SUBCASE("a constant image has only colour features") {
    const auto f = emb.raw_features(constant_image(8, 8, 0.1, 0.2, 0.3));
    REQUIRE(f.size() == 36);
    for (int cell = 0; cell < 4; ++cell) {
      CHECK(f[cell * 9 + 0] == doctest::Approx(0.1));
      CHECK(f[cell * 9 + 1] == doctest::Approx(0.2));
      CHECK(f[cell * 9 + 2] == doctest::Approx(0.3));
      for (int k = 3; k < 9; ++k) CHECK(f[cell * 9 + k] == 0.0);
    }
  }
  SUBCASE("features have unit norm") {
    std::mt19937_64 rng(36);
    for (int t = 0; t < 20; ++t) CHECK(emb.embed(oracle::random_image(rng, 8, 8)).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("a shifted checkerboard is distinguishable") {
    ImageBuffer<double> a(8, 8, 3, 0.0), b(8, 8, 3, 0.0);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        for (int c = 0; c < 3; ++c) {
          a.at(x, y, c) = ((x / 2 + y / 2) % 2) ? 1.0 : 0.0;
          b.at(x, y, c) = (((x + 1) / 2 + y / 2) % 2) ? 1.0 : 0.0;
        }
      }
    }
    CHECK(cosine_similarity(emb.embed(a), emb.embed(b)) < 1.0 - 1e-6);
  }
}

TEST_CASE("information potential examples") {
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(5, 3);
  onehot(0, 0) = 0.7;
  onehot(2, 1) = 1.0;
  onehot(4, 2) = 0.01;
  CHECK(ip_loss(onehot).loss == doctest::Approx(-1.0).epsilon(1e-14));

  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(8, 2, 0.1);
  CHECK(ip_loss(uniform).loss == doctest::Approx(-1.0 / 8).epsilon(1e-14));

  Eigen::MatrixXd two(4, 1);
  two << 0.5, 0.5, 0, 0;
  CHECK(ip_loss(two).loss == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("rays without weight are excluded") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 3);
  w(1, 1) = 1.0;
  const auto res = ip_loss(w);
  CHECK(res.included == 1);
  CHECK(res.excluded == 2);
  CHECK_FALSE(res.empty);
  CHECK(res.loss == doctest::Approx(-1.0));
  CHECK(res.gradient.col(0).isZero(0));

  const auto none = ip_loss(Eigen::MatrixXd::Zero(4, 2));
  CHECK(none.empty);
  CHECK(none.loss == 0.0);
  CHECK(none.excluded == 2);

  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 1);
  bad(0, 0) = -0.1;
  CHECK_THROWS_AS(ip_loss(bad), ContractError);
}

TEST_CASE("property: information potential bounds and scale invariance") {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 300; ++t) {
    const int n = oracle::uniform_int(rng, 1, 64), r = oracle::uniform_int(rng, 1, 8);
    Eigen::MatrixXd w(n, r);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = oracle::uniform(rng, 0, 1) < 0.3 ? 0.0 : oracle::uniform(rng, 0, 1);
    }
    w.col(0)(oracle::uniform_int(rng, 0, n - 1)) = 0.5;
    const auto res = ip_loss(w);
    CHECK(res.loss >= -1.0 - 1e-12);
    CHECK(res.loss <= -1.0 / n + 1e-12);
    Eigen::MatrixXd scaled = w;
    for (int c = 0; c < r; ++c) scaled.col(c) *= oracle::uniform(rng, 0.01, 100.0);
    CHECK(ip_loss(scaled).loss == doctest::Approx(res.loss).epsilon(1e-12));
  }
}

TEST_CASE("information potential gradients match central finite differences") {
  std::mt19937_64 rng(38);
  oracle::GradCheck total;
  for (int t = 0; t < 50; ++t) total.merge(oracle::check_ip_instance(rng));
  CHECK(total.max_error < 1e-4);
}
