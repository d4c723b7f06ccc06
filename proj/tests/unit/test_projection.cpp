#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "imp/projection.hpp"
#include "imp/rng.hpp"
#include "imp/synthetic.hpp"
#include "support/oracles.hpp"

using namespace imp;

namespace {

Detection constant_det(int cls, float score, BBox box, int h, int w, float fill, int index) {
  Detection d;
  d.class_id = cls;
  d.score = score;
  d.bbox = box;
  d.mask = InstanceMask(h, w, fill);
  d.index = index;
  return d;
}

template <class T>
void check_against_oracle(const std::vector<BasicDetection<T>>& dets, const CanvasSpec& spec) {
  const auto fast = imp_forward(dets, spec);
  const auto slow = oracle::forward(dets, spec);
  REQUIRE(fast.canvas.values.data.size() == slow.canvas.data.size());
  for (std::size_t i = 0; i < slow.canvas.data.size(); ++i) {
    CHECK(fast.canvas.values.data[i] == slow.canvas.data[i]);
    CHECK(fast.provenance.winner[i] == slow.winner[i]);
  }
}

}  // namespace

TEST_CASE("pre_map worked examples") {
  CanvasSpec spec{1, 64, 64, 4};
  auto p = pre_map(0, 0, BBox{0, 0, 8, 8}, 2, 2, spec);
  REQUIRE(p);
  CHECK(p->u == 0.f);
  CHECK(p->v == 0.f);
  const auto w = p->weights();
  CHECK(w[0] == 1.f);
  CHECK(w[1] == 0.f);
  CHECK(w[2] == 0.f);
  CHECK(w[3] == 0.f);
  CHECK(p->row.lo == 0);
  CHECK(p->col.lo == 0);

  CHECK_FALSE(pre_map(10, 10, BBox{0, 0, 8, 8}, 2, 2, spec));

  spec.scale = 1;
  p = pre_map(0, 0, BBox{0, 0, 1, 1}, 1, 1, spec);
  REQUIRE(p);
  CHECK(p->weights()[0] == 1.f);
  InstanceMask m(1, 1, 0.37f);
  CHECK(sample_value(m, *p) == 0.37f);
}

TEST_CASE("pre_map interior sample and half-open box") {
  const CanvasSpec spec{1, 64, 64, 4};
  // Cell 1 center is 6; in a [0,8) box with a 2-wide mask: t = 0.75, u = 1.0
  // clamps onto the last column.
  auto p = pre_map(0, 1, BBox{0, 0, 8, 8}, 2, 2, spec);
  REQUIRE(p);
  CHECK(p->col.lo == 1);
  CHECK(p->col.hi == 1);
  // Box [0, 16) with 4-wide mask; cell 1 center 6 -> t = 0.375, u = 1.0.
  p = pre_map(0, 1, BBox{0, 0, 16, 16}, 4, 4, spec);
  REQUIRE(p);
  CHECK(p->col.lo == 1);
  CHECK(p->col.hi == 2);
  CHECK(p->col.w_lo == 1.f);
  CHECK(p->col.w_hi == 0.f);
  // Box [0, 32), 4 wide; cell 1 -> t = 0.1875, u = 0.25.
  p = pre_map(0, 1, BBox{0, 0, 32, 32}, 4, 4, spec);
  REQUIRE(p);
  CHECK(p->col.lo == 0);
  CHECK(p->col.w_lo == 0.75f);
  CHECK(p->col.w_hi == 0.25f);
  const auto w = p->weights();
  CHECK(w[0] + w[1] + w[2] + w[3] == doctest::Approx(1.0).epsilon(1e-7));

  // Abutting boxes [0,8) and [8,16) partition cell centers: center 10 is
  // only in the second.
  CHECK_FALSE(pre_map(0, 2, BBox{0, 0, 8, 8}, 2, 2, spec));
  CHECK(pre_map(0, 2, BBox{8, 0, 16, 8}, 2, 2, spec));
  // Center exactly on x0 is inside, on x1 is outside.
  CHECK(pre_map(0, 0, BBox{2, 0, 6, 8}, 2, 2, spec));
  CHECK_FALSE(pre_map(0, 0, BBox{-2, 0, 2, 8}, 2, 2, spec));
}

TEST_CASE("imp_forward: identity projection") {
  const CanvasSpec spec{3, 32, 32, 4};
  std::vector<Detection> dets{constant_det(0, 1.f, {0, 0, 32, 32}, 4, 4, 1.f, 0)};
  const auto r = imp_forward(dets, spec);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      CHECK(r.canvas.at(0, y, x) == 1.f);
      CHECK(r.canvas.at(1, y, x) == 0.f);
      CHECK(r.canvas.at(2, y, x) == 0.f);
      CHECK(r.provenance.at(0, y, x) == 0);
      CHECK(r.provenance.at(1, y, x) == kNoWinner);
    }
  }
}

TEST_CASE("imp_forward: overlapping constant masks take the max score") {
  const CanvasSpec spec{1, 32, 32, 4};
  std::vector<Detection> dets{constant_det(0, 0.8f, {0, 0, 20, 32}, 3, 3, 1.f, 0),
                              constant_det(0, 0.6f, {12, 0, 32, 32}, 3, 3, 1.f, 1)};
  const auto r = imp_forward(dets, spec);
  // Cell centers: 2, 6, 10, 14, 18, 22, 26, 30.
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const float center = x * 4 + 2.f;
      const bool in0 = center < 20;
      const bool in1 = center >= 12;
      const float expected = in0 ? 0.8f : (in1 ? 0.6f : 0.f);
      CHECK(r.canvas.at(0, y, x) == expected);
      CHECK(r.provenance.at(0, y, x) == (in0 ? 0 : 1));
    }
  }
}

TEST_CASE("imp_forward matches the brute-force oracle bit for bit") {
  Rng rng(2024);
  const CanvasSpec spec{3, 64, 64, 4};  // 16 x 16 canvas
  for (int trial = 0; trial < 20; ++trial) {
    auto dets = random_detections<float>(rng, spec, 5);
    check_against_oracle(dets, spec);
  }
  RandomDetectionOptions quant;
  quant.quantized = true;
  for (int trial = 0; trial < 20; ++trial) {
    const CanvasSpec s{rng.uniform_int(1, 5), rng.uniform_int(1, 128), rng.uniform_int(1, 128),
                       rng.uniform_int(1, 4)};
    auto dets = random_detections<float>(rng, s, rng.uniform_int(0, 16), quant);
    check_against_oracle(dets, s);
  }
  for (int trial = 0; trial < 5; ++trial) {
    auto dets = random_detections<double>(rng, spec, 6);
    check_against_oracle(dets, spec);
  }
}

TEST_CASE("imp_forward: order invariance, monotonicity, bounds") {
  Rng rng(77);
  RandomDetectionOptions quant;
  quant.quantized = true;
  const CanvasSpec spec{4, 96, 80, 4};
  for (int trial = 0; trial < 10; ++trial) {
    auto dets = random_detections<float>(rng, spec, 12, trial % 2 ? quant : RandomDetectionOptions{});
    const auto base = imp_forward(dets, spec);
    for (float v : base.canvas.values.data) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
    auto shuffled = dets;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.uniform_int(0, static_cast<int>(i) - 1)]);
    const auto perm = imp_forward(shuffled, spec);
    CHECK(perm.canvas == base.canvas);
    CHECK(perm.provenance == base.provenance);

    // Appending a detection never lowers a cell.
    auto extra = random_detections<float>(rng, spec, 1);
    extra[0].index = static_cast<int>(dets.size());
    auto more = dets;
    more.push_back(extra[0]);
    const auto grown = imp_forward(more, spec);
    for (std::size_t i = 0; i < base.canvas.values.data.size(); ++i)
      CHECK(grown.canvas.values.data[i] >= base.canvas.values.data[i]);
  }
}

TEST_CASE("imp_forward: score scaling on sole-contributor cells") {
  Rng rng(5);
  const CanvasSpec spec{1, 48, 48, 4};
  auto dets = random_detections<float>(rng, spec, 1);
  dets[0].score = 0.75f;
  const auto base = imp_forward(dets, spec);
  for (float alpha : {0.5f, 0.25f, 1.f}) {
    auto scaled = dets;
    scaled[0].score *= alpha;
    const auto r = imp_forward(scaled, spec);
    for (std::size_t i = 0; i < r.canvas.values.data.size(); ++i)
      CHECK(r.canvas.values.data[i] == base.canvas.values.data[i] * alpha);
  }
}

TEST_CASE("imp_forward: box between cell centers covers nothing") {
  const CanvasSpec spec{1, 32, 32, 4};
  // Cell centers are at 2, 6, ...; [2.5, 5.5) contains none.
  std::vector<Detection> dets{constant_det(0, 1.f, {2.5f, 2.5f, 5.5f, 5.5f}, 2, 2, 1.f, 0)};
  const auto r = imp_forward(dets, spec);
  for (float v : r.canvas.values.data) CHECK(v == 0.f);
  const auto g = imp_backward(Tensor3<float>(1, 8, 8, 1.f), r.provenance, dets);
  CHECK(g[0].d_score == 0.0);
}

TEST_CASE("imp_forward rejects invalid detections") {
  const CanvasSpec spec{2, 32, 32, 4};
  std::vector<Detection> dets{constant_det(2, 1.f, {0, 0, 8, 8}, 2, 2, 1.f, 0)};
  CHECK_THROWS_AS(imp_forward(dets, spec), Error);
}

TEST_CASE("imp_backward: full-cover all-ones example") {
  const CanvasSpec spec{1, 32, 32, 4};
  std::vector<Detection> dets{constant_det(0, 1.f, {0, 0, 32, 32}, 2, 2, 1.f, 0)};
  const auto r = imp_forward(dets, spec);
  const auto g = imp_backward(Tensor3<float>(1, 8, 8, 1.f), r.provenance, dets);
  REQUIRE(g.size() == 1);
  CHECK(g[0].d_score == doctest::Approx(64.0).epsilon(1e-12));
  const double mass = std::accumulate(g[0].d_mask.begin(), g[0].d_mask.end(), 0.0);
  CHECK(mass == doctest::Approx(64.0).epsilon(1e-6));
  // By symmetry each of the four mask cells receives a quarter.
  for (double v : g[0].d_mask) CHECK(v == doctest::Approx(16.0).epsilon(1e-6));
}

TEST_CASE("imp_backward: zero upstream gives zero gradients") {
  Rng rng(9);
  const CanvasSpec spec{3, 64, 64, 4};
  auto dets = random_detections<float>(rng, spec, 6);
  const auto r = imp_forward(dets, spec);
  const auto g = imp_backward(Tensor3<float>(3, 16, 16, 0.f), r.provenance, dets);
  for (const auto& dg : g) {
    CHECK(dg.d_score == 0.0);
    for (double v : dg.d_mask) CHECK(v == 0.0);
  }
}

TEST_CASE("imp_backward: losers get nothing, score freeze, shape check") {
  const CanvasSpec spec{1, 32, 32, 4};
  std::vector<Detection> dets{constant_det(0, 0.9f, {0, 0, 32, 32}, 2, 2, 1.f, 0),
                              constant_det(0, 0.4f, {0, 0, 16, 16}, 2, 2, 1.f, 1)};
  const auto r = imp_forward(dets, spec);
  auto g = imp_backward(Tensor3<float>(1, 8, 8, 1.f), r.provenance, dets);
  CHECK(g[1].d_score == 0.0);
  for (double v : g[1].d_mask) CHECK(v == 0.0);
  CHECK(g[0].d_score > 0.0);

  g = imp_backward(Tensor3<float>(1, 8, 8, 1.f), r.provenance, dets, BackwardOptions{false});
  CHECK(g[0].d_score == 0.0);
  CHECK(g[0].d_mask[0] > 0.0);

  CHECK_THROWS_AS(imp_backward(Tensor3<float>(1, 8, 7, 1.f), r.provenance, dets), Error);
  try {
    imp_backward(Tensor3<float>(2, 8, 8, 1.f), r.provenance, dets);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("imp_backward: exact ties route to the lowest index") {
  const CanvasSpec spec{1, 16, 16, 4};
  std::vector<Detection> dets{constant_det(0, 0.5f, {0, 0, 16, 16}, 2, 2, 1.f, 1),
                              constant_det(0, 0.5f, {0, 0, 16, 16}, 2, 2, 1.f, 0)};
  const auto r = imp_forward(dets, spec);
  for (auto w : r.provenance.winner) CHECK(w == 0);
  const auto g = imp_backward(Tensor3<float>(1, 4, 4, 1.f), r.provenance, dets);
  CHECK(g[0].d_score == 0.0);  // list position 0 holds index 1
  CHECK(g[1].d_score == doctest::Approx(16.0));
}

TEST_CASE("imp_backward matches central finite differences (double)") {
  // L = sum(g * canvas); tie-free instance built from separated contributions.
  Rng rng(31337);
  const CanvasSpec spec{2, 64, 64, 4};
  RandomDetectionOptions opts;
  opts.min_score = 0.3;
  opts.max_score = 0.95;
  opts.min_mask_value = 0.05;
  opts.max_mask_value = 0.95;
  opts.min_mask = 3;
  opts.max_mask = 6;
  opts.min_box_fraction = 0.3;
  auto dets = random_detections<double>(rng, spec, 4, opts);
  Tensor3<double> g(2, 16, 16);
  for (auto& v : g.data) v = rng.uniform(-1.0, 1.0);

  const double h = 1e-3;
  const auto ties = find_near_ties(std::span<const BasicDetection<double>>(dets), spec, 2 * h);
  std::vector<char> tied_det(dets.size(), 0);
  for (const auto& t : ties)
    for (int idx : t.contenders) tied_det[idx] = 1;

  auto loss = [&](const std::vector<BasicDetection<double>>& ds) {
    const auto r = imp_forward(ds, spec);
    double s = 0;
    for (std::size_t i = 0; i < g.data.size(); ++i) s += g.data[i] * r.canvas.values.data[i];
    return s;
  };
  const auto fwd = imp_forward(dets, spec);
  const auto grads = imp_backward(g, fwd.provenance, dets);
  auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
  };
  int checked = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (tied_det[dets[i].index]) continue;
    auto p = dets, m = dets;
    p[i].score += h;
    m[i].score -= h;
    CHECK(rel(grads[i].d_score, (loss(p) - loss(m)) / (2 * h)) <= 1e-4);
    for (std::size_t k = 0; k < dets[i].mask.values.size(); ++k) {
      p = dets;
      m = dets;
      p[i].mask.values[k] += h;
      m[i].mask.values[k] -= h;
      CHECK(rel(grads[i].d_mask[k], (loss(p) - loss(m)) / (2 * h)) <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("find_near_ties flags exact and near ties") {
  const CanvasSpec spec{1, 16, 16, 4};
  std::vector<Detection> dets{constant_det(0, 0.5f, {0, 0, 8, 16}, 2, 2, 1.f, 0),
                              constant_det(0, 0.5004f, {0, 0, 16, 16}, 2, 2, 1.f, 1)};
  const auto ties = find_near_ties(std::span<const Detection>(dets), spec, 1e-3);
  CHECK(ties.size() == 8);  // the two left columns of a 4x4 canvas
  for (const auto& t : ties) CHECK(t.contenders == std::vector<int>{0, 1});
  CHECK(find_near_ties(std::span<const Detection>(dets), spec, 1e-4).empty());
}
