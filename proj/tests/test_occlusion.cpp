#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "aggflow/occlusion.hpp"

using namespace aggflow;

namespace {

MatchImage make_match(int w, int h, double (*fs)(int, int), double (*fv)(int, int)) {
  MatchImage m;
  m.width = w;
  m.height = h;
  m.data.resize((size_t)w * h * 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      m.data[((size_t)y * w + x) * 2 + 0] = fs(x, y);
      m.data[((size_t)y * w + x) * 2 + 1] = fv(x, y);
    }
  return m;
}

double tex_s(int x, int y) {
  return 0.5 + 0.3 * std::sin(0.37 * x + 0.8 * std::sin(0.21 * y)) +
         0.15 * std::sin(0.53 * y - 0.4 * std::cos(0.27 * x));
}

double tex_v(int x, int y) {
  return 0.5 + 0.25 * std::sin(0.29 * y + 0.6 * std::cos(0.19 * x)) +
         0.2 * std::cos(0.43 * x + 0.31 * y);
}

}  // namespace

TEST_CASE("forward-backward criterion flags exactly the inconsistent patches") {
  PatchSet set = build_patch_set(32, 32, {16}, 0.0);
  REQUIRE(set.grids[0].count() == 4);

  SUBCASE("exact inverses are consistent") {
    std::vector<Vec2i> fwd(4, {5, 0}), bwd(4, {-5, 0});
    auto po = patch_occlusion_map(set, 0, fwd, bwd, 1.0);
    for (uint8_t v : po.map.data) CHECK(v == 0);
    CHECK(po.centers.empty());
  }
  SUBCASE("a broken backward match flags the patch") {
    std::vector<Vec2i> fwd(4, {0, 0}), bwd(4, {0, 0});
    fwd[1] = {5, 0};  // top-right patch: ||(5,0)|| = 5 > 1
    auto po = patch_occlusion_map(set, 0, fwd, bwd, 1.0);
    REQUIRE(po.centers.size() == 1);
    CHECK(po.centers[0] == Vec2i{24, 8});
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        CHECK((int)po.map.at(x, y) == ((x >= 16 && y < 16) ? 1 : 0));
  }
  SUBCASE("threshold is strict") {
    std::vector<Vec2i> fwd(4, {1, 0}), bwd(4, {0, 0});
    auto po = patch_occlusion_map(set, 0, fwd, bwd, 1.0);  // norm == nu: consistent
    CHECK(po.centers.empty());
  }
}

TEST_CASE("identical frames produce no occlusion via backward matching") {
  MatchImage f = make_match(48, 48, tex_s, tex_v);
  PatchSet set = build_patch_set(48, 48, {16}, 0.75);
  PatchMatcher matcher(f, f, SearchStrategy{});
  auto fwd_all = matcher.match_grid(set, 0, 1, 1.0);
  std::vector<Vec2i> fwd;
  for (const auto& m : fwd_all) fwd.push_back(m[0].translation);
  auto bwd = backward_translations(set, 0, fwd, f, f, SearchStrategy{});
  auto po = patch_occlusion_map(set, 0, fwd, bwd, 2.0);
  for (uint8_t v : po.map.data) CHECK(v == 0);

  // A coherent shift stays consistent wherever the true translation is
  // feasible; content pushed over the right/bottom border is genuinely
  // unmatched and may be flagged.
  MatchImage f2 = make_match(48, 48, [](int x, int y) { return tex_s(x - 3, y - 1); },
                             [](int x, int y) { return tex_v(x - 3, y - 1); });
  PatchMatcher fwd_m(f, f2, SearchStrategy{});
  auto fa = fwd_m.match_grid(set, 0, 1, 1.0);
  fwd.clear();
  for (const auto& m : fa) fwd.push_back(m[0].translation);
  bwd = backward_translations(set, 0, fwd, f, f2, SearchStrategy{});
  po = patch_occlusion_map(set, 0, fwd, bwd, 2.0);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 29; ++x) CHECK(po.map.at(x, y) == 0);
}

TEST_CASE("parzen confidence map") {
  SUBCASE("no centers: zero map") {
    ConfidenceMap m = parzen_confidence({}, 2.0, 16, 16);
    for (double v : m.data) CHECK(v == 0.0);
  }
  SUBCASE("single interior center: unimodal, unit total mass") {
    ConfidenceMap m = parzen_confidence({{32, 32}}, 2.0, 64, 64);
    double peak = m.at(32, 32);
    double total = 0.0;
    for (double v : m.data) {
      CHECK(v >= 0.0);
      CHECK(v <= peak + 1e-15);
      total += v;
    }
    CHECK(total > 0.0);
    CHECK(total <= 1.0 + 1e-12);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));  // center is >= 4 sigma inside
    for (int x = 33; x < 40; ++x) CHECK(m.at(x, 32) <= m.at(x - 1, 32));
    for (int y = 33; y < 40; ++y) CHECK(m.at(32, y) <= m.at(32, y - 1));
  }
  SUBCASE("two distant centers halve the peak") {
    double sigma = 2.0;
    ConfidenceMap one = parzen_confidence({{20, 32}}, sigma, 64, 64);
    ConfidenceMap two = parzen_confidence({{20, 32}, {40, 32}}, sigma, 64, 64);  // 10 sigma apart
    CHECK(two.at(20, 32) == doctest::Approx(0.5 * one.at(20, 32)).epsilon(1e-9));
    CHECK(two.at(40, 32) == doctest::Approx(0.5 * one.at(20, 32)).epsilon(1e-9));
    double total = 0.0;
    for (double v : two.data) total += v;
    CHECK(total <= 1.0 + 1e-12);
    CHECK(total > 0.9);
  }
  SUBCASE("raw kernel mode applies the printed formula verbatim") {
    double sigma = 3.0;
    ConfidenceMap m = parzen_confidence({{16, 16}}, sigma, 32, 32, true);
    auto expect = [&](int x, int y) {
      double d2 = (x - 16.0) * (x - 16.0) + (y - 16.0) * (y - 16.0);
      return std::exp(-d2 / (2.0 * sigma * sigma)) / (sigma * 2.0 * M_PI);
    };
    CHECK(m.at(16, 16) == doctest::Approx(expect(16, 16)).epsilon(1e-12));
    CHECK(m.at(18, 13) == doctest::Approx(expect(18, 13)).epsilon(1e-12));
  }
}

TEST_CASE("search band geometry") {
  SUBCASE("no occlusion: empty band") {
    OcclusionMap o(16, 16, 0);
    SearchBand b = build_search_band(o, 3);
    CHECK(b.empty());
    CHECK(!b.all_occluded);
  }
  SUBCASE("left-half occlusion: three visible columns") {
    OcclusionMap o(64, 64, 0);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 32; ++x) o.at(x, y) = 1;
    SearchBand b = build_search_band(o, 3);
    std::set<int> cols;
    for (Vec2i p : b.pixels) {
      CHECK(o.at(p.x, p.y) == 0);
      cols.insert(p.x);
    }
    CHECK(cols == std::set<int>{32, 33, 34});
    CHECK(b.pixels.size() == 3 * 64);
  }
  SUBCASE("fully occluded frame sets the flag") {
    OcclusionMap o(8, 8, 1);
    SearchBand b = build_search_band(o, 2);
    CHECK(b.empty());
    CHECK(b.all_occluded);
  }
}

TEST_CASE("exemplar matching") {
  SUBCASE("an exact duplicate neighborhood wins") {
    // Texture periodic (period 8 in y) inside rows [0,32): the query's
    // window repeats exactly at +16 rows.
    auto fs = [](int x, int y) { return tex_s(x, y < 32 ? y % 8 : y); };
    auto fv = [](int x, int y) { return tex_v(x, y < 32 ? y % 8 : y); };
    MatchImage f = make_match(64, 64, fs, fv);
    OcclusionMap o(64, 64, 0);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 64; ++x) o.at(x, y) = 1;
    SearchBand band = build_search_band(o, 10);  // rows 16..25
    ExemplarMatch m = exemplar_match(f, {{20, 8}}, band, 11);
    REQUIRE(m.defined(20, 8));
    // Zero-cost duplicates sit at rows 16 and 24 in the band; row 16 is closer.
    CHECK(m.at(20, 8) == Vec2i{20, 16});
  }
  SUBCASE("cost ties break by distance, then row-major order") {
    MatchImage flat = make_match(32, 32, [](int, int) { return 0.5; },
                                 [](int, int) { return 0.5; });
    OcclusionMap o(32, 32, 0);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 32; ++x) o.at(x, y) = 1;
    o.at(5, 2) = 1;  // carve the straight-down match out of the band
    SearchBand band = build_search_band(o, 2);
    ExemplarMatch m = exemplar_match(flat, {{5, 1}}, band, 11);
    REQUIRE(m.defined(5, 1));
    CHECK(m.at(5, 1) == Vec2i{4, 2});  // ties (4,2)/(6,2): row-major first
  }
  SUBCASE("matches land in a duplicated strip") {
    // Columns [16,56) carry an 8-periodic texture (five periods). Occluding
    // the middle period leaves every query an exact twin 8 columns away whose
    // 11x11 window also sits fully inside the strip.
    auto fs = [](int x, int y) { return tex_s(x >= 16 && x < 56 ? (x - 16) % 8 + 16 : x, y); };
    auto fv = [](int x, int y) { return tex_v(x >= 16 && x < 56 ? (x - 16) % 8 + 16 : x, y); };
    MatchImage f = make_match(64, 64, fs, fv);
    OcclusionMap o(64, 64, 0);
    std::vector<Vec2i> queries;
    for (int y = 20; y < 40; ++y)
      for (int x = 32; x < 40; ++x) {
        o.at(x, y) = 1;
        queries.push_back({x, y});
      }
    SearchBand band = build_search_band(o, 10);
    ExemplarMatch m = exemplar_match(f, queries, band, 11);
    for (Vec2i q : queries) {
      REQUIRE(m.defined(q.x, q.y));
      Vec2i t = m.at(q.x, q.y);
      CHECK(t.y == q.y);
      CHECK(t.x >= 24);
      CHECK(t.x < 48);
      CHECK((t.x - 16) % 8 == (q.x - 16) % 8);
    }
  }
  SUBCASE("empty band is an error") {
    MatchImage f = make_match(16, 16, tex_s, tex_v);
    CHECK_THROWS_AS(exemplar_match(f, {{3, 3}}, SearchBand{}, 11), std::invalid_argument);
  }
}

TEST_CASE("candidate extension") {
  SUBCASE("no occlusion: only the camera vector is added") {
    CandidateSet c(3, 2);
    for (auto& list : c.data) list = {{{1.0, 0.0}, CandidateTag::patch_local}};
    OcclusionMap o(3, 2, 0);
    FlowField cam(3, 2, {0.5, -0.5});
    auto copied = extend_candidates(c, o, ExemplarMatch(3, 2), cam);
    for (const auto& idx : copied) CHECK(idx.empty());
    for (const auto& list : c.data) {
      REQUIRE(list.size() == 2);
      CHECK(list[1].v == Vec2{0.5, -0.5});
      CHECK(list[1].tag == CandidateTag::camera);
    }
  }
  SUBCASE("occluded pixels absorb their exemplar's candidates") {
    CandidateSet c(2, 1);
    c.at(0, 0) = {{{1.0, 0.0}, CandidateTag::patch_local}};
    c.at(1, 0) = {{{2.0, 0.0}, CandidateTag::patch_local}};
    OcclusionMap o(2, 1, 0);
    o.at(0, 0) = 1;
    ExemplarMatch m(2, 1);
    m.set(0, 0, {1, 0});
    FlowField cam(2, 1, {0.0, 0.0});
    auto copied = extend_candidates(c, o, m, cam);

    const auto& list = c.at(0, 0);
    REQUIRE(list.size() == 3);
    CHECK(list[0].v == Vec2{1.0, 0.0});
    CHECK(list[0].tag == CandidateTag::patch_local);
    CHECK(list[1].v == Vec2{2.0, 0.0});
    CHECK(list[1].tag == CandidateTag::exemplar_copied);
    CHECK(list[2].v == Vec2{0.0, 0.0});
    CHECK(list[2].tag == CandidateTag::camera);
    CHECK(copied[0] == std::vector<int>{1});
    // The visible pixel only gained the camera vector.
    CHECK(c.at(1, 0).size() == 2);
    CHECK(copied[1].empty());
  }
  SUBCASE("duplicate copies point at the existing entry") {
    CandidateSet c(2, 1);
    c.at(0, 0) = {{{1.0, 0.0}, CandidateTag::patch_local}};
    c.at(1, 0) = {{{1.0, 0.0}, CandidateTag::patch_local},
                  {{3.0, 1.0}, CandidateTag::patch_local}};
    OcclusionMap o(2, 1, 0);
    o.at(0, 0) = 1;
    ExemplarMatch m(2, 1);
    m.set(0, 0, {1, 0});
    FlowField cam(2, 1, {9.0, 9.0});
    auto copied = extend_candidates(c, o, m, cam);
    CHECK(copied[0] == std::vector<int>{0, 1});
    const auto& list = c.at(0, 0);
    REQUIRE(list.size() == 3);
    CHECK(list[0].tag == CandidateTag::patch_local);  // kept, not re-tagged
    CHECK(list[1].v == Vec2{3.0, 1.0});
    CHECK(list[2].tag == CandidateTag::camera);
  }
}
