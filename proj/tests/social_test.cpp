#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "laeo/social.hpp"

using namespace laeo;
using namespace laeo::social;

TEST(AverageLaeo, Arithmetic) {
  std::vector<double> half(10, 0.0);
  for (int i = 0; i < 5; ++i) half[std::size_t(i)] = 1.0;
  EXPECT_DOUBLE_EQ(average_laeo(half), 0.5);
  EXPECT_EQ(average_laeo({0, 0, 0}), 0.0);
  EXPECT_NEAR(average_laeo({0.2, 0.4, 0.6}), 0.4, 1e-15);
  EXPECT_THROW(average_laeo({}), ValidationError);
}

TEST(PairScores, MiniEpisodeHandValues) {
  const auto rows = pair_scores(fixture::mini_episode(), 1);
  ASSERT_EQ(rows.size(), 7u);
  struct Want {
    const char *shot, *a, *b;
    int co;
    double al, scr, ups;
    bool label;
  };
  const Want want[] = {{"s1", "ana", "ben", 20, 0.6875, 1.0, 1.0, true},
                       {"s2", "cal", "dee", 20, 0.21875, 1.0, 1.0 / 3, false},
                       {"s2", "cal", "eve", 10, 0.75, 0.5, 1.0 / 3, true},
                       {"s2", "dee", "eve", 10, 0.0, 0.5, 1.0 / 3, false},
                       {"s3", "ana", "ben", 10, 0.25, 0.5, 0.5, false},
                       {"s3", "ana", "fay", 10, 0.625, 0.5, 0.5, true},
                       {"s4", "dee", "fay", 20, 0.375, 1.0, 1.0, false}};
  for (std::size_t i = 0; i < 7; ++i) {
    SCOPED_TRACE(i);
    EXPECT_EQ(rows[i].shot_id, want[i].shot);
    EXPECT_EQ(rows[i].char_a, want[i].a);
    EXPECT_EQ(rows[i].char_b, want[i].b);
    EXPECT_EQ(rows[i].coexisting, want[i].co);
    EXPECT_EQ(rows[i].al, want[i].al);
    EXPECT_EQ(rows[i].scr, want[i].scr);
    EXPECT_EQ(rows[i].ups, want[i].ups);
    EXPECT_EQ(rows[i].upe, 1.0 / 6);
    EXPECT_EQ(rows[i].label, want[i].label);
    EXPECT_GE(rows[i].rp, 0.0);
    EXPECT_LT(rows[i].rp, 1.0);
  }
}

TEST(PairScores, UpsTimesPairsIsOne) {
  const auto rows = pair_scores(fixture::mini_episode(), 1);
  std::map<std::string, std::pair<double, int>> per_shot;
  for (const auto& r : rows) {
    per_shot[r.shot_id].first = r.ups;
    per_shot[r.shot_id].second += 1;
    EXPECT_GE(r.scr, 0.0);
    EXPECT_LE(r.scr, 1.0);
  }
  for (const auto& [shot, v] : per_shot) EXPECT_EQ(v.first * v.second, 1.0);
}

namespace {
Episode two_person(int shot_last, int y_first) {
  Episode ep;
  ShotRecord s;
  s.shot_id = "s";
  s.video_id = "v";
  s.first = 0;
  s.last = shot_last;
  ep.shots = {s};
  ep.tracks = {HeadTrack{0, "v", 0, std::vector<BoundingBox>(std::size_t(shot_last + 1), BoundingBox{0, 0, 10, 10})},
               HeadTrack{1, "v", y_first, std::vector<BoundingBox>(std::size_t(shot_last - y_first + 1), BoundingBox{20, 0, 30, 10})}};
  ep.characters = {{"v", 0, "x", Role::Main}, {"v", 1, "y", Role::Main}};
  return ep;
}
}  // namespace

TEST(PairScores, AlIgnoresNonCoexistingFrames) {
  auto ep = two_person(39, 30);
  for (int f = 30; f <= 39; ++f) ep.scores.push_back({"v", 0, 1, f, f % 2 ? 0.25 : 0.75});
  const auto base = pair_scores(ep, 1);
  // Earlier frames where only x is visible change SCR but not AL.
  auto longer = two_person(59, 50);
  for (int f = 50; f <= 59; ++f) longer.scores.push_back({"v", 0, 1, f, f % 2 ? 0.25 : 0.75});
  const auto ext = pair_scores(longer, 1);
  EXPECT_EQ(base[0].al, 0.5);
  EXPECT_EQ(ext[0].al, base[0].al);
  EXPECT_EQ(base[0].scr, 0.25);
  EXPECT_EQ(ext[0].scr, 10.0 / 60);
}

TEST(PairScores, SimpleBaselineExamples) {
  // Pair co-existing 30 of 60 frames, no scores.
  auto rows = pair_scores(two_person(59, 30), 0);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].scr, 0.5);
  EXPECT_EQ(rows[0].ups, 1.0);
  EXPECT_EQ(rows[0].al, 0.0);
}

TEST(PairScores, DuplicateOwnershipRejected) {
  auto ep = fixture::mini_episode();
  ep.characters.push_back({"ep1", 0, "ben", Role::Main});
  EXPECT_THROW(pair_scores(ep, 1), ValidationError);
}

TEST(InteractionAp, AlRanksFirstPairAgnostic) {
  const auto rows = pair_scores(fixture::mini_episode(), 1);
  const double al = interaction_ap(rows, Score::AL);
  EXPECT_EQ(al, 1.0);
  for (Score s : {Score::SCR, Score::UPS, Score::UPE, Score::RP}) EXPECT_LT(interaction_ap(rows, s), al) << to_string(s);
  // SCR ranking: positives at ranks 1, 4 and 7 (ties in row order).
  EXPECT_NEAR(interaction_ap(rows, Score::SCR), (1.0 + 2.0 / 4 + 3.0 / 7) / 3, 1e-15);
}

TEST(InteractionAp, PerPairMode) {
  const auto rows = pair_scores(fixture::mini_episode(), 1);
  // ana/ben: interacting in s1 (AL 0.6875), not in s3 (AL 0.25).
  EXPECT_EQ(interaction_ap(rows, Score::AL, std::pair<std::string, std::string>{"ben", "ana"}), 1.0);
  EXPECT_THROW(interaction_ap(rows, Score::AL, std::pair<std::string, std::string>{"dee", "fay"}), ValidationError);
}

TEST(InteractionAp, RandomScoresNearPrevalence) {
  auto rows = pair_scores(fixture::mini_episode(), 1);
  // Replicate rows to get a larger pool: prevalence 3/7.
  std::vector<PairRow> big;
  for (int k = 0; k < 40; ++k) big.insert(big.end(), rows.begin(), rows.end());
  double mean = 0;
  const int reps = 1000;
  for (int seed = 0; seed < reps; ++seed) {
    Rng rng{std::uint64_t(seed)};
    for (auto& r : big) r.rp = rng.uniform();
    mean += interaction_ap(big, Score::RP) / reps;
  }
  EXPECT_NEAR(mean, 3.0 / 7, 0.02);
}

TEST(FriendGraph, MeanAlAndNodes) {
  const auto rows = pair_scores(fixture::mini_episode(), 1);
  const auto g = friendness_graph(rows);
  // ana/ben appear in two shots: (0.6875 + 0.25) / 2.
  bool found = false;
  for (const auto& e : g.edges)
    if (e.a == "ana" && e.b == "ben") {
      found = true;
      EXPECT_EQ(e.weight, (0.6875 + 0.25) / 2);
      EXPECT_EQ(e.shots, 2);
    }
  EXPECT_TRUE(found);
  EXPECT_EQ(g.edges.size(), 6u);
  EXPECT_EQ(g.nodes, (std::vector<std::string>{"ana", "ben", "cal", "dee", "eve", "fay"}));
  for (const auto& e : g.edges) EXPECT_FALSE(e.a == "ben" && e.b == "fay");
  const auto dot = to_dot(g);
  EXPECT_NE(dot.find("\"ana\" -- \"ben\" [weight=0.468750, penwidth=3.750000];"), std::string::npos);
}

TEST(Rows, CsvHasHeaderAndRows) {
  const auto csv = rows_csv(pair_scores(fixture::mini_episode(), 1));
  EXPECT_EQ(csv.rfind("#format=laeo-social,version=1\nshot_id,char_a,char_b,AL,SCR,UPS,UPE,RP,label\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
  EXPECT_NE(csv.find("s1,ana,ben,0.687500,1.000000,1.000000,0.166667,"), std::string::npos);
}

TEST(Roles, Parse) {
  EXPECT_EQ(role_from_string("wrong"), Role::Wrong);
  EXPECT_THROW(role_from_string("extra"), ValidationError);
}
