#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "glam/errors.hpp"
#include "glam/retrieval.hpp"
#include "oracles/brute_ap.hpp"
#include "support.hpp"

using namespace glam;
using glam::oracle::brute_ap;
using glam::oracle::brute_p10;
using glam::test::random_unit;

namespace {

struct Instance {
  std::vector<std::string> ranking;
  IdSet pos, junk;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 25);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  const int n = size(rng);
  const double ppos = u(rng), pjunk = 0.3 * u(rng);
  for (int i = 0; i < n; ++i) {
    const std::string id = "i" + std::to_string(i);
    in.ranking.push_back(id);
    const double x = u(rng);
    if (x < pjunk) {
      in.junk.insert(id);
    } else if (x < pjunk + ppos * (1 - pjunk)) {
      in.pos.insert(id);
    }
  }
  // Positives missing from the ranking still count.
  if (u(rng) < 0.2) in.pos.insert("absent");
  std::shuffle(in.ranking.begin(), in.ranking.end(), rng);
  return in;
}

std::vector<std::string> ids(std::initializer_list<const char*> l) { return {l.begin(), l.end()}; }

Descriptor unit_desc(const std::string& id, std::vector<double> v) {
  return {id, Tensor::from_vector(std::move(v))};
}

}  // namespace

TEST(AveragePrecision, PerfectRankingIsOne) {
  EXPECT_EQ(*average_precision(ids({"a", "b", "c", "d"}), {"a", "b"}, {}), 1.0);
  EXPECT_EQ(*average_precision(ids({"a"}), {"a"}, {}), 1.0);
}

TEST(AveragePrecision, SinglePositiveAtSecondPlace) {
  EXPECT_EQ(*average_precision(ids({"n", "p"}), {"p"}, {}), 0.25);
}

TEST(AveragePrecision, JunkIsRemovedBeforeScoring) {
  EXPECT_EQ(*average_precision(ids({"j", "p", "n"}), {"p"}, {"j"}), 1.0);
  EXPECT_EQ(*average_precision(ids({"n", "j", "p"}), {"p"}, {"j"}), 0.25);
}

TEST(AveragePrecision, MissingPositiveCountsInDenominator) {
  EXPECT_EQ(*average_precision(ids({"p", "n"}), {"p", "q"}, {}), 0.5);
}

TEST(AveragePrecision, NoPositiveIsSkipped) {
  EXPECT_FALSE(average_precision(ids({"a"}), {}, {}).has_value());
  EXPECT_FALSE(average_precision(ids({"a"}), {"a"}, {"a"}).has_value());
  EXPECT_FALSE(precision_at_10(ids({"a"}), {}, {}).has_value());
}

TEST(AveragePrecision, MatchesBruteForceOracle) {
  std::mt19937_64 rng(1);
  int scored = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Instance in = random_instance(rng);
    const auto a = average_precision(in.ranking, in.pos, in.junk);
    const auto b = brute_ap(in.ranking, in.pos, in.junk);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (!a) continue;
    ++scored;
    EXPECT_EQ(*a, *b);
    EXPECT_GE(*a, 0.0);
    EXPECT_LE(*a, 1.0);
    EXPECT_EQ(*precision_at_10(in.ranking, in.pos, in.junk), *brute_p10(in.ranking, in.pos, in.junk));
  }
  EXPECT_GT(scored, 300);
}

TEST(AveragePrecision, JunkInsertionInvariance) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Instance in = random_instance(rng);
    const auto ap = average_precision(in.ranking, in.pos, in.junk);
    const auto p10 = precision_at_10(in.ranking, in.pos, in.junk);
    std::uniform_int_distribution<std::size_t> at(0, in.ranking.size());
    for (int k = 0; k < 3; ++k) {
      const std::string j = "junk" + std::to_string(k);
      in.ranking.insert(in.ranking.begin() + static_cast<std::ptrdiff_t>(at(rng)), j);
      in.junk.insert(j);
    }
    EXPECT_EQ(average_precision(in.ranking, in.pos, in.junk), ap);
    EXPECT_EQ(precision_at_10(in.ranking, in.pos, in.junk), p10);
  }
}

TEST(AveragePrecision, InvariantBelowLastPositive) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Instance in = random_instance(rng);
    const auto ap = average_precision(in.ranking, in.pos, in.junk);
    std::size_t last = 0;
    for (std::size_t i = 0; i < in.ranking.size(); ++i)
      if (in.pos.count(in.ranking[i]) && !in.junk.count(in.ranking[i])) last = i + 1;
    std::shuffle(in.ranking.begin() + static_cast<std::ptrdiff_t>(last), in.ranking.end(), rng);
    EXPECT_EQ(average_precision(in.ranking, in.pos, in.junk), ap);
  }
}

TEST(AveragePrecision, OneIffPositivesLead) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const Instance in = random_instance(rng);
    const auto ap = average_precision(in.ranking, in.pos, in.junk);
    if (!ap) continue;
    const auto list = glam::oracle::without_junk(in.ranking, in.junk);
    std::size_t live = 0;
    for (const auto& p : in.pos) live += in.junk.count(p) ? 0 : 1;
    bool lead = true;
    for (std::size_t i = 0; i < list.size(); ++i) lead = lead && (i >= live || in.pos.count(list[i]) > 0);
    lead = lead && list.size() >= live && std::all_of(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(std::min(live, list.size())),
                                                      [&](const std::string& id) { return in.pos.count(id) > 0; });
    EXPECT_EQ(*ap == 1.0, lead);
  }
}

TEST(PrecisionAt10, Examples) {
  std::vector<std::string> r;
  for (int i = 0; i < 20; ++i) r.push_back("x" + std::to_string(i));
  IdSet ten, none{"x15"}, three{"x0", "x4", "x9", "x10"};
  for (int i = 0; i < 10; ++i) ten.insert("x" + std::to_string(i));
  EXPECT_EQ(*precision_at_10(r, ten, {}), 1.0);
  EXPECT_EQ(*precision_at_10(r, none, {}), 0.0);
  EXPECT_EQ(*precision_at_10(r, three, {}), 0.3);
  EXPECT_EQ(*precision_at_10(r, {"x0"}, {}), 0.1);
  EXPECT_EQ(*precision_at_10(r, {"x10"}, {"x1"}), 0.1);
}

TEST(Rank, SelfAndOrthogonal) {
  const std::vector<Descriptor> db{unit_desc("c", {0, 0, 1}), unit_desc("a", {0, 1, 0}), unit_desc("b", {1, 0, 0})};
  const RankedList r = rank(unit_desc("q", {1, 0, 0}), db);
  EXPECT_EQ(r.query_id, "q");
  EXPECT_EQ(r.ids, ids({"b", "a", "c"}));
  EXPECT_THROW(rank(unit_desc("q", {1, 0}), db), ShapeError);
}

TEST(Rank, MatchesPairwiseSort) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Descriptor> db;
    for (int i = 0; i < 30; ++i) db.push_back({"d" + std::to_string(100 + i), random_unit(8, rng)});
    db.push_back({"dup", db[3].vec});
    const Descriptor q{"q", random_unit(8, rng)};
    const RankedList r = rank(q, db);
    ASSERT_EQ(r.ids.size(), db.size());
    auto score = [&](const std::string& id) {
      const auto it = std::find_if(db.begin(), db.end(), [&](const Descriptor& d) { return d.id == id; });
      double s = 0.0;
      for (std::size_t k = 0; k < 8; ++k) s += q.vec[k] * it->vec[k];
      return s;
    };
    for (std::size_t i = 0; i + 1 < r.ids.size(); ++i) {
      const double a = score(r.ids[i]), b = score(r.ids[i + 1]);
      EXPECT_TRUE(a > b || (a == b && r.ids[i] < r.ids[i + 1])) << i;
    }
  }
}

namespace {

RetrievalGroundTruth small_gt() {
  RetrievalGroundTruth gt;
  gt.queries.push_back({"q1", {"e1"}, {"h1"}, {"j1"}});
  gt.queries.push_back({"q2", {"e1"}, {}, {}});
  return gt;
}

std::vector<Descriptor> small_descs() {
  return {unit_desc("q1", {1, 0, 0}), unit_desc("q2", {0, 1, 0}), unit_desc("e1", {0.8, 0.6, 0}),
          unit_desc("h1", {0.6, 0, 0.8}), unit_desc("j1", {1, 0, 0}), unit_desc("n1", {0, 0.6, 0.8})};
}

}  // namespace

TEST(Protocol, SetDefinitions) {
  const QueryTruth q{"q", {"e"}, {"h"}, {"j"}};
  const ProtocolSets m = protocol_sets(q, Protocol::medium);
  const ProtocolSets h = protocol_sets(q, Protocol::hard);
  EXPECT_EQ(m.positives, (IdSet{"e", "h"}));
  EXPECT_EQ(m.junk, (IdSet{"j"}));
  EXPECT_EQ(h.positives, (IdSet{"h"}));
  EXPECT_EQ(h.junk, (IdSet{"e", "j"}));
  EXPECT_TRUE(std::includes(m.positives.begin(), m.positives.end(), h.positives.begin(), h.positives.end()));
  EXPECT_EQ(parse_protocol("hard"), Protocol::hard);
  EXPECT_EQ(protocol_name(Protocol::medium), "medium");
  EXPECT_THROW(parse_protocol("easy"), std::invalid_argument);
}

TEST(MapProtocol, PositivesOnTopScoreOneInBoth) {
  RetrievalGroundTruth gt;
  gt.queries.push_back({"q", {"a"}, {"b"}, {}});
  const std::vector<Descriptor> d{unit_desc("q", {1, 0}), unit_desc("a", {1, 0}), unit_desc("b", {0.8, 0.6}),
                                  unit_desc("n", {0, 1})};
  EXPECT_EQ(map_protocol(d, gt, Protocol::medium).mean_ap, 1.0);
  EXPECT_EQ(map_protocol(d, gt, Protocol::hard).mean_ap, 1.0);
}

TEST(MapProtocol, EasyOnlyQuerySkippedInHard) {
  const auto gt = small_gt();
  const auto descs = small_descs();
  const ProtocolReport m = map_protocol(descs, gt, Protocol::medium);
  const ProtocolReport h = map_protocol(descs, gt, Protocol::hard);
  EXPECT_EQ(m.evaluated, 2u);
  EXPECT_EQ(h.evaluated, 1u);
  EXPECT_FALSE(h.queries[1].ap.has_value());
  // q1 medium: database order e1(.8) h1(.6) n1(0), j1 junk -> AP 1.
  EXPECT_EQ(*m.queries[0].ap, 1.0);
  // q1 hard: e1 becomes junk, h1 first -> 1.
  EXPECT_EQ(*h.queries[0].ap, 1.0);
  // q2 medium: e1(.6) n1(.6) tie broken by id, e1 first -> 1.
  EXPECT_EQ(*m.queries[1].ap, 1.0);
  EXPECT_EQ(m.mean_p10, (0.2 + 0.1) / 2);
}

TEST(MapProtocol, AgreesWithBruteForcePipeline) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Descriptor> descs;
    for (int i = 0; i < 20; ++i) descs.push_back({"db" + std::to_string(i), random_unit(4, rng)});
    RetrievalGroundTruth gt;
    for (int q = 0; q < 4; ++q) {
      descs.push_back({"q" + std::to_string(q), random_unit(4, rng)});
      QueryTruth t{"q" + std::to_string(q), {}, {}, {}};
      for (int i = 0; i < 20; ++i) {
        const int r = static_cast<int>(rng() % 6);
        const std::string id = "db" + std::to_string(i);
        if (r == 0) t.easy.push_back(id);
        if (r == 1) t.hard.push_back(id);
        if (r == 2) t.junk.push_back(id);
      }
      gt.queries.push_back(t);
    }
    std::vector<Descriptor> db(descs.begin(), descs.begin() + 20);
    for (Protocol p : {Protocol::medium, Protocol::hard}) {
      const ProtocolReport rep = map_protocol(descs, gt, p);
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t q = 0; q < gt.queries.size(); ++q) {
        const ProtocolSets s = protocol_sets(gt.queries[q], p);
        const auto ap = brute_ap(rank(descs[20 + q], db).ids, s.positives, s.junk);
        ASSERT_EQ(ap.has_value(), rep.queries[q].ap.has_value());
        if (ap) {
          EXPECT_EQ(*ap, *rep.queries[q].ap);
          sum += *ap;
          ++n;
        }
      }
      EXPECT_EQ(rep.evaluated, n);
      if (n > 0) EXPECT_NEAR(rep.mean_ap, sum / n, 1e-15);
    }
  }
}

TEST(MapProtocol, RejectsInconsistentInput) {
  auto gt = small_gt();
  auto descs = small_descs();
  descs.push_back(unit_desc("e1", {1, 0, 0}));
  EXPECT_THROW(map_protocol(descs, gt, Protocol::medium), std::invalid_argument);
  descs = small_descs();
  descs.erase(descs.begin());
  EXPECT_THROW(map_protocol(descs, gt, Protocol::medium), std::invalid_argument);
  descs = small_descs();
  gt.queries[0].hard.push_back("ghost");
  EXPECT_THROW(map_protocol(descs, gt, Protocol::medium), std::invalid_argument);
}

TEST(GroundTruth, JsonRoundTripAndValidation) {
  const auto gt = small_gt();
  const auto back = parse_ground_truth(ground_truth_json(gt));
  ASSERT_EQ(back.queries.size(), 2u);
  EXPECT_EQ(back.queries[0].junk, ids({"j1"}));
  EXPECT_THROW(parse_ground_truth(R"({"queries":[{"id":"q","easy":["a"],"hard":["a"],"junk":[]}]})"),
               std::invalid_argument);
  EXPECT_THROW(parse_ground_truth(R"({"queries":[{"id":"q","easy":["q"],"hard":[],"junk":[]}]})"),
               std::invalid_argument);
  EXPECT_THROW(parse_ground_truth(R"({"queries":[{"id":"q","easy":[],"hard":[],"junk":[]},)"
                                  R"({"id":"q","easy":[],"hard":[],"junk":[]}]})"),
               std::invalid_argument);
  EXPECT_THROW(parse_ground_truth("{\"queries\": 3}"), FormatError);
}

TEST(Report, TextAndJsonMentionMetrics) {
  const ProtocolReport r = map_protocol(small_descs(), small_gt(), Protocol::medium);
  const std::string t = report_text(r);
  EXPECT_NE(t.find("P@10"), std::string::npos);
  EXPECT_NE(t.find("evaluated 2 of 2"), std::string::npos);
  const std::string j = report_json(r);
  EXPECT_NE(j.find("\"mAP\""), std::string::npos);
  EXPECT_NE(j.find("\"medium\""), std::string::npos);
}
