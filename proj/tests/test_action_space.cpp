#include <gtest/gtest.h>

#include <limits>
#include <set>

#include "lada/action_space.hpp"
#include "lada/error.hpp"
#include "oracles.hpp"

using namespace lada;

namespace {
const std::string kReferenceSentence = "move 0.5 meters forward, rotate 90 degrees around the z-axis, and close the gripper";

Action7 act(double dx, double dy, double dz, double rx, double ry, double rz, double g) {
  return Action7{dx, dy, dz, rx, ry, rz, g};
}
}  // namespace

TEST(Discretize, ReferenceExample) {
  const PrimitiveTriple p = discretize(act(0.5, 0, 0, 0, 0, 90, 1));
  EXPECT_EQ(p.trans.axis, Direction::PosX);
  EXPECT_EQ(p.trans.mag_bin, 2);
  EXPECT_EQ(p.rot.axis, Direction::PosZ);
  EXPECT_EQ(p.rot.mag_bin, 2);
  EXPECT_EQ(p.grip, Grip::Close);
}

TEST(Discretize, SubThresholdIsNone) {
  const PrimitiveTriple p = discretize(act(0, 0, 0, 0, 0, 0, 0));
  EXPECT_EQ(p.trans, (MotionBin{Direction::None, 0}));
  EXPECT_EQ(p.rot, (MotionBin{Direction::None, 0}));
  EXPECT_EQ(p.grip, Grip::Open);
  EXPECT_EQ(discretize(act(0.0049, -0.004, 0.001, 1.9, -1.99, 0, 0)).trans.axis, Direction::None);
  EXPECT_EQ(discretize(act(0.0049, -0.004, 0.001, 1.9, -1.99, 0, 0)).rot.axis, Direction::None);
}

TEST(Discretize, ThresholdIsInclusiveOfMotion) {
  EXPECT_EQ(discretize(act(0.005, 0, 0, 0, 0, 0, 0)).trans.axis, Direction::PosX);
  EXPECT_EQ(discretize(act(0, 0, 0, 0, -2.0, 0, 0)).rot.axis, Direction::NegY);
}

TEST(Discretize, TieOnXYGoesToPositiveX) {
  EXPECT_EQ(discretize(act(0.1, -0.1, 0, 0, 0, 0, 0)).trans.axis, Direction::PosX);
}

TEST(Discretize, AllTwoWayTiesFollowPriority) {
  // Priority: x before y before z, positive before negative.
  const std::array<Direction, 6> order{Direction::PosX, Direction::NegX, Direction::PosY,
                                       Direction::NegY, Direction::PosZ, Direction::NegZ};
  auto rank = [&](Direction d) { return std::find(order.begin(), order.end(), d) - order.begin(); };
  for (int ax = 0; ax < 3; ++ax)
    for (int bx = 0; bx < 3; ++bx) {
      if (ax == bx) continue;
      for (double sa : {1.0, -1.0})
        for (double sb : {1.0, -1.0}) {
          std::array<double, 7> t{};
          t[ax] = 0.3 * sa;
          t[bx] = 0.3 * sb;
          std::array<double, 7> r{};
          r[3 + ax] = 45 * sa;
          r[3 + bx] = 45 * sb;
          const Direction da = static_cast<Direction>(2 * ax + (sa < 0));
          const Direction db = static_cast<Direction>(2 * bx + (sb < 0));
          const Direction want = rank(da) < rank(db) ? da : db;
          EXPECT_EQ(discretize(Action7::from_array(t)).trans.axis, want);
          EXPECT_EQ(discretize(Action7::from_array(r)).rot.axis, want);
        }
    }
  // A tie between +x and -x cannot come from one vector; three-way ties resolve to x.
  EXPECT_EQ(discretize(act(-0.2, 0.2, 0.2, 0, 0, 0, 0)).trans.axis, Direction::NegX);
}

TEST(Discretize, MagnitudeBins) {
  EXPECT_EQ(discretize(act(0.019, 0, 0, 0, 0, 0, 0)).trans.mag_bin, 0);
  EXPECT_EQ(discretize(act(0.02, 0, 0, 0, 0, 0, 0)).trans.mag_bin, 1);
  EXPECT_EQ(discretize(act(0.0999, 0, 0, 0, 0, 0, 0)).trans.mag_bin, 1);
  EXPECT_EQ(discretize(act(0.10, 0, 0, 0, 0, 0, 0)).trans.mag_bin, 2);
  EXPECT_EQ(discretize(act(0, 0, 0, 14.9, 0, 0, 0)).rot.mag_bin, 0);
  EXPECT_EQ(discretize(act(0, 0, 0, 15, 0, 0, 0)).rot.mag_bin, 1);
  EXPECT_EQ(discretize(act(0, 0, 0, 60, 0, 0, 0)).rot.mag_bin, 2);
}

TEST(Discretize, GripperThreshold) {
  EXPECT_EQ(discretize(act(0, 0, 0, 0, 0, 0, 0.49)).grip, Grip::Open);
  EXPECT_EQ(discretize(act(0, 0, 0, 0, 0, 0, 0.5)).grip, Grip::Close);
}

TEST(Discretize, NonFiniteFieldIsNamed) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    discretize(act(0, 0, 0, 0, nan, 0, 0));
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("ry"), std::string::npos) << e.what();
  }
  EXPECT_THROW(discretize(act(std::numeric_limits<double>::infinity(), 0, 0, 0, 0, 0, 0)), InvalidArgument);
}

TEST(Discretize, ScaleRobustWithinBin) {
  std::mt19937_64 g(21);
  const BinningConfig cfg;
  for (int rep = 0; rep < 2000; ++rep) {
    const Action7 a = oracle::random_action(g);
    const PrimitiveTriple p = discretize(a, cfg);
    if (p.trans.axis == Direction::None) continue;
    auto v = a.to_array();
    const int ax = static_cast<int>(p.trans.axis) / 2;
    // Nudge the dominant component toward its bin's interior.
    const double mag = std::abs(v[ax]);
    const double lo = p.trans.mag_bin == 0 ? cfg.epsilon_t : cfg.dist_edges[p.trans.mag_bin - 1];
    const double nudged = (mag + std::max(lo, mag * 0.999)) / 2;
    v[ax] = std::copysign(nudged, v[ax]);
    bool still_max = true;
    for (int k = 0; k < 3; ++k)
      if (k != ax && std::abs(v[k]) >= nudged) still_max = false;
    if (!still_max) continue;
    EXPECT_EQ(discretize(Action7::from_array(v), cfg), p);
  }
}

TEST(Render, ReferenceSentence) { EXPECT_EQ(render_language(discretize(act(0.5, 0, 0, 0, 0, 90, 1))), kReferenceSentence); }

TEST(Render, NoMotion) {
  EXPECT_EQ(render_language(PrimitiveTriple{}), "stay in place, keep orientation, and open the gripper");
}

TEST(Render, NegativeRotationAndSmallLabels) {
  const PrimitiveTriple p = discretize(act(0, -0.01, 0, -5, 0, 0, 0));
  EXPECT_EQ(render_language(p), "move 0.01 meters right, rotate -5 degrees around the x-axis, and open the gripper");
}

TEST(Render, RejectsOutOfRangeBin) {
  PrimitiveTriple p;
  p.trans = {Direction::PosX, 3};
  EXPECT_THROW(render_language(p), InvalidArgument);
  p.trans = {Direction::None, 1};
  EXPECT_THROW(render_language(p), InvalidArgument);
}

TEST(Parse, ReferenceSentence) {
  const PrimitiveTriple p = parse_language(kReferenceSentence);
  EXPECT_EQ(p, discretize(act(0.5, 0, 0, 0, 0, 90, 1)));
}

TEST(Parse, SurroundingWhitespace) {
  EXPECT_EQ(parse_language("  \t" + kReferenceSentence + "\n "), parse_language(kReferenceSentence));
}

TEST(Parse, EmptyIsErrorAtZero) {
  try {
    parse_language("");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(Parse, ErrorOffsets) {
  auto offset_of = [](const std::string& s) -> std::size_t {
    try {
      parse_language(s);
    } catch (const ParseError& e) {
      return e.offset();
    }
    return std::string::npos;
  };
  // unknown direction
  EXPECT_EQ(offset_of("move 0.5 meters sideways, keep orientation, and open the gripper"), 16u);
  // unlabeled magnitude
  EXPECT_EQ(offset_of("move 0.3 meters forward, keep orientation, and open the gripper"), 5u);
  // unknown axis
  EXPECT_EQ(offset_of("stay in place, rotate 90 degrees around the w-axis, and open the gripper"), 44u);
  // malformed clause: missing "and"
  EXPECT_EQ(offset_of("stay in place, keep orientation, open the gripper"), 31u);
  // trailing junk
  EXPECT_EQ(offset_of("stay in place, keep orientation, and open the gripper now"), 53u);
  // internal whitespace is not canonical
  EXPECT_NE(offset_of("stay in  place, keep orientation, and open the gripper"), std::string::npos);
  EXPECT_NE(offset_of("Stay in place, keep orientation, and open the gripper"), std::string::npos);
}

TEST(Parse, RoundTripThousandTriples) {
  std::mt19937_64 g(22);
  for (int rep = 0; rep < 1000; ++rep) {
    const PrimitiveTriple p = oracle::random_triple(g);
    const std::string s = render_language(p);
    EXPECT_EQ(parse_language(s), p) << s;
    EXPECT_EQ(render_language(parse_language(s)), s);
  }
}

TEST(Parse, CustomBinning) {
  BinningConfig cfg;
  cfg.dist_edges = {0.03};
  cfg.dist_labels = {0.015, 0.2};
  cfg.angle_edges = {10, 45, 120};
  cfg.angle_labels = {4, 20, 60, 150};
  cfg.validate();
  std::mt19937_64 g(23);
  for (int rep = 0; rep < 300; ++rep) {
    const PrimitiveTriple p = oracle::random_triple(g, cfg);
    EXPECT_EQ(parse_language(render_language(p, cfg), cfg), p);
  }
  EXPECT_EQ(class_counts(cfg), (ClassIndices{13, 25, 2}));
}

TEST(ClassIndices, NoneIsZero) { EXPECT_EQ(class_indices(PrimitiveTriple{}), (ClassIndices{0, 0, 0})); }

TEST(ClassIndices, DefaultCountsByEnumeration) {
  std::set<int> t, r, gr;
  for (int a = 0; a <= 6; ++a)
    for (int m = 0; m < 3; ++m) {
      if (a == 6 && m > 0) continue;
      PrimitiveTriple p;
      p.trans = {static_cast<Direction>(a), m};
      p.rot = {static_cast<Direction>(a), m};
      for (int gg = 0; gg < 2; ++gg) {
        p.grip = static_cast<Grip>(gg);
        const ClassIndices c = class_indices(p);
        t.insert(c.t);
        r.insert(c.r);
        gr.insert(c.g);
      }
    }
  const ClassIndices counts = class_counts();
  EXPECT_EQ(counts, (ClassIndices{19, 19, 2}));
  EXPECT_EQ(static_cast<int>(t.size()), counts.t);
  EXPECT_EQ(static_cast<int>(r.size()), counts.r);
  EXPECT_EQ(static_cast<int>(gr.size()), counts.g);
  EXPECT_EQ(*t.rbegin(), counts.t - 1);
}

TEST(ClassIndices, Bijection) {
  const ClassIndices counts = class_counts();
  std::set<PrimitiveTriple> seen;
  for (int t = 0; t < counts.t; ++t)
    for (int r = 0; r < counts.r; ++r)
      for (int gg = 0; gg < counts.g; ++gg) {
        const ClassIndices idx{t, r, gg};
        const PrimitiveTriple p = triple_from_indices(idx);
        EXPECT_NO_THROW(validate(p, BinningConfig{}));
        EXPECT_EQ(class_indices(p), idx);
        seen.insert(p);
      }
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(19 * 19 * 2));
  EXPECT_THROW(triple_from_indices({19, 0, 0}), InvalidArgument);
  EXPECT_THROW(triple_from_indices({0, -1, 0}), InvalidArgument);
}

TEST(BinCenter, DiscretizesBack) {
  const ClassIndices counts = class_counts();
  for (int t = 0; t < counts.t; ++t)
    for (int r = 0; r < counts.r; ++r) {
      const PrimitiveTriple p = triple_from_indices({t, r, t % 2});
      EXPECT_EQ(discretize(bin_center(p)), p);
    }
  EXPECT_EQ(bin_center(discretize(act(0.5, 0, 0, 0, 0, 90, 1))), act(0.5, 0, 0, 0, 0, 90, 1));
}

TEST(Binning, Validation) {
  BinningConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dist_edges = {0.1, 0.02};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.epsilon_r = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.angle_labels = {5, 30};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.dist_labels = {0.01, 0.5, 0.05};
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Binning, JsonRoundTrip) {
  BinningConfig c;
  c.angle_edges = {20, 50};
  c.angle_labels = {10, 35, 80};
  EXPECT_EQ(binning_from_json(to_json(c)), c);
  auto j = to_json(c);
  j["dist_edges"] = {0.2, 0.1};
  EXPECT_THROW(binning_from_json(j), InvalidArgument);
}

TEST(Text, TokenizeAndVocabulary) {
  const auto toks = tokenize_sentence(kReferenceSentence);
  EXPECT_EQ(toks.front(), "move");
  EXPECT_EQ(std::count(toks.begin(), toks.end(), ","), 2);
  const auto vocab = sentence_vocabulary();
  const std::set<std::string> vs(vocab.begin(), vocab.end());
  EXPECT_EQ(vs.size(), vocab.size());
  std::mt19937_64 g(24);
  for (int rep = 0; rep < 200; ++rep)
    for (const auto& tok : tokenize_sentence(render_language(oracle::random_triple(g))))
      EXPECT_TRUE(vs.count(tok)) << tok;
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(90.0), "90");
  EXPECT_EQ(format_number(-5.0), "-5");
  EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
}
