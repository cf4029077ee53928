#pragma once

// Continuous 7-DoF actions, their projection onto translation / rotation /
// gripper primitives, and the canonical sentence form of a primitive triple.
//
// Canonical sentence grammar (stable format, lowercase, single spaces):
//
//   sentence    = translation ", " rotation ", and " gripper " the gripper" ;
//   translation = "move " dist " meters " direction | "stay in place" ;
//   rotation    = "rotate " [ "-" ] angle " degrees around the " axis "-axis"
//               | "keep orientation" ;
//   gripper     = "open" | "close" ;
//   direction   = "forward" | "backward" | "left" | "right" | "up" | "down" ;
//   axis        = "x" | "y" | "z" ;
//   dist, angle = a magnitude-bin label, printed in shortest round-trip form.
//
// A leading "-" on the angle marks rotation about the negative axis.

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace lada {

struct Action7 {
  double dx = 0, dy = 0, dz = 0;  // meters
  double rx = 0, ry = 0, rz = 0;  // degrees
  double g = 0;                   // 0 = open, 1 = close; >= 0.5 reads as close

  static Action7 from_array(std::span<const double> v);
  std::array<double, 7> to_array() const { return {dx, dy, dz, rx, ry, rz, g}; }

  friend bool operator==(const Action7&, const Action7&) = default;
};

// Signed axis of the dominant component. Declaration order is the tie-break priority.
enum class Direction : std::uint8_t { PosX = 0, NegX, PosY, NegY, PosZ, NegZ, None };

inline constexpr int kNumDirections = 6;

enum class Grip : std::uint8_t { Open = 0, Close = 1 };

struct MotionBin {
  Direction axis = Direction::None;
  int mag_bin = 0;  // 0 whenever axis is None

  friend auto operator<=>(const MotionBin&, const MotionBin&) = default;
};

struct PrimitiveTriple {
  MotionBin trans;
  MotionBin rot;
  Grip grip = Grip::Open;

  friend auto operator<=>(const PrimitiveTriple&, const PrimitiveTriple&) = default;
};

struct BinningConfig {
  double epsilon_t = 0.005;  // meters
  double epsilon_r = 2.0;    // degrees
  std::vector<double> dist_edges{0.02, 0.10};
  std::vector<double> angle_edges{15.0, 60.0};
  std::vector<double> dist_labels{0.01, 0.05, 0.5};
  std::vector<double> angle_labels{5.0, 30.0, 90.0};

  int dist_bins() const { return static_cast<int>(dist_labels.size()); }
  int angle_bins() const { return static_cast<int>(angle_labels.size()); }

  // Throws InvalidArgument if edges are not strictly increasing and positive,
  // thresholds are not positive, label counts are not edges + 1, or a label does
  // not discretize back into its own bin.
  void validate() const;

  friend bool operator==(const BinningConfig&, const BinningConfig&) = default;
};

// Fixed direction vocabulary: +x forward, -x backward, +y left, -y right, +z up, -z down.
std::string_view direction_word(Direction d);
char axis_letter(Direction d);
bool is_negative(Direction d);

nlohmann::json to_json(const BinningConfig& cfg);
BinningConfig binning_from_json(const nlohmann::json& j);

// Shortest decimal string that parses back to exactly v.
std::string format_number(double v);

PrimitiveTriple discretize(const Action7& action, const BinningConfig& cfg = {});

// Throws InvalidArgument if the triple violates its invariants under cfg.
void validate(const PrimitiveTriple& p, const BinningConfig& cfg);

std::string render_language(const PrimitiveTriple& p, const BinningConfig& cfg = {});

// Exact inverse of render_language; surrounding whitespace is ignored.
PrimitiveTriple parse_language(std::string_view text, const BinningConfig& cfg = {});

struct ClassIndices {
  int t = 0;
  int r = 0;
  int g = 0;

  friend bool operator==(const ClassIndices&, const ClassIndices&) = default;
};

// Flattened class ids for the imitation heads; 0 is the no-motion class.
ClassIndices class_indices(const PrimitiveTriple& p, const BinningConfig& cfg = {});
PrimitiveTriple triple_from_indices(const ClassIndices& idx, const BinningConfig& cfg = {});
ClassIndices class_counts(const BinningConfig& cfg = {});

// The action every sample of a phase with this template is centered on:
// the bin label on the dominant axis, zero elsewhere.
Action7 bin_center(const PrimitiveTriple& p, const BinningConfig& cfg = {});

// Token sequence of a canonical sentence: whitespace-separated words with
// commas split off as their own token.
std::vector<std::string> tokenize_sentence(std::string_view text);

// Every token that can appear in a canonical sentence under cfg, in fixed order.
std::vector<std::string> sentence_vocabulary(const BinningConfig& cfg = {});

}  // namespace lada
