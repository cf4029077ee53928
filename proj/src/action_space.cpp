#include "lada/action_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "lada/error.hpp"

namespace lada {

namespace {

constexpr std::array<std::string_view, kNumDirections> kDirectionWords = {
    "forward", "backward", "left", "right", "up", "down"};

constexpr std::array<std::pair<std::string_view, std::string_view>, kNumDirections> kAxisNames = {{
    {"+x", "forward"},
    {"-x", "backward"},
    {"+y", "left"},
    {"-y", "right"},
    {"+z", "up"},
    {"-z", "down"},
}};

void check_edges(const std::vector<double>& edges, const std::vector<double>& labels, double eps,
                 const char* name) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw InvalidArgument(std::string("BinningConfig: ") + name + " threshold must be positive");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (!std::isfinite(edges[k]) || edges[k] <= 0.0 || (k > 0 && edges[k] <= edges[k - 1]))
      throw InvalidArgument(std::string("BinningConfig: ") + name + " edges must be strictly increasing and positive");
  }
  if (labels.size() != edges.size() + 1)
    throw InvalidArgument(std::string("BinningConfig: ") + name + " needs exactly one label per bin");
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double lo = k == 0 ? eps : edges[k - 1];
    const bool above = labels[k] >= lo;
    const bool below = k == edges.size() || labels[k] < edges[k];
    if (!std::isfinite(labels[k]) || !above || !below)
      throw InvalidArgument(std::string("BinningConfig: ") + name + " label " + format_number(labels[k]) +
                            " lies outside its bin");
  }
}

int magnitude_bin(double v, const std::vector<double>& edges) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

// Dominant signed axis of a 3-vector; earlier axes win ties, None below eps.
MotionBin dominant(double x, double y, double z, double eps, const std::vector<double>& edges) {
  const std::array<double, 3> v{x, y, z};
  std::size_t best = 0;
  for (std::size_t k = 1; k < 3; ++k)
    if (std::abs(v[k]) > std::abs(v[best])) best = k;
  const double mag = std::abs(v[best]);
  if (mag < eps) return {};
  const auto dir = static_cast<Direction>(2 * best + (v[best] < 0.0 ? 1 : 0));
  return {dir, magnitude_bin(mag, edges)};
}

void check_bin(const MotionBin& b, int bins, const char* name) {
  if (b.axis == Direction::None) {
    if (b.mag_bin != 0) throw InvalidArgument(std::string(name) + ": no-motion bin must have magnitude 0");
    return;
  }
  if (static_cast<int>(b.axis) >= kNumDirections)
    throw InvalidArgument(std::string(name) + ": axis out of range");
  if (b.mag_bin < 0 || b.mag_bin >= bins)
    throw InvalidArgument(std::string(name) + ": magnitude bin " + std::to_string(b.mag_bin) + " out of range");
}

// Cursor over a sentence that reports faults by absolute character offset.
class Cursor {
 public:
  Cursor(std::string_view text, std::size_t base) : text_(text), base_(base) {}

  std::size_t offset() const { return base_ + pos_; }
  bool done() const { return pos_ == text_.size(); }

  bool accept(std::string_view lit) {
    if (text_.substr(pos_, lit.size()) != lit) return false;
    pos_ += lit.size();
    return true;
  }

  void expect(std::string_view lit) {
    if (!accept(lit)) throw ParseError("expected \"" + std::string(lit) + "\"", offset());
  }

  // Run of characters up to the next space or comma.
  std::string_view word() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != ',') ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void rewind(std::size_t n) { pos_ -= n; }

 private:
  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

int label_index(std::string_view token, const std::vector<double>& labels) {
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (token == format_number(labels[k])) return static_cast<int>(k);
  return -1;
}

}  // namespace

Action7 Action7::from_array(std::span<const double> v) {
  if (v.size() != 7) throw InvalidArgument("Action7: expected 7 values, got " + std::to_string(v.size()));
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

void BinningConfig::validate() const {
  check_edges(dist_edges, dist_labels, epsilon_t, "dist");
  check_edges(angle_edges, angle_labels, epsilon_r, "angle");
}

std::string_view direction_word(Direction d) {
  if (d == Direction::None) throw InvalidArgument("direction_word: no-motion direction has no word");
  return kDirectionWords[static_cast<std::size_t>(d)];
}

char axis_letter(Direction d) {
  if (d == Direction::None) throw InvalidArgument("axis_letter: no-motion direction has no axis");
  return static_cast<char>('x' + static_cast<int>(d) / 2);
}

bool is_negative(Direction d) { return d != Direction::None && static_cast<int>(d) % 2 == 1; }

nlohmann::json to_json(const BinningConfig& cfg) {
  nlohmann::json axes = nlohmann::json::object();
  for (const auto& [k, v] : kAxisNames) axes[std::string(k)] = std::string(v);
  return {
      {"epsilon_t", cfg.epsilon_t},       {"epsilon_r", cfg.epsilon_r},
      {"dist_edges", cfg.dist_edges},     {"angle_edges", cfg.angle_edges},
      {"dist_labels", cfg.dist_labels},   {"angle_labels", cfg.angle_labels},
      {"axis_names", axes},
  };
}

BinningConfig binning_from_json(const nlohmann::json& j) {
  BinningConfig cfg;
  try {
    if (j.contains("epsilon_t")) cfg.epsilon_t = j.at("epsilon_t").get<double>();
    if (j.contains("epsilon_r")) cfg.epsilon_r = j.at("epsilon_r").get<double>();
    if (j.contains("dist_edges")) cfg.dist_edges = j.at("dist_edges").get<std::vector<double>>();
    if (j.contains("angle_edges")) cfg.angle_edges = j.at("angle_edges").get<std::vector<double>>();
    if (j.contains("dist_labels")) cfg.dist_labels = j.at("dist_labels").get<std::vector<double>>();
    if (j.contains("angle_labels")) cfg.angle_labels = j.at("angle_labels").get<std::vector<double>>();
    if (j.contains("axis_names")) {
      for (const auto& [k, v] : kAxisNames) {
        if (j.at("axis_names").value(std::string(k), std::string()) != v)
          throw InvalidArgument("BinningConfig: axis_names mapping is fixed; " + std::string(k) + " must be " +
                                std::string(v));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("BinningConfig: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

PrimitiveTriple discretize(const Action7& a, const BinningConfig& cfg) {
  static constexpr std::array<const char*, 7> kFields = {"dx", "dy", "dz", "rx", "ry", "rz", "g"};
  const auto v = a.to_array();
  for (std::size_t k = 0; k < v.size(); ++k)
    if (!std::isfinite(v[k])) throw InvalidArgument(std::string("discretize: non-finite field ") + kFields[k]);
  PrimitiveTriple p;
  p.trans = dominant(a.dx, a.dy, a.dz, cfg.epsilon_t, cfg.dist_edges);
  p.rot = dominant(a.rx, a.ry, a.rz, cfg.epsilon_r, cfg.angle_edges);
  p.grip = a.g >= 0.5 ? Grip::Close : Grip::Open;
  return p;
}

void validate(const PrimitiveTriple& p, const BinningConfig& cfg) {
  check_bin(p.trans, cfg.dist_bins(), "translation");
  check_bin(p.rot, cfg.angle_bins(), "rotation");
  if (p.grip != Grip::Open && p.grip != Grip::Close) throw InvalidArgument("gripper state out of range");
}

std::string render_language(const PrimitiveTriple& p, const BinningConfig& cfg) {
  validate(p, cfg);
  std::string s;
  if (p.trans.axis == Direction::None) {
    s = "stay in place";
  } else {
    s = "move " + format_number(cfg.dist_labels[static_cast<std::size_t>(p.trans.mag_bin)]) + " meters " +
        std::string(direction_word(p.trans.axis));
  }
  s += ", ";
  if (p.rot.axis == Direction::None) {
    s += "keep orientation";
  } else {
    s += "rotate ";
    if (is_negative(p.rot.axis)) s += "-";
    s += format_number(cfg.angle_labels[static_cast<std::size_t>(p.rot.mag_bin)]);
    s += " degrees around the ";
    s += axis_letter(p.rot.axis);
    s += "-axis";
  }
  s += ", and ";
  s += p.grip == Grip::Close ? "close" : "open";
  s += " the gripper";
  return s;
}

PrimitiveTriple parse_language(std::string_view text, const BinningConfig& cfg) {
  constexpr std::string_view kSpace = " \t\r\n";
  const std::size_t first = text.find_first_not_of(kSpace);
  if (first == std::string_view::npos) throw ParseError("empty sentence", text.size());
  const std::size_t last = text.find_last_not_of(kSpace);
  Cursor c(text.substr(first, last - first + 1), first);

  PrimitiveTriple p;
  if (!c.accept("stay in place")) {
    c.expect("move ");
    const std::size_t at = c.offset();
    const auto dist = c.word();
    const int bin = label_index(dist, cfg.dist_labels);
    if (bin < 0) throw ParseError("unlabeled distance \"" + std::string(dist) + "\"", at);
    c.expect(" meters ");
    const std::size_t dir_at = c.offset();
    const auto dir = c.word();
    const auto it = std::find(kDirectionWords.begin(), kDirectionWords.end(), dir);
    if (it == kDirectionWords.end()) throw ParseError("unknown direction \"" + std::string(dir) + "\"", dir_at);
    p.trans = {static_cast<Direction>(it - kDirectionWords.begin()), bin};
  }
  c.expect(", ");
  if (!c.accept("keep orientation")) {
    c.expect("rotate ");
    const bool negative = c.accept("-");
    const std::size_t at = c.offset();
    const auto mag = c.word();
    const int bin = label_index(mag, cfg.angle_labels);
    if (bin < 0) throw ParseError("unlabeled angle \"" + std::string(mag) + "\"", at);
    c.expect(" degrees around the ");
    const std::size_t axis_at = c.offset();
    int axis = -1;
    if (c.accept("x")) axis = 0;
    else if (c.accept("y")) axis = 1;
    else if (c.accept("z")) axis = 2;
    if (axis < 0) throw ParseError("unknown rotation axis", axis_at);
    c.expect("-axis");
    p.rot = {static_cast<Direction>(2 * axis + (negative ? 1 : 0)), bin};
  }
  c.expect(", and ");
  if (c.accept("open")) p.grip = Grip::Open;
  else if (c.accept("close")) p.grip = Grip::Close;
  else throw ParseError("expected \"open\" or \"close\"", c.offset());
  c.expect(" the gripper");
  if (!c.done()) throw ParseError("trailing text", c.offset());
  return p;
}

ClassIndices class_indices(const PrimitiveTriple& p, const BinningConfig& cfg) {
  validate(p, cfg);
  const auto flat = [](const MotionBin& b, int bins) {
    return b.axis == Direction::None ? 0 : 1 + static_cast<int>(b.axis) * bins + b.mag_bin;
  };
  return {flat(p.trans, cfg.dist_bins()), flat(p.rot, cfg.angle_bins()), static_cast<int>(p.grip)};
}

PrimitiveTriple triple_from_indices(const ClassIndices& idx, const BinningConfig& cfg) {
  const ClassIndices n = class_counts(cfg);
  if (idx.t < 0 || idx.t >= n.t || idx.r < 0 || idx.r >= n.r || idx.g < 0 || idx.g >= n.g)
    throw InvalidArgument("triple_from_indices: class index out of range");
  const auto unflat = [](int k, int bins) -> MotionBin {
    if (k == 0) return {};
    return {static_cast<Direction>((k - 1) / bins), (k - 1) % bins};
  };
  return {unflat(idx.t, cfg.dist_bins()), unflat(idx.r, cfg.angle_bins()), static_cast<Grip>(idx.g)};
}

ClassIndices class_counts(const BinningConfig& cfg) {
  return {1 + kNumDirections * cfg.dist_bins(), 1 + kNumDirections * cfg.angle_bins(), 2};
}

Action7 bin_center(const PrimitiveTriple& p, const BinningConfig& cfg) {
  validate(p, cfg);
  std::array<double, 7> v{};
  if (p.trans.axis != Direction::None) {
    const int k = static_cast<int>(p.trans.axis);
    v[static_cast<std::size_t>(k / 2)] = (k % 2 ? -1.0 : 1.0) * cfg.dist_labels[static_cast<std::size_t>(p.trans.mag_bin)];
  }
  if (p.rot.axis != Direction::None) {
    const int k = static_cast<int>(p.rot.axis);
    v[static_cast<std::size_t>(3 + k / 2)] =
        (k % 2 ? -1.0 : 1.0) * cfg.angle_labels[static_cast<std::size_t>(p.rot.mag_bin)];
  }
  v[6] = p.grip == Grip::Close ? 1.0 : 0.0;
  return Action7::from_array(v);
}

std::vector<std::string> tokenize_sentence(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  const auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      flush();
    } else if (ch == ',') {
      flush();
      tokens.emplace_back(",");
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> sentence_vocabulary(const BinningConfig& cfg) {
  std::vector<std::string> v = {"move",   "meters", "stay",     "in",          "place", ",",
                                "rotate", "degrees", "around",  "the",         "keep",  "orientation",
                                "and",    "open",   "close",    "gripper",     "x-axis", "y-axis",
                                "z-axis"};
  for (auto w : kDirectionWords) v.emplace_back(w);
  for (double l : cfg.dist_labels) v.push_back(format_number(l));
  for (double l : cfg.angle_labels) {
    v.push_back(format_number(l));
    v.push_back("-" + format_number(l));
  }
  // Distance and angle labels may coincide as strings; keep first occurrence.
  std::vector<std::string> out;
  for (auto& w : v)
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(std::move(w));
  return out;
}

}  // namespace lada
