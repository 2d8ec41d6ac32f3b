#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "btc/errors.hpp"

namespace btc {

enum class Quality : std::uint8_t {
  maj,
  min,
  dim,
  aug,
  min6,
  maj6,
  min7,
  minmaj7,
  maj7,
  dom7,  // written "7"
  dim7,
  hdim7,
  sus2,
  sus4,
};

inline constexpr int kNumQualities = 14;

enum class ChordKind : std::uint8_t { pitched, no_chord, unknown };

struct ChordLabel {
  ChordKind kind = ChordKind::no_chord;
  int root = 0;                     // pitch class 0-11, meaningful iff pitched
  Quality quality = Quality::maj;   // meaningful iff pitched

  static ChordLabel pitched(int root, Quality q);
  static ChordLabel none() { return ChordLabel{ChordKind::no_chord, 0, Quality::maj}; }
  static ChordLabel other() { return ChordLabel{ChordKind::unknown, 0, Quality::maj}; }

  bool is_pitched() const { return kind == ChordKind::pitched; }

  friend bool operator==(const ChordLabel& a, const ChordLabel& b) {
    if (a.kind != b.kind) return false;
    if (a.kind != ChordKind::pitched) return true;
    return a.root == b.root && a.quality == b.quality;
  }
};

const char* quality_name(Quality q);
std::optional<Quality> quality_from_name(const std::string& name);

// Harte-style label: ROOT[:QUALITY][/BASS]. Root accepts any number of # / b
// modifiers; a missing quality means maj; the bass part is validated and then
// dropped; "N" is no-chord, "X" (or an unknown quality name) maps to unknown.
ChordLabel parse_chord(const std::string& text);

// Canonical text form: sharps only, quality always spelled out ("C:maj"),
// "N" for no-chord, "X" for unknown.
std::string format_chord(const ChordLabel& c);

// Pitch classes in template order (root, third-ish, fifth-ish, extension).
// Errors on non-pitched labels.
std::vector<int> pitch_class_set(const ChordLabel& c);

// Same set as a 12-bit mask (bit i = pitch class i present).
std::uint16_t pitch_class_mask(const ChordLabel& c);

// Root moves by k mod 12; quality is preserved; no-chord/unknown pass through.
ChordLabel transpose(const ChordLabel& c, int k);

// Interval of the chord third above the root (4 = major, 3 = minor); empty
// for sus qualities, which have no third.
std::optional<int> third_interval(Quality q);

// Triad skeleton used by the triads comparator: one of
// {maj, min, dim, aug, sus2, sus4}.
Quality triad_of(Quality q);

// Folds onto the 25-label target space: qualities with a major third and
// perfect fifth become maj, minor third and perfect fifth become min, and the
// rest (dim, aug, sus, diminished sevenths) become unknown. no_chord survives.
ChordLabel reduce_to_majmin(const ChordLabel& c);

enum class VocabKind : std::uint8_t { majmin, large };

const char* vocab_kind_name(VocabKind k);
VocabKind vocab_kind_from_name(const std::string& name);

// Fixed, ordered chord target space. majmin: 12 maj, 12 min, then no-chord
// (25 total). large: root-major blocks of the 14 qualities, then unknown,
// then no-chord (170 total).
class Vocabulary {
 public:
  static Vocabulary majmin();
  static Vocabulary large();
  static Vocabulary make(VocabKind kind);

  VocabKind kind() const { return kind_; }
  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<ChordLabel>& labels() const { return labels_; }

  // Total on every label: majmin reduces first (unreduced qualities land on
  // no-chord); large maps unknown to the X entry.
  int to_index(const ChordLabel& c) const;
  ChordLabel from_index(int i) const;
  std::string name_of(int i) const { return format_chord(from_index(i)); }

 private:
  VocabKind kind_;
  std::vector<ChordLabel> labels_;
};

}  // namespace btc
