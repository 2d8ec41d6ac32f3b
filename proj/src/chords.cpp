#include "btc/chords.hpp"

#include <array>

namespace btc {

namespace {

constexpr std::array<const char*, kNumQualities> kQualityNames = {
    "maj", "min", "dim", "aug", "min6", "maj6", "min7",
    "minmaj7", "maj7", "7", "dim7", "hdim7", "sus2", "sus4"};

// Root-relative interval templates, one per quality.
constexpr std::array<std::array<int, 4>, kNumQualities> kTemplates = {{
    {0, 4, 7, -1},   // maj
    {0, 3, 7, -1},   // min
    {0, 3, 6, -1},   // dim
    {0, 4, 8, -1},   // aug
    {0, 3, 7, 9},    // min6
    {0, 4, 7, 9},    // maj6
    {0, 3, 7, 10},   // min7
    {0, 3, 7, 11},   // minmaj7
    {0, 4, 7, 11},   // maj7
    {0, 4, 7, 10},   // 7
    {0, 3, 6, 9},    // dim7
    {0, 3, 6, 10},   // hdim7
    {0, 2, 7, -1},   // sus2
    {0, 5, 7, -1},   // sus4
}};

constexpr std::array<const char*, 12> kPitchNames = {"C",  "C#", "D",  "D#", "E",  "F",
                                                     "F#", "G",  "G#", "A",  "A#", "B"};

int natural_pitch_class(char letter) {
  switch (letter) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return 5;
    case 'G': return 7;
    case 'A': return 9;
    case 'B': return 11;
    default: return -1;
  }
}

}  // namespace

ChordLabel ChordLabel::pitched(int root, Quality q) {
  if (root < 0 || root > 11)
    fail(ErrorCode::data_error, "pitch class out of range: " + std::to_string(root));
  return ChordLabel{ChordKind::pitched, root, q};
}

const char* quality_name(Quality q) { return kQualityNames[static_cast<std::size_t>(q)]; }

std::optional<Quality> quality_from_name(const std::string& name) {
  for (int i = 0; i < kNumQualities; ++i)
    if (name == kQualityNames[static_cast<std::size_t>(i)]) return static_cast<Quality>(i);
  return std::nullopt;
}

ChordLabel parse_chord(const std::string& text) {
  if (text.empty()) fail(ErrorCode::parse_error, "empty chord label");
  if (text == "N") return ChordLabel::none();
  if (text == "X") return ChordLabel::other();

  std::size_t pos = 0;
  const int natural = natural_pitch_class(text[0]);
  if (natural < 0) fail(ErrorCode::parse_error, "bad chord root in \"" + text + "\"");
  ++pos;
  int root = natural;
  while (pos < text.size() && (text[pos] == '#' || text[pos] == 'b')) {
    root += text[pos] == '#' ? 1 : -1;
    ++pos;
  }
  root = ((root % 12) + 12) % 12;

  std::string quality_text;
  if (pos < text.size() && text[pos] == ':') {
    ++pos;
    const std::size_t slash = text.find('/', pos);
    quality_text = text.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
    pos = slash == std::string::npos ? text.size() : slash;
    if (quality_text.empty())
      fail(ErrorCode::parse_error, "empty quality in \"" + text + "\"");
  }
  if (pos < text.size() && text[pos] == '/') {
    if (pos + 1 >= text.size()) fail(ErrorCode::parse_error, "empty bass in \"" + text + "\"");
    pos = text.size();  // bass note dropped, vocabulary has no inversions
  }
  if (pos != text.size())
    fail(ErrorCode::parse_error, "trailing characters in \"" + text + "\"");

  if (quality_text.empty()) return ChordLabel::pitched(root, Quality::maj);
  const auto q = quality_from_name(quality_text);
  if (!q) return ChordLabel::other();
  return ChordLabel::pitched(root, *q);
}

std::string format_chord(const ChordLabel& c) {
  switch (c.kind) {
    case ChordKind::no_chord: return "N";
    case ChordKind::unknown: return "X";
    case ChordKind::pitched:
      return std::string(kPitchNames[static_cast<std::size_t>(c.root)]) + ":" +
             quality_name(c.quality);
  }
  fail(ErrorCode::data_error, "corrupt chord label");
}

std::vector<int> pitch_class_set(const ChordLabel& c) {
  if (!c.is_pitched())
    fail(ErrorCode::data_error, "pitch_class_set requires a pitched chord, got " + format_chord(c));
  std::vector<int> out;
  for (int iv : kTemplates[static_cast<std::size_t>(c.quality)]) {
    if (iv < 0) break;
    out.push_back((c.root + iv) % 12);
  }
  return out;
}

std::uint16_t pitch_class_mask(const ChordLabel& c) {
  std::uint16_t mask = 0;
  for (int pc : pitch_class_set(c)) mask = static_cast<std::uint16_t>(mask | (1u << pc));
  return mask;
}

ChordLabel transpose(const ChordLabel& c, int k) {
  if (!c.is_pitched()) return c;
  return ChordLabel::pitched(((c.root + k) % 12 + 12) % 12, c.quality);
}

std::optional<int> third_interval(Quality q) {
  const auto& tpl = kTemplates[static_cast<std::size_t>(q)];
  if (tpl[1] == 3 || tpl[1] == 4) return tpl[1];
  return std::nullopt;
}

Quality triad_of(Quality q) {
  switch (q) {
    case Quality::maj:
    case Quality::maj6:
    case Quality::maj7:
    case Quality::dom7: return Quality::maj;
    case Quality::min:
    case Quality::min6:
    case Quality::min7:
    case Quality::minmaj7: return Quality::min;
    case Quality::dim:
    case Quality::dim7:
    case Quality::hdim7: return Quality::dim;
    case Quality::aug: return Quality::aug;
    case Quality::sus2: return Quality::sus2;
    case Quality::sus4: return Quality::sus4;
  }
  fail(ErrorCode::data_error, "corrupt quality");
}

ChordLabel reduce_to_majmin(const ChordLabel& c) {
  if (!c.is_pitched()) return c;
  const Quality triad = triad_of(c.quality);
  if (triad == Quality::maj || triad == Quality::min) return ChordLabel::pitched(c.root, triad);
  return ChordLabel::other();
}

const char* vocab_kind_name(VocabKind k) { return k == VocabKind::majmin ? "majmin" : "large"; }

VocabKind vocab_kind_from_name(const std::string& name) {
  if (name == "majmin") return VocabKind::majmin;
  if (name == "large") return VocabKind::large;
  fail(ErrorCode::config_error, "unknown vocabulary \"" + name + "\"");
}

Vocabulary Vocabulary::majmin() {
  Vocabulary v;
  v.kind_ = VocabKind::majmin;
  for (int root = 0; root < 12; ++root) v.labels_.push_back(ChordLabel::pitched(root, Quality::maj));
  for (int root = 0; root < 12; ++root) v.labels_.push_back(ChordLabel::pitched(root, Quality::min));
  v.labels_.push_back(ChordLabel::none());
  return v;
}

Vocabulary Vocabulary::large() {
  Vocabulary v;
  v.kind_ = VocabKind::large;
  for (int root = 0; root < 12; ++root)
    for (int q = 0; q < kNumQualities; ++q)
      v.labels_.push_back(ChordLabel::pitched(root, static_cast<Quality>(q)));
  v.labels_.push_back(ChordLabel::other());
  v.labels_.push_back(ChordLabel::none());
  return v;
}

Vocabulary Vocabulary::make(VocabKind kind) {
  return kind == VocabKind::majmin ? majmin() : large();
}

int Vocabulary::to_index(const ChordLabel& c) const {
  if (kind_ == VocabKind::majmin) {
    const ChordLabel r = reduce_to_majmin(c);
    if (r.kind != ChordKind::pitched) return 24;  // no-chord bucket, also absorbs unreduced
    return r.quality == Quality::maj ? r.root : 12 + r.root;
  }
  switch (c.kind) {
    case ChordKind::pitched:
      return c.root * kNumQualities + static_cast<int>(c.quality);
    case ChordKind::unknown: return 168;
    case ChordKind::no_chord: return 169;
  }
  fail(ErrorCode::data_error, "corrupt chord label");
}

ChordLabel Vocabulary::from_index(int i) const {
  if (i < 0 || i >= size())
    fail(ErrorCode::data_error, "label index " + std::to_string(i) + " out of range for " +
                                    std::string(vocab_kind_name(kind_)) + " vocabulary");
  return labels_[static_cast<std::size_t>(i)];
}

}  // namespace btc
