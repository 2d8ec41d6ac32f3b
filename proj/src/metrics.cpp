#include "btc/metrics.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <sstream>

namespace btc {

namespace {

constexpr std::array<const char*, 7> kNames = {"root",    "thirds", "triads", "sevenths",
                                               "tetrads", "majmin", "mirex"};
constexpr std::array<const char*, 7> kDisplay = {"Root",    "Thirds",  "Triads", "Sevenths",
                                                 "Tetrads", "Maj-min", "MIREX"};

bool is_nc(const ChordLabel& c) { return c.kind == ChordKind::no_chord; }
bool is_unknown(const ChordLabel& c) { return c.kind == ChordKind::unknown; }

CompareResult verdict(bool correct) {
  return correct ? CompareResult::correct : CompareResult::incorrect;
}

}  // namespace

const char* comparator_name(ComparatorKind kind) {
  return kNames[static_cast<std::size_t>(kind)];
}

const char* comparator_display_name(ComparatorKind kind) {
  return kDisplay[static_cast<std::size_t>(kind)];
}

ComparatorKind comparator_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (name == kNames[i]) return static_cast<ComparatorKind>(i);
  fail(ErrorCode::config_error, "unknown comparator \"" + name + "\"");
}

CompareResult compare(ComparatorKind kind, const ChordLabel& ref, const ChordLabel& est) {
  switch (kind) {
    case ComparatorKind::root: {
      if (is_unknown(ref)) return CompareResult::excluded;
      if (is_nc(ref) || is_nc(est)) return verdict(is_nc(ref) && is_nc(est));
      if (is_unknown(est)) return CompareResult::incorrect;
      return verdict(ref.root == est.root);
    }
    case ComparatorKind::thirds: {
      if (is_unknown(ref)) return CompareResult::excluded;
      if (is_nc(ref) || is_nc(est)) return verdict(is_nc(ref) && is_nc(est));
      if (is_unknown(est)) return CompareResult::incorrect;
      return verdict(ref.root == est.root &&
                     third_interval(ref.quality) == third_interval(est.quality));
    }
    case ComparatorKind::triads: {
      if (is_unknown(ref)) return CompareResult::excluded;
      if (is_nc(ref) || is_nc(est)) return verdict(is_nc(ref) && is_nc(est));
      if (is_unknown(est)) return CompareResult::incorrect;
      return verdict(ref.root == est.root && triad_of(ref.quality) == triad_of(est.quality));
    }
    case ComparatorKind::sevenths: {
      const bool comparable =
          is_nc(ref) ||
          (ref.is_pitched() &&
           (ref.quality == Quality::maj || ref.quality == Quality::min ||
            ref.quality == Quality::dom7 || ref.quality == Quality::maj7 ||
            ref.quality == Quality::min7));
      if (!comparable) return CompareResult::excluded;
      if (is_nc(ref) || is_nc(est)) return verdict(is_nc(ref) && is_nc(est));
      if (is_unknown(est)) return CompareResult::incorrect;
      return verdict(ref.root == est.root && ref.quality == est.quality);
    }
    case ComparatorKind::tetrads: {
      if (is_unknown(ref)) return CompareResult::excluded;
      if (is_nc(ref) || is_nc(est)) return verdict(is_nc(ref) && is_nc(est));
      if (is_unknown(est)) return CompareResult::incorrect;
      return verdict(ref.root == est.root && pitch_class_mask(ref) == pitch_class_mask(est));
    }
    case ComparatorKind::majmin: {
      const ChordLabel ref_red = reduce_to_majmin(ref);
      if (is_unknown(ref_red)) return CompareResult::excluded;
      if (is_nc(ref) || is_nc(est)) return verdict(is_nc(ref) && is_nc(est));
      if (is_unknown(est)) return CompareResult::incorrect;
      const ChordLabel est_red = reduce_to_majmin(est);
      if (!est_red.is_pitched()) return CompareResult::incorrect;
      return verdict(ref_red.root == est_red.root && ref_red.quality == est_red.quality);
    }
    case ComparatorKind::mirex: {
      if (is_unknown(ref)) return CompareResult::excluded;
      if (is_nc(ref) || is_nc(est)) return verdict(is_nc(ref) && is_nc(est));
      if (is_unknown(est)) return CompareResult::incorrect;
      const int shared = std::popcount(
          static_cast<unsigned>(pitch_class_mask(ref) & pitch_class_mask(est)));
      return verdict(shared >= 3);
    }
  }
  fail(ErrorCode::config_error, "corrupt comparator kind");
}

std::vector<ScoredPiece> intersect_intervals(const AnnotationTrack& ref,
                                             const AnnotationTrack& est) {
  validate_track(ref);
  validate_track(est);
  std::vector<ScoredPiece> out;
  std::size_t j = 0;
  for (const auto& r : ref) {
    while (j < est.size() && est[j].end <= r.start) ++j;
    double cursor = r.start;
    for (std::size_t k = j; k < est.size() && est[k].start < r.end; ++k) {
      if (est[k].start > cursor) {
        const double gap_end = std::min(est[k].start, r.end);
        out.push_back({gap_end - cursor, r.label, ChordLabel::none()});
        cursor = gap_end;
      }
      const double piece_end = std::min(est[k].end, r.end);
      if (piece_end > cursor) {
        out.push_back({piece_end - cursor, r.label, est[k].label});
        cursor = piece_end;
      }
      if (est[k].end >= r.end) break;
    }
    if (cursor < r.end) out.push_back({r.end - cursor, r.label, ChordLabel::none()});
  }
  return out;
}

namespace {

void accumulate(const std::vector<ScoredPair>& pairs, ComparatorKind kind, double& t_c,
                double& t_a) {
  t_c = 0.0;
  t_a = 0.0;
  for (const auto& pair : pairs)
    for (const auto& piece : intersect_intervals(pair.reference, pair.estimate)) {
      const CompareResult r = compare(kind, piece.ref, piece.est);
      if (r == CompareResult::excluded) continue;
      t_a += piece.duration;
      if (r == CompareResult::correct) t_c += piece.duration;
    }
}

}  // namespace

double wcsr(const std::vector<ScoredPair>& pairs, ComparatorKind kind) {
  double t_c = 0.0, t_a = 0.0;
  accumulate(pairs, kind, t_c, t_a);
  if (!(t_a > 0.0))
    fail(ErrorCode::undefined_score,
         std::string("no comparable duration for comparator ") + comparator_name(kind));
  return 100.0 * (t_c / t_a);  // t_c == t_a must give exactly 100
}

std::vector<MetricRow> report(const std::vector<ScoredPair>& pairs, VocabKind vocab) {
  std::vector<ComparatorKind> kinds;
  if (vocab == VocabKind::majmin)
    kinds = {ComparatorKind::root, ComparatorKind::majmin};
  else
    kinds = {ComparatorKind::root,    ComparatorKind::thirds,  ComparatorKind::triads,
             ComparatorKind::sevenths, ComparatorKind::tetrads, ComparatorKind::majmin,
             ComparatorKind::mirex};
  std::vector<MetricRow> rows;
  for (ComparatorKind kind : kinds) {
    MetricRow row;
    row.name = comparator_display_name(kind);
    accumulate(pairs, kind, row.t_c, row.t_a);
    if (!(row.t_a > 0.0))
      fail(ErrorCode::undefined_score,
           std::string("no comparable duration for comparator ") + comparator_name(kind));
    row.score = 100.0 * (row.t_c / row.t_a);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_report_table(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-10s %8s %12s %12s\n", "metric", "score", "t_c", "t_a");
  os << buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %8.2f %12.3f %12.3f\n", row.name.c_str(), row.score,
                  row.t_c, row.t_a);
    os << buf;
  }
  return os.str();
}

std::string format_report_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "metric,score,t_c,t_a\n";
  char buf[96];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", row.name.c_str(), row.score, row.t_c,
                  row.t_a);
    os << buf;
  }
  return os.str();
}

}  // namespace btc
