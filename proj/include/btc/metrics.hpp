#pragma once

#include <string>
#include <vector>

#include "btc/annotation.hpp"
#include "btc/chords.hpp"

namespace btc {

enum class ComparatorKind : int { root, thirds, triads, sevenths, tetrads, majmin, mirex };

const char* comparator_name(ComparatorKind kind);        // lowercase key
const char* comparator_display_name(ComparatorKind kind);  // report column header
ComparatorKind comparator_from_name(const std::string& name);

enum class CompareResult { correct, incorrect, excluded };

// Pairwise label comparison under one comparator. Exclusion depends on the
// reference only; an unknown estimate is never correct.
CompareResult compare(ComparatorKind kind, const ChordLabel& ref, const ChordLabel& est);

struct ScoredPiece {
  double duration = 0.0;
  ChordLabel ref;
  ChordLabel est;
};

// Sweep-line intersection over the reference intervals. Estimate gaps score
// as no-chord; reference gaps are not evaluated at all.
std::vector<ScoredPiece> intersect_intervals(const AnnotationTrack& ref,
                                             const AnnotationTrack& est);

struct ScoredPair {
  AnnotationTrack reference;
  AnnotationTrack estimate;
};

// 100 * (correct duration) / (comparable duration), pooled over pairs.
double wcsr(const std::vector<ScoredPair>& pairs, ComparatorKind kind);

struct MetricRow {
  std::string name;
  double score = 0.0;
  double t_c = 0.0;  // correct seconds
  double t_a = 0.0;  // comparable seconds
};

// {Root, Maj-min} rows for the majmin vocabulary, all seven comparators for
// the large one.
std::vector<MetricRow> report(const std::vector<ScoredPair>& pairs, VocabKind vocab);

std::string format_report_table(const std::vector<MetricRow>& rows);
std::string format_report_csv(const std::vector<MetricRow>& rows);

}  // namespace btc
