#ifndef COMBALIGN_EVAL_HPP
#define COMBALIGN_EVAL_HPP

#include <map>
#include <string>

#include <Eigen/Dense>

#include "combalign/combine.hpp"
#include "combalign/embed.hpp"
#include "combalign/graph.hpp"

namespace combalign {

struct MetricsReport {
  std::map<int, double> hits;  // k -> Hits@k
  double map_score = 0.0;
  double one_to_many_ratio = 0.0;
  double mutual_inconsistency_ratio = 0.0;
};

/// Rank of target v in row u, 1-based, descending values; among ties the
/// lower target index ranks first.
int rank_of(const AlignmentMatrix& t, int u, int v);

/// Fraction of anchors whose target is among the top-k entries of the
/// source's row.
double hits_at_k(const AlignmentMatrix& t, const GroundTruth& gt, int k);

/// MatchSet prediction defines only a rank-1 answer, so k must be 1;
/// unmatched sources count as misses.
double hits_at_k(const MatchSet& m, const GroundTruth& gt, int k);

double mean_average_precision(const AlignmentMatrix& t, const GroundTruth& gt);

/// Fraction of sources whose argmax target is also some other source's
/// argmax target.
double one_to_many_ratio(const AlignmentMatrix& t);
double one_to_many_ratio(const MatchSet& m);

/// Fraction of sources u with argmax_x T(x, argmax_y T(u, y)) != u.
double mutual_inconsistency_ratio(const AlignmentMatrix& t);
double mutual_inconsistency_ratio(const MatchSet& m);

/// Constrained-evaluation preprocessing: among sources sharing an argmax
/// target, keeps only the one with the highest probability (ties to the
/// lower source index). The result is one-to-one but not necessarily mutual.
MatchSet constrained_predictions(const AlignmentMatrix& t);

MetricsReport evaluate_alignment(const AlignmentMatrix& t,
                                 const GroundTruth& gt);
MetricsReport evaluate_matchset(const MatchSet& m, const GroundTruth& gt);

/// "key=value" lines, one per metric, in the documented order.
std::string format_metrics_block(const MetricsReport& r);
/// The same key=value pairs on a single space-separated line.
std::string format_metrics_line(const MetricsReport& r);

}  // namespace combalign

#endif  // COMBALIGN_EVAL_HPP
