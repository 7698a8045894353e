#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "glam/tensor.hpp"

namespace glam {

struct Descriptor {
  std::string id;
  Tensor vec;  // [d], unit norm
};

struct RankedList {
  std::string query_id;
  std::vector<std::string> ids;  // descending similarity
};

/// Orders `db` by descending inner product with `query`; equal scores are
/// ordered by ascending id. Throws ShapeError on a dimension mismatch.
RankedList rank(const Descriptor& query, std::span<const Descriptor> db);

using IdSet = std::set<std::string>;

/// Trapezoidal average precision after removing junk ids from the ranking.
/// Positives absent from the ranking still count in the denominator.
/// Returns nullopt when no positive remains outside the junk set.
std::optional<double> average_precision(std::span<const std::string> ranking, const IdSet& positives,
                                        const IdSet& junk);
/// Positives among the first 10 non-junk entries, divided by 10.
std::optional<double> precision_at_10(std::span<const std::string> ranking, const IdSet& positives,
                                      const IdSet& junk);

struct QueryTruth {
  std::string id;
  std::vector<std::string> easy, hard, junk;
};

struct RetrievalGroundTruth {
  std::vector<QueryTruth> queries;

  /// Throws std::invalid_argument if a query's lists overlap, contain the
  /// query itself, or query ids repeat.
  void validate() const;
};

/// Parses {"queries":[{"id":..., "easy":[...], "hard":[...], "junk":[...]}]}.
RetrievalGroundTruth parse_ground_truth(const std::string& json_text);
RetrievalGroundTruth load_ground_truth(const std::filesystem::path& path);
std::string ground_truth_json(const RetrievalGroundTruth& gt);

enum class Protocol { medium, hard };
Protocol parse_protocol(const std::string& name);
std::string protocol_name(Protocol p);

struct ProtocolSets {
  IdSet positives;
  IdSet junk;
};
/// Medium: positives = easy + hard. Hard: positives = hard, junk = junk + easy.
ProtocolSets protocol_sets(const QueryTruth& q, Protocol protocol);

struct QueryScore {
  std::string id;
  std::optional<double> ap;   // nullopt: skipped (no positives)
  std::optional<double> p10;
};

struct ProtocolReport {
  Protocol protocol = Protocol::medium;
  double mean_ap = 0.0;
  double mean_p10 = 0.0;
  std::size_t evaluated = 0;
  std::vector<QueryScore> queries;  // ground-truth order
};

/// The database is every descriptor whose id is not a ground-truth query.
/// Each query is ranked against that database and scored; means run over
/// non-skipped queries in ground-truth order. Throws std::invalid_argument
/// for duplicate descriptor ids, a query without a descriptor, or a list id
/// missing from the database.
ProtocolReport map_protocol(std::span<const Descriptor> descs, const RetrievalGroundTruth& gt,
                            Protocol protocol);

std::string report_json(const ProtocolReport& report);
std::string report_text(const ProtocolReport& report);

}  // namespace glam
