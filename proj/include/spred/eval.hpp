#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spred/numerics.hpp"
#include "spred/purification.hpp"

namespace spred {

/// AP = (1/R) * sum of precision@k over the ranks k holding a relevant item.
/// Returns nullopt when nothing is relevant.
std::optional<double> average_precision(std::span<const bool> ranked_relevance);

struct RetrievalSet {
  Matrix features;
  std::vector<int> identities;
  std::vector<int> cameras;

  std::size_t size() const { return identities.size(); }
};

/// Gallery indices by descending cosine similarity to `query`; ties keep
/// gallery order.
std::vector<std::size_t> rank_gallery(std::span<const double> query, const Matrix& normalized_gallery);

struct RetrievalResult {
  double mAP = 0.0;
  double rank1 = 0.0;
  Vector per_query_ap;
  std::size_t n_queries = 0;
  /// Queries without any valid relevant gallery entry.
  std::size_t skipped = 0;
};

/// Cosine ranking on L2-normalized features. Gallery entries sharing both
/// identity and camera with the query are excluded.
RetrievalResult retrieve(const RetrievalSet& queries, const RetrievalSet& gallery);

struct LabelQuality {
  double precision = 1.0;
  double recall = 0.0;
  std::size_t count = 0;
  std::size_t correct = 0;
  std::size_t unlabeled = 0;
};

/// Scores the non-artificial labels against the hidden truth. Precision over
/// available labels (1.0 when none), recall over all unlabeled samples.
LabelQuality pseudo_label_quality(const PseudoLabelSet& assignment, std::span<const int> truth);

struct DomainResult {
  int stage = 0;
  int domain = 0;
  bool seen = true;
  RetrievalResult retrieval;
};

struct Summary {
  double seen_avg_map = 0.0;
  double seen_avg_rank1 = 0.0;
  double unseen_avg_map = 0.0;
  double unseen_avg_rank1 = 0.0;
  std::size_t seen_domains = 0;
  std::size_t unseen_domains = 0;
};

/// Unweighted means over seen domains and over unseen domains.
Summary summarize(std::span<const DomainResult> results);

/// Columns: stage,domain,split,mAP,rank1,n_queries.
void write_results_csv(const std::filesystem::path& path, std::span<const DomainResult> results);

struct FeatureDumpEntry {
  int domain = 0;
  int identity = 0;
  int camera = 0;
  /// 0 = train, 1 = query, 2 = gallery.
  int split = 0;
};

/// Binary dump: "SPFD", version u32, rows u32, dim u32, then per row
/// domain i32, identity i32, camera i32, split i32 and dim f64 values.
void write_feature_dump(const std::filesystem::path& path, const Matrix& features,
                        std::span<const FeatureDumpEntry> entries);

}  // namespace spred
