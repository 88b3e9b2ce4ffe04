#include "spred/eval.hpp"

#include <algorithm>
#include <memory>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "spred/binary_io.hpp"

namespace spred {

std::optional<double> average_precision(std::span<const bool> ranked_relevance) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < ranked_relevance.size(); ++k) {
    if (!ranked_relevance[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

namespace {

Matrix normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const Vector u = l2_normalized(m.row(r));
    std::copy(u.begin(), u.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

std::vector<std::size_t> rank_gallery(std::span<const double> query, const Matrix& normalized_gallery) {
  const Vector q = l2_normalized(query);
  Vector sims(normalized_gallery.rows());
  for (std::size_t g = 0; g < sims.size(); ++g) sims[g] = dot(q, normalized_gallery.row(g));
  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  return order;
}

RetrievalResult retrieve(const RetrievalSet& queries, const RetrievalSet& gallery) {
  if (gallery.size() == 0) throw std::invalid_argument("retrieve: empty gallery");
  if (queries.features.rows() != queries.size() || gallery.features.rows() != gallery.size()) {
    throw std::invalid_argument("retrieve: feature rows disagree with identity lists");
  }
  const Matrix g_unit = normalize_rows(gallery.features);
  RetrievalResult out;
  std::size_t top1 = 0;
  const auto flags = std::make_unique<bool[]>(gallery.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto order = rank_gallery(queries.features.row(q), g_unit);
    std::size_t kept = 0;
    for (std::size_t g : order) {
      const bool same_id = gallery.identities[g] == queries.identities[q];
      if (same_id && gallery.cameras[g] == queries.cameras[q]) continue;
      flags[kept++] = same_id;
    }
    const std::span<const bool> relevance(flags.get(), kept);
    const auto ap = average_precision(relevance);
    if (!ap) {
      ++out.skipped;
      continue;
    }
    out.per_query_ap.push_back(*ap);
    top1 += relevance.front() ? 1 : 0;
  }
  out.n_queries = out.per_query_ap.size();
  if (out.n_queries > 0) {
    const double n = static_cast<double>(out.n_queries);
    out.mAP = std::accumulate(out.per_query_ap.begin(), out.per_query_ap.end(), 0.0) / n;
    out.rank1 = static_cast<double>(top1) / n;
  }
  return out;
}

LabelQuality pseudo_label_quality(const PseudoLabelSet& assignment, std::span<const int> truth) {
  if (truth.size() != assignment.size()) throw std::invalid_argument("pseudo_label_quality: truth size mismatch");
  LabelQuality q;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment.artificial[i]) continue;
    ++q.unlabeled;
    if (!assignment.available(i)) continue;
    ++q.count;
    q.correct += assignment.labels[i] == truth[i];
  }
  q.precision = q.count == 0 ? 1.0 : static_cast<double>(q.correct) / static_cast<double>(q.count);
  q.recall = q.unlabeled == 0 ? 0.0 : static_cast<double>(q.correct) / static_cast<double>(q.unlabeled);
  return q;
}

Summary summarize(std::span<const DomainResult> results) {
  Summary s;
  for (const auto& r : results) {
    if (r.seen) {
      s.seen_avg_map += r.retrieval.mAP;
      s.seen_avg_rank1 += r.retrieval.rank1;
      ++s.seen_domains;
    } else {
      s.unseen_avg_map += r.retrieval.mAP;
      s.unseen_avg_rank1 += r.retrieval.rank1;
      ++s.unseen_domains;
    }
  }
  if (s.seen_domains > 0) {
    s.seen_avg_map /= static_cast<double>(s.seen_domains);
    s.seen_avg_rank1 /= static_cast<double>(s.seen_domains);
  }
  if (s.unseen_domains > 0) {
    s.unseen_avg_map /= static_cast<double>(s.unseen_domains);
    s.unseen_avg_rank1 /= static_cast<double>(s.unseen_domains);
  }
  return s;
}

void write_results_csv(const std::filesystem::path& path, std::span<const DomainResult> results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("eval: cannot write " + path.string());
  out << "stage,domain,split,mAP,rank1,n_queries\n";
  char buf[160];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%s,%.10f,%.10f,%zu\n", r.stage, r.domain, r.seen ? "seen" : "unseen",
                  r.retrieval.mAP, r.retrieval.rank1, r.retrieval.n_queries);
    out << buf;
  }
}

void write_feature_dump(const std::filesystem::path& path, const Matrix& features,
                        std::span<const FeatureDumpEntry> entries) {
  if (features.rows() != entries.size()) throw std::invalid_argument("write_feature_dump: row/entry count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("eval: cannot write " + path.string());
  io::BinaryWriter w(out);
  w.tag("SPFD");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(features.rows()));
  w.u32(static_cast<std::uint32_t>(features.cols()));
  for (std::size_t r = 0; r < features.rows(); ++r) {
    w.i32(entries[r].domain);
    w.i32(entries[r].identity);
    w.i32(entries[r].camera);
    w.i32(entries[r].split);
    w.f64s(features.row(r));
  }
}

}  // namespace spred
