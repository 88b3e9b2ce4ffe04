#include "spred/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "spred/errors.hpp"

namespace spred {

PrototypeBank::PrototypeBank(std::vector<int> identities, Matrix prototypes)
    : identities_(std::move(identities)), prototypes_(std::move(prototypes)) {
  if (identities_.size() != prototypes_.rows()) {
    throw std::invalid_argument("PrototypeBank: " + std::to_string(identities_.size()) + " ids for " +
                                std::to_string(prototypes_.rows()) + " rows");
  }
  for (std::size_t r = 0; r < identities_.size(); ++r) {
    if (!row_of_.emplace(identities_[r], r).second) {
      throw std::invalid_argument("PrototypeBank: duplicate identity " + std::to_string(identities_[r]));
    }
  }
}

std::size_t PrototypeBank::row_index(int identity) const {
  const auto it = row_of_.find(identity);
  if (it == row_of_.end()) {
    throw std::invalid_argument("PrototypeBank: unknown identity " + std::to_string(identity));
  }
  return it->second;
}

Vector PrototypeBank::logits(std::span<const double> feature, double temperature) const {
  if (feature.size() != dim()) {
    throw std::invalid_argument("PrototypeBank::logits: feature dim " + std::to_string(feature.size()) +
                                " vs bank dim " + std::to_string(dim()));
  }
  Vector z(size());
  for (std::size_t j = 0; j < size(); ++j) z[j] = dot(feature, row(j)) / temperature;
  return z;
}

PrototypeBank init_prototypes(const Matrix& features, std::span<const int> labels) {
  if (features.rows() != labels.size()) throw std::invalid_argument("init_prototypes: feature/label count mismatch");
  if (features.empty()) throw std::invalid_argument("init_prototypes: no labeled features");
  std::map<int, std::pair<Vector, std::size_t>> sums;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [sum, count] = sums[labels[i]];
    if (sum.empty()) sum.assign(features.cols(), 0.0);
    const auto f = features.row(i);
    for (std::size_t k = 0; k < f.size(); ++k) sum[k] += f[k];
    ++count;
  }
  std::vector<int> ids;
  Matrix protos(sums.size(), features.cols());
  std::size_t r = 0;
  for (const auto& [id, entry] : sums) {
    ids.push_back(id);
    for (std::size_t k = 0; k < features.cols(); ++k) protos(r, k) = entry.first[k] / static_cast<double>(entry.second);
    ++r;
  }
  return PrototypeBank(std::move(ids), std::move(protos));
}

PrototypeLoss prototype_loss(std::span<const double> feature, int label, const PrototypeBank& bank,
                             double temperature) {
  const std::size_t target = bank.row_index(label);
  const Vector z = bank.logits(feature, temperature);
  const Vector q = softmax(z);
  const auto top = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  double rest = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (j != top) rest += std::exp(z[j] - z[top]);
  }

  PrototypeLoss out;
  // log1p keeps precision when the target dominates and the loss is near zero.
  out.loss = (z[top] - z[target]) + std::log1p(rest);
  out.grad_feature.assign(bank.dim(), 0.0);
  out.grad_bank = Matrix(bank.size(), bank.dim());
  for (std::size_t j = 0; j < bank.size(); ++j) {
    const double coeff = (q[j] - (j == target ? 1.0 : 0.0)) / temperature;
    const auto p = bank.row(j);
    auto gp = out.grad_bank.row(j);
    for (std::size_t k = 0; k < bank.dim(); ++k) {
      out.grad_feature[k] += coeff * p[k];
      gp[k] = coeff * feature[k];
    }
  }
  return out;
}

TripletLoss batch_hard_triplet(const Matrix& features, std::span<const int> labels, double margin,
                               const std::vector<bool>& anchor_mask) {
  const std::size_t n = features.rows();
  if (labels.size() != n) throw std::invalid_argument("batch_hard_triplet: feature/label count mismatch");
  if (!anchor_mask.empty() && anchor_mask.size() != n) {
    throw std::invalid_argument("batch_hard_triplet: anchor mask size mismatch");
  }
  Matrix dist(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d = std::sqrt(std::max(squared_distance(features.row(a), features.row(b)), kDistanceGuard));
      dist(a, b) = d;
      dist(b, a) = d;
    }
  }

  TripletLoss out;
  out.grad_features = Matrix(n, features.cols());
  struct Active {
    std::size_t anchor, pos, neg;
  };
  std::vector<Active> active;
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (!anchor_mask.empty() && !anchor_mask[a]) continue;
    std::optional<std::size_t> pos, neg;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      if (labels[b] == labels[a]) {
        if (!pos || dist(a, b) > dist(a, *pos)) pos = b;
      } else if (!neg || dist(a, b) < dist(a, *neg)) {
        neg = b;
      }
    }
    if (!pos || !neg) continue;
    ++out.valid_anchors;
    const double hinge = dist(a, *pos) - dist(a, *neg) + margin;
    if (hinge > 0.0) {
      total += hinge;
      active.push_back({a, *pos, *neg});
    }
  }
  if (out.valid_anchors == 0) {
    throw std::invalid_argument("batch_hard_triplet: no anchor has both a positive and a negative");
  }
  const double scale = 1.0 / static_cast<double>(out.valid_anchors);
  out.loss = total * scale;

  // d|a-b|/da = (a-b)/|a-b|; zero below the guard where the distance is clamped.
  auto add_pair = [&](std::size_t a, std::size_t b, double sign) {
    const auto fa = features.row(a);
    const auto fb = features.row(b);
    if (squared_distance(fa, fb) <= kDistanceGuard) return;
    const double d = dist(a, b);
    auto ga = out.grad_features.row(a);
    auto gb = out.grad_features.row(b);
    for (std::size_t k = 0; k < fa.size(); ++k) {
      const double g = sign * scale * (fa[k] - fb[k]) / d;
      ga[k] += g;
      gb[k] -= g;
    }
  };
  for (const auto& t : active) {
    add_pair(t.anchor, t.pos, 1.0);
    add_pair(t.anchor, t.neg, -1.0);
  }
  return out;
}

Vector structure_vector(std::span<const double> feature, const PrototypeBank& bank, double temperature) {
  if (bank.empty()) throw std::invalid_argument("structure_vector: empty bank");
  return softmax(bank.logits(feature, temperature));
}

StructureLoss structure_loss(std::span<const double> feature_old, std::span<const double> feature_new,
                             const PrototypeBank& old_bank, double temperature) {
  const Vector target = structure_vector(feature_old, old_bank, temperature);
  const Vector current = structure_vector(feature_new, old_bank, temperature);

  StructureLoss out;
  out.loss = kl_divergence(target, current);
  out.grad_feature_new.assign(old_bank.dim(), 0.0);

  // dKL/dz_k = q_k * W - p_k [k unclamped], with W the target mass on
  // unclamped entries; clamped entries contribute a constant.
  double unclamped_mass = 0.0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    if (current[j] >= kKlEpsilon) unclamped_mass += target[j];
  }
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double own = current[k] >= kKlEpsilon ? target[k] : 0.0;
    const double coeff = (current[k] * unclamped_mass - own) / temperature;
    if (coeff == 0.0) continue;
    const auto p = old_bank.row(k);
    for (std::size_t i = 0; i < p.size(); ++i) out.grad_feature_new[i] += coeff * p[i];
  }
  return out;
}

NeighborDecision neighbor_label(std::span<const double> feature, const PrototypeBank& bank, double threshold,
                                std::optional<int> artificial_label, double temperature) {
  if (artificial_label) return {NeighborDecision::Outcome::artificial, *artificial_label, 1.0};
  if (bank.size() < 2) {
    throw std::invalid_argument("neighbor_label: unlabeled samples need at least two prototypes");
  }
  const Vector z = bank.logits(feature, temperature);
  std::size_t first = 0;
  std::size_t second = 1;
  if (z[1] > z[0]) std::swap(first, second);
  for (std::size_t j = 2; j < z.size(); ++j) {
    if (z[j] > z[first]) {
      second = first;
      first = j;
    } else if (z[j] > z[second]) {
      second = j;
    }
  }
  const double score = 1.0 / (1.0 + std::exp(z[second] - z[first]));
  NeighborDecision d;
  d.score = score;
  d.label = bank.identity_at(first);
  d.outcome = score > threshold ? NeighborDecision::Outcome::pseudo : NeighborDecision::Outcome::unavailable;
  if (!d.available()) d.label = -1;
  return d;
}

NeighborDecision global_softmax_label(std::span<const double> feature, const PrototypeBank& bank,
                                      double threshold, std::optional<int> artificial_label, double temperature) {
  if (artificial_label) return {NeighborDecision::Outcome::artificial, *artificial_label, 1.0};
  const Vector q = structure_vector(feature, bank, temperature);
  std::size_t best = 0;
  for (std::size_t j = 1; j < q.size(); ++j) {
    if (q[j] > q[best]) best = j;
  }
  NeighborDecision d;
  d.score = q[best];
  if (q[best] > threshold) {
    d.outcome = NeighborDecision::Outcome::pseudo;
    d.label = bank.identity_at(best);
  }
  return d;
}

void Hyperparams::validate() const {
  std::string bad;
  auto unit = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) bad += std::string(" ") + name;
  };
  unit(T_p, "T_p");
  unit(T_c, "T_c");
  unit(T_o, "T_o");
  unit(delta, "delta");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) bad += " alpha";
  if (!(margin >= 0.0)) bad += " margin";
  if (!(lr > 0.0)) bad += " lr";
  if (!(temperature > 0.0)) bad += " temperature";
  if (!bad.empty()) throw ConfigError("invalid hyperparameter(s):" + bad);
}

}  // namespace spred
