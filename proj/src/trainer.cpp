#include "spred/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "spred/errors.hpp"

namespace spred {
namespace {

constexpr std::uint64_t kEncoderSeedStream = 0x454E43;
constexpr std::uint64_t kSamplerSeedStream = 0x504B53;
constexpr std::uint64_t kDanetSeedStream = 0x44414E;

LabelStats to_stats(const PseudoLabelSet& labels, std::span<const int> truth) {
  const LabelQuality q = pseudo_label_quality(labels, truth);
  return {q.count, q.precision, q.recall};
}

std::vector<int> truth_of(const SemiDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.train.size());
  for (const auto& o : ds.train) out.push_back(o.identity);
  return out;
}

PseudoLabelSet artificial_only(const SemiDataset& ds, LabelSource tag) {
  PseudoLabelSet out;
  out.labels.assign(ds.train.size(), kUnavailable);
  out.artificial.assign(ds.train.size(), false);
  out.source = tag;
  for (std::size_t i : ds.labeled_indices) {
    out.labels[i] = ds.train[i].identity;
    out.artificial[i] = true;
  }
  return out;
}

PseudoLabelSet prototype_labels(const Matrix& features, const PrototypeBank& bank, const SemiDataset& ds,
                                const PipelineConfig& cfg) {
  PseudoLabelSet out = artificial_only(ds, LabelSource::npl);
  for (std::size_t i : ds.unlabeled_indices) {
    const NeighborDecision d =
        cfg.ablations.no_npl
            ? global_softmax_label(features.row(i), bank, cfg.hp.T_p, std::nullopt, cfg.hp.temperature)
            : neighbor_label(features.row(i), bank, cfg.hp.T_p, std::nullopt, cfg.hp.temperature);
    out.labels[i] = d.available() ? d.label : kUnavailable;
  }
  return out;
}

/// Draws P identities, then up to K distinct samples of each, from the
/// samples that currently carry a label.
class PkSampler {
 public:
  PkSampler(const PseudoLabelSet& labels, std::size_t p, std::size_t k) : p_(p), k_(k) {
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels.available(i)) by_label[labels.labels[i]].push_back(i);
    }
    for (auto& [label, members] : by_label) groups_.push_back(std::move(members));
  }

  std::vector<std::size_t> draw(std::mt19937_64& rng) const {
    std::vector<std::size_t> order(groups_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> picked;
    for (std::size_t g = 0; g < std::min(p_, order.size()); ++g) {
      std::vector<std::size_t> members = groups_[order[g]];
      const std::size_t take = std::min(k_, members.size());
      for (std::size_t j = 0; j < take; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, members.size() - 1);
        std::swap(members[j], members[pick(rng)]);
        picked.push_back(members[j]);
      }
    }
    return picked;
  }

 private:
  std::size_t p_;
  std::size_t k_;
  std::vector<std::vector<std::size_t>> groups_;
};

bool forms_triplet(const Batch& batch, bool pseudo_anchors) {
  for (std::size_t a = 0; a < batch.labels.size(); ++a) {
    if (!pseudo_anchors && !batch.artificial[a]) continue;
    bool pos = false;
    bool neg = false;
    for (std::size_t b = 0; b < batch.labels.size(); ++b) {
      if (b == a) continue;
      (batch.labels[b] == batch.labels[a] ? pos : neg) = true;
    }
    if (pos && neg) return true;
  }
  return false;
}

Batch make_batch(const SemiDataset& ds, const PseudoLabelSet& labels, std::span<const std::size_t> indices) {
  Batch b;
  b.inputs = stack_grids(ds.train, indices);
  for (std::size_t i : indices) {
    b.labels.push_back(labels.labels[i]);
    b.artificial.push_back(labels.artificial[i]);
  }
  return b;
}

void add_rows(Matrix& into, const Matrix& from, double scale) {
  auto dst = into.flat();
  auto src = from.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

nlohmann::json labels_json(const PseudoLabelSet& s) { return s.labels; }

}  // namespace

void TrainerConfig::validate() const {
  std::string bad;
  if (epochs_first < 1) bad += " epochs_first";
  if (epochs_later < 1) bad += " epochs_later";
  if (batch_identities < 2) bad += " batch_identities";
  if (batch_instances < 2) bad += " batch_instances";
  if (encoder.output == 0) bad += " encoder.output";
  if (!encoder.linear && encoder.hidden == 0) bad += " encoder.hidden";
  if (!bad.empty()) throw ConfigError("invalid trainer setting(s):" + bad);
}

void PipelineConfig::validate() const {
  hp.validate();
  trainer.validate();
  clustering.validate();
  danet.validate();
}

TrainState initial_state(std::size_t input_dim, const PipelineConfig& config) {
  config.validate();
  TrainState s;
  s.model = make_encoder(input_dim, config.trainer.encoder, derive_seed(config.seed, kEncoderSeedStream));
  s.rng.seed(derive_seed(config.seed, kSamplerSeedStream));
  return s;
}

BatchGradients batch_gradients(const Mlp& model, const PrototypeBank& bank, const FrozenKnowledge* old,
                               const Batch& batch, double alpha, const PipelineConfig& config,
                               bool split_components) {
  const std::size_t n = batch.inputs.rows();
  if (n == 0 || batch.labels.size() != n || batch.artificial.size() != n) {
    throw std::invalid_argument("batch_gradients: malformed batch");
  }
  const double tau = config.hp.temperature;
  const Matrix features = model.forward_batch(batch.inputs);
  const std::size_t dim = features.cols();

  BatchGradients out;
  out.bank = Matrix(bank.size(), bank.dim());
  Matrix base(n, dim);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PrototypeLoss p = prototype_loss(features.row(i), batch.labels[i], bank, tau);
    out.losses.prototype += p.loss * inv_n;
    auto g = base.row(i);
    for (std::size_t k = 0; k < dim; ++k) g[k] += p.grad_feature[k] * inv_n;
    add_rows(out.bank, p.grad_bank, inv_n);
  }

  const std::vector<bool> anchors = config.trainer.triplet_on_pseudo ? std::vector<bool>{} : batch.artificial;
  const TripletLoss tri = batch_hard_triplet(features, batch.labels, config.hp.margin, anchors);
  out.losses.triplet = tri.loss;
  add_rows(base, tri.grad_features, 1.0);

  Matrix structure(n, dim);
  if (old != nullptr) {
    const Matrix old_features = old->model.forward_batch(batch.inputs);
    std::size_t included = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (config.trainer.structure_on_pseudo || batch.artificial[i]) ++included;
    }
    if (included > 0) {
      const double inv = 1.0 / static_cast<double>(included);
      for (std::size_t i = 0; i < n; ++i) {
        if (!config.trainer.structure_on_pseudo && !batch.artificial[i]) continue;
        const StructureLoss s = structure_loss(old_features.row(i), features.row(i), old->bank, tau);
        out.losses.structure += s.loss * inv;
        auto g = structure.row(i);
        for (std::size_t k = 0; k < dim; ++k) g[k] = s.grad_feature_new[k] * inv;
      }
      out.losses.structure_computed = true;
    }
  }

  out.losses.total = out.losses.prototype + out.losses.triplet + alpha * out.losses.structure;
  Matrix upstream = base;
  if (out.losses.structure_computed) add_rows(upstream, structure, alpha);
  out.model = model.backward(batch.inputs, upstream);
  if (split_components) {
    out.base_model = model.backward(batch.inputs, base);
    out.structure_model = model.backward(batch.inputs, structure);
  }
  return out;
}

BatchLosses train_step(Mlp& model, PrototypeBank& bank, const FrozenKnowledge* old, const Batch& batch,
                       double alpha, const PipelineConfig& config) {
  const BatchGradients g = batch_gradients(model, bank, old, batch, alpha, config);
  sgd_step(model.params(), g.model, config.hp.lr);
  sgd_step(bank.prototypes().flat(), g.bank.flat(), config.hp.lr);
  return g.losses;
}

RunMetrics run_stage(TrainState& state, const SemiDataset& dataset, const PipelineConfig& config) {
  config.validate();
  const int t = state.stage + 1;
  if (dataset.stage != t) {
    throw std::invalid_argument("run_stage: dataset is for stage " + std::to_string(dataset.stage) +
                                " but the state expects stage " + std::to_string(t));
  }
  if (dataset.labeled_indices.empty()) {
    throw ConfigError("stage " + std::to_string(t) + ": labeled set is empty");
  }
  const Ablations& ab = config.ablations;
  const double alpha = config.effective_alpha();
  const std::vector<int> truth = truth_of(dataset);
  const bool use_unlabeled = !ab.labeled_only && !dataset.unlabeled_indices.empty();

  RunMetrics metrics;
  metrics.warnings = dataset.warnings;
  if (dataset.unlabeled_indices.empty()) {
    metrics.warnings.push_back("stage " + std::to_string(t) + ": unlabeled set is empty; pseudo-labeling skipped");
  }

  std::optional<FrozenKnowledge> old;
  if (t > 1) {
    if (!state.bank) throw std::logic_error("run_stage: stage " + std::to_string(t) + " has no previous bank");
    old = FrozenKnowledge{state.model, *state.bank, state.danet};
  }
  const FrozenKnowledge* old_ptr = old ? &*old : nullptr;

  // Old-knowledge clustering, once per stage.
  std::optional<ClusterAssignment> old_clusters;
  if (old && use_unlabeled && !ab.no_dkcp) {
    const bool aligned = old->danet && !ab.no_danet && config.danet.enabled;
    const Matrix feats = aligned ? encode_all(old->model, align_all(*old->danet, dataset.train))
                                 : encode_all(old->model, dataset.train);
    old_clusters = cluster_features(feats, config.clustering);
  }

  Mlp model = state.model;
  PrototypeBank bank;
  {
    const Matrix feats = encode_all(model, dataset.train);
    Matrix labeled;
    std::vector<int> ids;
    for (std::size_t i : dataset.labeled_indices) {
      labeled.append_row(feats.row(i));
      ids.push_back(dataset.train[i].identity);
    }
    bank = init_prototypes(labeled, ids);
  }

  std::ofstream dump;
  if (!config.purification_dump.empty()) {
    dump.open(config.purification_dump, std::ios::app);
    if (!dump) throw std::runtime_error("cannot open purification dump " + config.purification_dump.string());
  }

  const int epochs = t == 1 ? config.trainer.epochs_first : config.trainer.epochs_later;
  const std::size_t per_batch = config.trainer.batch_identities * config.trainer.batch_instances;
  for (int e = 1; e <= epochs; ++e) {
    EpochMetrics m;
    m.stage = t;
    m.epoch = e;
    m.old_clusters = old_clusters ? old_clusters->cluster_count : 0;

    PseudoLabelSet merged;
    if (!use_unlabeled) {
      merged = artificial_only(dataset, LabelSource::merged);
    } else {
      const Matrix feats = encode_all(model, dataset.train);
      const PseudoLabelSet npl = prototype_labels(feats, bank, dataset, config);
      m.npl = to_stats(npl, truth);
      if (ab.no_dkcp) {
        merged = npl;
        merged.source = LabelSource::merged;
      } else {
        const ClusterAssignment fresh = cluster_features(feats, config.clustering);
        m.new_clusters = fresh.cluster_count;
        const LabelGroups groups = label_groups(npl);
        const PseudoLabelSet new_side = purify(npl, groups, fresh, config.hp.T_c, LabelSource::new_filtered);
        const PseudoLabelSet old_side = old_clusters
                                            ? purify(npl, groups, *old_clusters, config.hp.T_o, LabelSource::old_filtered)
                                            : npl.labeled_only(LabelSource::old_filtered);
        MergeResult mr = merge_pseudo(old_side, new_side);
        m.new_filtered = to_stats(new_side, truth);
        m.old_filtered = to_stats(old_side, truth);
        m.conflicts = mr.conflicts;
        merged = std::move(mr.labels);
        if (dump.is_open()) {
          nlohmann::json lc_new = nlohmann::json::array();
          nlohmann::json lc_old = nlohmann::json::array();
          for (std::size_t i = 0; i < npl.size(); ++i) {
            const bool scored = npl.available(i) && !npl.artificial[i];
            lc_new.push_back(scored ? nlohmann::json(label_confidence(i, npl, groups, fresh)) : nlohmann::json());
            lc_old.push_back(scored && old_clusters ? nlohmann::json(label_confidence(i, npl, groups, *old_clusters))
                                                    : nlohmann::json());
          }
          nlohmann::json rec = {{"stage", t},
                                {"epoch", e},
                                {"truth", truth},
                                {"artificial", npl.artificial},
                                {"npl", labels_json(npl)},
                                {"lc_new", std::move(lc_new)},
                                {"lc_old", std::move(lc_old)},
                                {"new_filtered", labels_json(new_side)},
                                {"old_filtered", labels_json(old_side)},
                                {"merged", labels_json(merged)},
                                {"conflicts", m.conflicts}};
          dump << rec.dump() << '\n';
        }
      }
    }
    m.merged = to_stats(merged, truth);
    m.training_samples = merged.available_count();

    const PkSampler sampler(merged, config.trainer.batch_identities, config.trainer.batch_instances);
    const std::size_t steps = std::max<std::size_t>(1, (m.training_samples + per_batch - 1) / per_batch);
    for (std::size_t s = 0; s < steps; ++s) {
      const std::vector<std::size_t> idx = sampler.draw(state.rng);
      const Batch batch = make_batch(dataset, merged, idx);
      if (!forms_triplet(batch, config.trainer.triplet_on_pseudo)) {
        ++m.skipped_batches;
        spdlog::warn("stage {} epoch {}: batch of {} samples has no valid triplet; skipped", t, e, idx.size());
        continue;
      }
      const BatchLosses l = train_step(model, bank, old_ptr, batch, alpha, config);
      if (!std::isfinite(l.total)) {
        std::ostringstream msg;
        msg << "stage " << t << " epoch " << e << " step " << s << ": loss diverged (L_p=" << l.prototype
            << ", L_tri=" << l.triplet << ", L_s=" << l.structure << ")";
        throw std::domain_error(msg.str());
      }
      m.loss_prototype += l.prototype;
      m.loss_triplet += l.triplet;
      m.loss_structure += l.structure;
      ++m.steps;
    }
    if (m.steps > 0) {
      const double inv = 1.0 / static_cast<double>(m.steps);
      m.loss_prototype *= inv;
      m.loss_triplet *= inv;
      m.loss_structure *= inv;
    }
    spdlog::debug("stage {} epoch {}: L_p={:.4f} L_tri={:.4f} L_s={:.4f} merged={} (precision {:.3f})", t, e,
                  m.loss_prototype, m.loss_triplet, m.loss_structure, m.merged.count, m.merged.precision);
    metrics.epochs.push_back(m);
  }

  state.model = old ? fuse(old->model, model, config.hp.delta) : model;
  state.bank = std::move(bank);
  if (config.danet.enabled && !ab.no_danet) {
    state.danet = train_danet(dataset.train, dataset.grid, config.danet,
                              derive_seed(config.seed, kDanetSeedStream + static_cast<std::uint64_t>(t)))
                      .params;
  } else {
    state.danet.reset();
  }
  state.stage = t;
  return metrics;
}

namespace {

RetrievalSet retrieval_set(const Mlp& model, const std::vector<Observation>& obs) {
  RetrievalSet s;
  s.features = encode_all(model, obs);
  for (const auto& o : obs) {
    s.identities.push_back(o.identity);
    s.cameras.push_back(o.camera);
  }
  return s;
}

}  // namespace

StageEval evaluate_stream(const Mlp& model, const Stream& stream, int seen_stages) {
  if (seen_stages < 1 || static_cast<std::size_t>(seen_stages) > stream.seen.size()) {
    throw std::invalid_argument("evaluate_stream: " + std::to_string(seen_stages) + " seen stages requested, stream has " +
                                std::to_string(stream.seen.size()));
  }
  StageEval ev;
  ev.stage = seen_stages;
  for (int s = 0; s < seen_stages; ++s) {
    const SemiDataset& ds = stream.seen[static_cast<std::size_t>(s)];
    ev.domains.push_back({seen_stages, ds.domain, true,
                          retrieve(retrieval_set(model, ds.test.query), retrieval_set(model, ds.test.gallery))});
  }
  for (const TestDataset& u : stream.unseen) {
    ev.domains.push_back({seen_stages, u.domain, false,
                          retrieve(retrieval_set(model, u.test.query), retrieval_set(model, u.test.gallery))});
  }
  ev.summary = summarize(ev.domains);
  return ev;
}

LifelongResult run_lifelong(const PipelineConfig& config, const Stream& stream, const StageCallback& on_stage) {
  if (stream.seen.empty()) throw std::invalid_argument("run_lifelong: stream has no training stages");
  LifelongResult result;
  result.state = initial_state(stream.grid.size(), config);
  for (const SemiDataset& ds : stream.seen) {
    RunMetrics m = run_stage(result.state, ds, config);
    auto& all = result.metrics;
    all.epochs.insert(all.epochs.end(), m.epochs.begin(), m.epochs.end());
    all.warnings.insert(all.warnings.end(), m.warnings.begin(), m.warnings.end());
    StageEval ev = evaluate_stream(result.state.model, stream, result.state.stage);
    spdlog::info("stage {} done: Seen-Avg mAP {:.4f}, UnSeen-Avg mAP {:.4f}", ev.stage, ev.summary.seen_avg_map,
                 ev.summary.unseen_avg_map);
    if (on_stage) on_stage(result.state, ev);
    all.evaluations.push_back(std::move(ev));
  }
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics " + path.string());
  out << "kind,stage,epoch,domain,split,loss_p,loss_tri,loss_s,steps,skipped,"
         "npl_count,npl_precision,npl_recall,new_count,new_precision,old_count,old_precision,"
         "merged_count,merged_precision,merged_recall,conflicts,new_clusters,old_clusters,mAP,rank1,n_queries\n";
  char buf[512];
  for (const EpochMetrics& m : metrics.epochs) {
    std::snprintf(buf, sizeof buf,
                  "epoch,%d,%d,,,%.10f,%.10f,%.10f,%zu,%zu,%zu,%.10f,%.10f,%zu,%.10f,%zu,%.10f,%zu,%.10f,%.10f,%zu,%d,%d,,,\n",
                  m.stage, m.epoch, m.loss_prototype, m.loss_triplet, m.loss_structure, m.steps, m.skipped_batches,
                  m.npl.count, m.npl.precision, m.npl.recall, m.new_filtered.count, m.new_filtered.precision,
                  m.old_filtered.count, m.old_filtered.precision, m.merged.count, m.merged.precision, m.merged.recall,
                  m.conflicts, m.new_clusters, m.old_clusters);
    out << buf;
  }
  for (const StageEval& ev : metrics.evaluations) {
    for (const DomainResult& d : ev.domains) {
      std::snprintf(buf, sizeof buf, "eval,%d,,%d,%s,,,,,,,,,,,,,,,,,,,%.10f,%.10f,%zu\n", ev.stage, d.domain,
                    d.seen ? "seen" : "unseen", d.retrieval.mAP, d.retrieval.rank1, d.retrieval.n_queries);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "eval,%d,,,seen_avg,,,,,,,,,,,,,,,,,,,%.10f,%.10f,\n", ev.stage,
                  ev.summary.seen_avg_map, ev.summary.seen_avg_rank1);
    out << buf;
    if (ev.summary.unseen_domains > 0) {
      std::snprintf(buf, sizeof buf, "eval,%d,,,unseen_avg,,,,,,,,,,,,,,,,,,,%.10f,%.10f,\n", ev.stage,
                    ev.summary.unseen_avg_map, ev.summary.unseen_avg_rank1);
      out << buf;
    }
  }
}

}  // namespace spred
