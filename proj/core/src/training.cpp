#include "opsrag/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "opsrag/error.hpp"
#include "opsrag/random.hpp"

namespace opsrag {
namespace {

TrainingPair to_training_pair(const QAPair& p, std::size_t source) {
  TrainingPair t;
  t.query = p.question;
  t.positive_id = p.gold_chunk_ids.front();
  t.gold_ids = p.gold_chunk_ids;
  t.task = p.task;
  t.source = source;
  return t;
}

void cut(std::vector<TrainingPair> pairs, std::size_t batch_size, std::optional<QaTask> task,
         std::vector<TrainingBatch>& out) {
  for (std::size_t i = 0; i < pairs.size(); i += batch_size) {
    TrainingBatch b;
    b.task = task;
    auto end = std::min(pairs.size(), i + batch_size);
    b.pairs.assign(std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(i)),
                   std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(end)));
    b.hard_negatives.resize(b.pairs.size());
    out.push_back(std::move(b));
  }
}

std::optional<QaTask> common_task(const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) return std::nullopt;
  for (const auto& p : pairs) {
    if (p.task != pairs.front().task) return std::nullopt;
  }
  return pairs.front().task;
}

struct EncodedText {
  SparseFeatures features;
  std::vector<double> unit;  // z / |z|
  double norm = 0.0;
  std::vector<double> grad;  // dL/d(unit)
};

EncodedText encode_for_training(const EncoderModel& model, const std::string& text) {
  EncodedText t;
  t.features = extract_features(text, model.config());
  t.unit = model.project(t.features);
  double n2 = 0.0;
  for (double v : t.unit) n2 += v * v;
  t.norm = std::sqrt(n2);
  if (!std::isfinite(t.norm)) throw Error(Errc::kNonFiniteLoss, "projection is not finite");
  if (!(t.norm > 0.0)) throw Error(Errc::kZeroVector, "projection is zero");
  for (auto& v : t.unit) v /= t.norm;
  t.grad.assign(t.unit.size(), 0.0);
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class Adam {
 public:
  Adam(std::size_t size, const TrainConfig& cfg)
      : m_(size, 0.0f), v_(size, 0.0f), cfg_(cfg) {}

  // Dense update; entries without a gradient row see g = 0.
  void step(std::span<float> w, const SparseGradient& grad) {
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const std::size_t d = grad.dim();
    auto it = grad.rows().begin();
    const auto end = grad.rows().end();
    const std::size_t features = w.size() / d;
    for (std::size_t f = 0; f < features; ++f) {
      const double* g = nullptr;
      if (it != end && it->first == f) {
        g = it->second.data();
        ++it;
      }
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t k = f * d + i;
        const double gi = g ? g[i] : 0.0;
        const double m = b1 * m_[k] + (1.0 - b1) * gi;
        const double v = b2 * v_[k] + (1.0 - b2) * gi * gi;
        m_[k] = static_cast<float>(m);
        v_[k] = static_cast<float>(v);
        const double update = cfg_.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg_.epsilon);
        w[k] = static_cast<float>(w[k] - update);
      }
    }
  }

 private:
  std::vector<float> m_;
  std::vector<float> v_;
  const TrainConfig& cfg_;
  std::uint64_t t_ = 0;
};

}  // namespace

std::vector<TrainingBatch> make_homogeneous_batches(const std::vector<QAPair>& dataset,
                                                    std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw Error(Errc::kInvalidArgument, "batch_size must be positive");
  Rng rng(seed);
  std::vector<TrainingBatch> out;
  for (QaTask task : {QaTask::kQakLog, QaTask::kQakGpt, QaTask::kQatLog}) {
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset[i].task == task && !dataset[i].gold_chunk_ids.empty()) {
        pairs.push_back(to_training_pair(dataset[i], i));
      }
    }
    rng.shuffle(pairs);
    cut(std::move(pairs), batch_size, task, out);
  }
  rng.shuffle(out);
  return out;
}

std::vector<TrainingBatch> make_mixed_batches(const std::vector<QAPair>& dataset,
                                              std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw Error(Errc::kInvalidArgument, "batch_size must be positive");
  Rng rng(seed);
  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].gold_chunk_ids.empty()) pairs.push_back(to_training_pair(dataset[i], i));
  }
  rng.shuffle(pairs);
  std::vector<TrainingBatch> out;
  cut(std::move(pairs), batch_size, std::nullopt, out);
  for (auto& b : out) b.task = common_task(b.pairs);
  return out;
}

std::vector<TrainingBatch> pool_batches(std::vector<TrainingBatch> batches, std::size_t pool) {
  if (pool <= 1) return batches;
  std::vector<TrainingBatch> out;
  std::size_t merged = 0;
  for (auto& b : batches) {
    if (!out.empty() && merged < pool && out.back().task == b.task) {
      auto& dst = out.back();
      for (std::size_t i = 0; i < b.pairs.size(); ++i) {
        dst.pairs.push_back(std::move(b.pairs[i]));
        dst.hard_negatives.push_back(std::move(b.hard_negatives[i]));
      }
      ++merged;
      continue;
    }
    out.push_back(std::move(b));
    merged = 1;
  }
  return out;
}

std::vector<double>& SparseGradient::row(std::uint32_t feature) {
  auto [it, inserted] = rows_.try_emplace(feature);
  if (inserted) it->second.assign(dim_, 0.0);
  return it->second;
}

double SparseGradient::at(std::uint32_t feature, std::size_t i) const {
  auto it = rows_.find(feature);
  return it == rows_.end() ? 0.0 : it->second[i];
}

LossResult infonce_loss(const EncoderModel& model, const TrainingBatch& batch, const ChunkTexts& chunk_texts) {
  const std::size_t n = batch.pairs.size();
  if (n == 0) throw Error(Errc::kDegenerateBatch, "empty batch");
  const double tau = model.temperature();
  const std::size_t d = model.dim();

  std::vector<EncodedText> queries;
  queries.reserve(n);
  for (const auto& p : batch.pairs) queries.push_back(encode_for_training(model, p.query));

  std::map<std::string, EncodedText> chunks;
  auto chunk = [&](const std::string& id) -> EncodedText& {
    auto it = chunks.find(id);
    if (it != chunks.end()) return it->second;
    auto text = chunk_texts.find(id);
    if (text == chunk_texts.end()) throw Error(Errc::kInvalidArgument, "unknown chunk id '" + id + "'");
    return chunks.emplace(id, encode_for_training(model, text->second)).first->second;
  };

  // Candidate lists: positive first, then deduplicated negatives.
  std::vector<std::vector<std::string>> candidates(n);
  std::size_t total_negatives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pair = batch.pairs[i];
    std::unordered_set<std::string> excluded(pair.gold_ids.begin(), pair.gold_ids.end());
    excluded.insert(pair.positive_id);
    auto& list = candidates[i];
    list.push_back(pair.positive_id);
    auto add = [&](const std::string& id) {
      if (excluded.insert(id).second) list.push_back(id);
    };
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) add(batch.pairs[j].positive_id);
    }
    if (i < batch.hard_negatives.size()) {
      for (const auto& id : batch.hard_negatives[i]) add(id);
    }
    total_negatives += list.size() - 1;
    for (const auto& id : list) chunk(id);
  }
  if (total_negatives == 0) {
    throw Error(Errc::kDegenerateBatch, "no anchor in the batch has a negative");
  }

  LossResult out;
  out.anchors = n;
  out.negatives = total_negatives;
  out.gradient = SparseGradient(d);

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> logits;
  for (std::size_t i = 0; i < n; ++i) {
    auto& q = queries[i];
    const auto& list = candidates[i];
    logits.resize(list.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < list.size(); ++c) {
      logits[c] = dot(q.unit, chunks.at(list[c]).unit) / tau;
      max_logit = std::max(max_logit, logits[c]);
    }
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - max_logit);
    const double lse = max_logit + std::log(sum);
    out.loss += (lse - logits[0]) * inv_n;

    for (std::size_t c = 0; c < list.size(); ++c) {
      const double p = std::exp(logits[c] - lse);
      const double g = (p - (c == 0 ? 1.0 : 0.0)) * inv_n / tau;  // dL/ds
      if (g == 0.0) continue;
      auto& ch = chunks.at(list[c]);
      for (std::size_t k = 0; k < d; ++k) {
        q.grad[k] += g * ch.unit[k];
        ch.grad[k] += g * q.unit[k];
      }
    }
  }

  // Back through the normalization and the projection:
  // dL/dz = (I - e e^T) dL/de / |z|,  dL/dW(:, f) += x_f dL/dz.
  std::vector<double> dz(d);
  auto backprop = [&](const EncodedText& t) {
    const double proj = dot(t.unit, t.grad);
    for (std::size_t k = 0; k < d; ++k) dz[k] = (t.grad[k] - t.unit[k] * proj) / t.norm;
    for (auto [f, x] : t.features) {
      auto& row = out.gradient.row(f);
      for (std::size_t k = 0; k < d; ++k) row[k] += static_cast<double>(x) * dz[k];
    }
  };
  for (const auto& q : queries) backprop(q);
  for (const auto& [id, c] : chunks) backprop(c);
  return out;
}

VectorIndex build_chunk_index(const std::vector<Chunk>& chunks, const TextEncoder& encoder, IndexOptions options) {
  std::vector<IndexEntry> entries;
  entries.reserve(chunks.size());
  for (const auto& c : chunks) entries.push_back({c.id, encoder.encode(c.rendered())});
  return VectorIndex::build(std::move(entries), encoder.dim(), options);
}

std::vector<std::vector<std::string>> mine_hard_negatives(const std::vector<QAPair>& pairs,
                                                          const VectorIndex& index,
                                                          const TextEncoder& encoder, std::size_t k,
                                                          std::size_t m) {
  std::vector<std::vector<std::string>> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& gold = pairs[i].gold_chunk_ids;
    auto hits = index.search(encoder.encode(pairs[i].question), k);
    for (const auto& h : hits) {
      if (out[i].size() >= m) break;
      if (std::find(gold.begin(), gold.end(), h.id) == gold.end()) out[i].push_back(h.id);
    }
  }
  return out;
}

TrainResult train(EncoderModel model, const std::vector<QAPair>& data_em,
                  const std::vector<Chunk>& chunks, const TrainConfig& config) {
  if (config.temperature) model.set_temperature(*config.temperature);

  ChunkTexts texts;
  for (const auto& c : chunks) texts.emplace(c.id, c.rendered());
  for (const auto& p : data_em) {
    for (const auto& id : p.gold_chunk_ids) {
      if (!texts.count(id)) throw Error(Errc::kInvalidArgument, "gold chunk '" + id + "' not in chunk set");
    }
  }

  TrainResult result;
  if (config.epochs == 0) {
    result.model = std::move(model);
    return result;
  }

  Adam adam(model.weights().size(), config);
  std::vector<std::vector<std::string>> mined;
  auto mine = [&] {
    auto index = build_chunk_index(chunks, model);
    mined = mine_hard_negatives(data_em, index, model, config.hard_negative_k, config.hard_negatives_per_pair);
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.hard_negatives && (epoch == 0 || config.refresh_negatives)) mine();

    const std::uint64_t epoch_seed = config.seed * 1000003ULL + epoch;
    auto batches = config.homogeneous_batches
                       ? make_homogeneous_batches(data_em, config.batch_size, epoch_seed)
                       : make_mixed_batches(data_em, config.batch_size, epoch_seed);
    if (config.hard_negatives) {
      for (auto& b : batches) {
        for (std::size_t i = 0; i < b.pairs.size(); ++i) b.hard_negatives[i] = mined[b.pairs[i].source];
      }
    }
    batches = pool_batches(std::move(batches), config.negative_pool);

    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      LossResult lr;
      try {
        lr = infonce_loss(model, batches[step], texts);
      } catch (const Error& e) {
        if (e.code() != Errc::kDegenerateBatch) throw;
        ++result.skipped_batches;
        continue;
      }
      if (!std::isfinite(lr.loss)) {
        std::ostringstream msg;
        msg << "epoch " << epoch << " step " << step << ": loss " << lr.loss << " (tau " << model.temperature()
            << ", lr " << config.learning_rate << ", batch " << batches[step].pairs.size() << ")";
        throw Error(Errc::kNonFiniteLoss, msg.str());
      }
      adam.step(model.mutable_weights(), lr.gradient);
      loss_sum += lr.loss;
      ++counted;
      ++result.steps;
    }
    result.epoch_mean_loss.push_back(counted ? loss_sum / static_cast<double>(counted) : 0.0);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace opsrag
