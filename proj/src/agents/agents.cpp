// Copyright 2026 The Overmod Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "overmod/agents/agents.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "overmod/error.hpp"
#include "overmod/nn/adam.hpp"
#include "overmod/nn/loss.hpp"
#include "overmod/util/io.hpp"

namespace overmod::agents {
namespace {

// Games are embedded this many at a time.
constexpr std::size_t kEmbedChunk = 32;

std::vector<const Image*> images_of(std::span<const ReferenceGame> games) {
  std::vector<const Image*> out;
  out.reserve(games.size() * kNumReferents);
  for (const auto& g : games) {
    for (const auto& r : g.referents) out.push_back(&r.image);
  }
  return out;
}

void check_target(std::size_t target) {
  if (target >= kNumReferents) {
    throw InputError("target index " + std::to_string(target) + " is not in {0, 1, 2}");
  }
}

}  // namespace

Referents referents_of(const ReferenceGame& game) {
  return {&game.referents[0].image, &game.referents[1].image, &game.referents[2].image};
}

std::vector<double> embed_utterance_space(const semantics::SemanticModel& model) {
  const std::size_t d = model.config().embed_dim;
  std::vector<double> out(kUtteranceSpaceSize * d);
  const auto& space = scene::utterance_space();
  for (std::size_t u = 0; u < space.size(); ++u) {
    const auto g = model.embed_utterance(space[u].tokens());
    std::copy(g.begin(), g.end(), out.begin() + static_cast<std::ptrdiff_t>(u * d));
  }
  return out;
}

namespace {

SemanticTable table_from_embeddings(std::span<const double> f, std::span<const double> g,
                                    std::size_t d) {
  SemanticTable t{};
  for (std::size_t u = 0; u < kUtteranceSpaceSize; ++u) {
    for (std::size_t r = 0; r < kNumReferents; ++r) {
      t[u][r] = semantics::score(f.subspan(r * d, d), g.subspan(u * d, d));
    }
  }
  return t;
}

}  // namespace

SemanticTable semantic_table(const semantics::SemanticModel& model, const Referents& referents) {
  const auto f = model.embed_images(referents);
  const auto g = embed_utterance_space(model);
  return table_from_embeddings(f, g, model.config().embed_dim);
}

std::vector<SemanticTable> semantic_tables(const semantics::SemanticModel& model,
                                           std::span<const ReferenceGame> games) {
  const std::size_t d = model.config().embed_dim;
  const auto g = embed_utterance_space(model);
  std::vector<SemanticTable> out(games.size());
  for (std::size_t start = 0; start < games.size(); start += kEmbedChunk) {
    const std::size_t count = std::min(kEmbedChunk, games.size() - start);
    const auto images = images_of(games.subspan(start, count));
    const auto f = model.embed_images(images);
    for (std::size_t i = 0; i < count; ++i) {
      out[start + i] = table_from_embeddings(
          std::span<const double>(f).subspan(i * kNumReferents * d, kNumReferents * d), g, d);
    }
  }
  return out;
}

std::vector<SemanticTable> ensemble_tables(const semantics::Ensemble& ensemble,
                                           std::span<const ReferenceGame> games) {
  std::vector<SemanticTable> sum(games.size(), SemanticTable{});
  for (const auto& m : ensemble.members()) {
    const auto t = semantic_tables(m, games);
    for (std::size_t i = 0; i < games.size(); ++i) {
      for (std::size_t u = 0; u < kUtteranceSpaceSize; ++u) {
        for (std::size_t r = 0; r < kNumReferents; ++r) sum[i][u][r] += t[i][u][r];
      }
    }
  }
  const double n = static_cast<double>(ensemble.size());
  for (auto& t : sum) {
    for (auto& row : t) {
      for (double& v : row) v /= n;
    }
  }
  return sum;
}

SemanticTable truth_table(const ReferenceGame& game) {
  SemanticTable t{};
  const auto& space = scene::utterance_space();
  for (std::size_t u = 0; u < space.size(); ++u) {
    const auto truth = scene::truth_vector(space[u], game);
    for (std::size_t r = 0; r < kNumReferents; ++r) t[u][r] = truth[r] ? 1.0 : 0.0;
  }
  return t;
}

Values listener_distribution(const Values& values) {
  const auto p = nn::softmax(values);
  return {p[0], p[1], p[2]};
}

std::size_t listener_choice(const Values& values) {
  // Softmax is monotone, so the argmax of the values is the argmax of the
  // distribution.
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumReferents; ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

Values listener_values(const semantics::SemanticModel& m, const Utterance& u, const Referents& r) {
  const auto f = m.embed_images(r);
  const auto g = m.embed_utterance(u.tokens());
  const std::size_t d = m.config().embed_dim;
  Values v{};
  for (std::size_t k = 0; k < kNumReferents; ++k) {
    v[k] = semantics::score(std::span<const double>(f).subspan(k * d, d), g);
  }
  return v;
}

}  // namespace

Values eval_listener_distribution(const EvalListener& l, const Utterance& u, const Referents& r) {
  return listener_distribution(listener_values(l.model, u, r));
}

std::size_t listener_choice(const EvalListener& l, const Utterance& u, const Referents& r) {
  return listener_choice(listener_values(l.model, u, r));
}

double utility(const SemanticTable& table, std::size_t u, std::size_t target, double cost) {
  check_target(target);
  if (u >= kUtteranceSpaceSize) throw InputError("utterance index out of range");
  const auto& row = table[u];
  const double log_p = row[target] - nn::log_sum_exp(row);
  return log_p - cost * static_cast<double>(scene::utterance_space()[u].length());
}

double utility(const RSASpeaker& s, const Utterance& u, std::size_t target, const Referents& r) {
  const std::size_t index = scene::utterance_index(u);
  Values v{};
  for (const auto& m : s.ensemble.members()) {
    const auto mv = listener_values(m, u, r);
    for (std::size_t k = 0; k < kNumReferents; ++k) v[k] += mv[k];
  }
  for (double& x : v) x /= static_cast<double>(s.ensemble.size());
  SemanticTable t{};
  t[index] = v;
  return utility(t, index, target, s.cost);
}

std::size_t rsa_choice(const SemanticTable& table, std::size_t target, double cost) {
  std::size_t best = 0;
  double best_u = utility(table, 0, target, cost);
  for (std::size_t u = 1; u < kUtteranceSpaceSize; ++u) {
    const double v = utility(table, u, target, cost);
    if (v > best_u) {
      best_u = v;
      best = u;
    }
  }
  return best;
}

Utterance rsa_speak(const SemanticTable& table, std::size_t target, double cost) {
  return scene::utterance_space()[rsa_choice(table, target, cost)];
}

Utterance rsa_speak(const RSASpeaker& s, std::size_t target, const Referents& r) {
  check_target(target);
  SemanticTable sum{};
  for (const auto& m : s.ensemble.members()) {
    const auto t = semantic_table(m, r);
    for (std::size_t u = 0; u < kUtteranceSpaceSize; ++u) {
      for (std::size_t k = 0; k < kNumReferents; ++k) sum[u][k] += t[u][k];
    }
  }
  for (auto& row : sum) {
    for (double& v : row) v /= static_cast<double>(s.ensemble.size());
  }
  return rsa_speak(sum, target, s.cost);
}

LiteralSpeaker::LiteralSpeaker(const nn::EncoderConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      image_(config, "context"),
      init_("decoder.init", 3 * config.embed_dim + kNumReferents, config.embed_dim),
      embedding_("decoder", kDecoderInputVocabulary, config.token_dim),
      cell_("decoder.gru", config.token_dim, config.embed_dim),
      out_("decoder.out", config.embed_dim, kOutputVocabulary) {
  nn::Rng rng(util::derive_seed(seed, {0x6c6974ull}));
  image_.register_parameters(params_, rng);
  init_.register_parameters(params_, rng);
  embedding_.register_parameters(params_, rng);
  cell_.register_parameters(params_, rng);
  out_.register_parameters(params_, rng);
}

std::vector<double> LiteralSpeaker::encode(const Referents& r, std::size_t target) const {
  check_target(target);
  const std::size_t d = config_.embed_dim;
  std::vector<double> ctx(context_dim(), 0.0);
  std::vector<double> images;
  for (const Image* img : r) {
    if (img->side != config_.image_side) throw InputError("image side does not match the speaker");
    scene::append_normalized(*img, images);
  }
  image_.forward(params_, images, kNumReferents, std::span<double>(ctx.data(), 3 * d));
  ctx[3 * d + target] = 1.0;
  return ctx;
}

std::vector<Utterance> LiteralSpeaker::decode(std::span<const double> contexts,
                                              std::size_t count) const {
  const std::size_t d = config_.embed_dim;
  const std::size_t cd = context_dim();
  std::vector<Utterance> out(count);
  std::vector<double> h(d), logits(kOutputVocabulary);
  nn::GruCell::Record rec;
  for (std::size_t i = 0; i < count; ++i) {
    init_.forward(params_, contexts.subspan(i * cd, cd), h);
    std::vector<scene::Token> tokens;
    scene::Token input = kBeginOfSequence;
    for (std::size_t step = 0; step < kMaxUtteranceLength; ++step) {
      cell_.step(params_, embedding_.lookup(params_, input), h, rec);
      h = rec.h;
      out_.forward(params_, h, logits);
      const auto next = static_cast<scene::Token>(
          std::max_element(logits.begin(), logits.end()) - logits.begin());
      if (next == kEndOfSequence) break;
      tokens.push_back(next);
      input = next;
    }
    out[i] = Utterance(std::move(tokens));
  }
  return out;
}

Utterance LiteralSpeaker::speak(const Referents& r, std::size_t target) const {
  const auto ctx = encode(r, target);
  return decode(ctx, 1)[0];
}

std::vector<Utterance> LiteralSpeaker::speak_all(std::span<const ReferenceGame> games) const {
  const std::size_t d = config_.embed_dim;
  const std::size_t cd = context_dim();
  std::vector<Utterance> out;
  out.reserve(games.size());
  for (std::size_t start = 0; start < games.size(); start += kEmbedChunk) {
    const std::size_t count = std::min(kEmbedChunk, games.size() - start);
    const auto chunk = games.subspan(start, count);
    std::vector<double> images;
    for (const Image* img : images_of(chunk)) scene::append_normalized(*img, images);
    std::vector<double> f(count * kNumReferents * d);
    image_.forward(params_, images, count * kNumReferents, f);
    std::vector<double> ctx(count * cd, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
      std::copy_n(f.begin() + static_cast<std::ptrdiff_t>(i * 3 * d), 3 * d,
                  ctx.begin() + static_cast<std::ptrdiff_t>(i * cd));
      check_target(chunk[i].target_index);
      ctx[i * cd + 3 * d + chunk[i].target_index] = 1.0;
    }
    for (auto& u : decode(ctx, count)) out.push_back(std::move(u));
  }
  return out;
}

double LiteralSpeaker::batch_loss(std::span<const ReferenceGame* const> games, bool with_grad,
                                  std::uint64_t* region) {
  const std::size_t n = games.size();
  if (n == 0) throw InputError("empty batch");
  const std::size_t d = config_.embed_dim;
  const std::size_t cd = context_dim();

  std::vector<double> images;
  for (const ReferenceGame* g : games) {
    for (const auto& r : g->referents) scene::append_normalized(r.image, images);
  }
  nn::ImageEncoder::Cache cache;
  std::vector<double> f(n * kNumReferents * d);
  image_.forward(params_, images, n * kNumReferents, f, with_grad || region != nullptr ? &cache : nullptr);
  if (region != nullptr) *region = nn::region_signature(cache);

  std::size_t total_tokens = 0;
  for (const ReferenceGame* g : games) total_tokens += g->ground_truth.length() + 1;
  const double scale = 1.0 / static_cast<double>(total_tokens);

  double loss = 0.0;
  std::vector<double> df(with_grad ? f.size() : 0, 0.0);
  std::vector<double> ctx(cd), h0(d), logits(kOutputVocabulary);
  std::vector<double> dlogits(kOutputVocabulary), dh(d), dh_prev(d), dx(config_.token_dim);
  std::vector<double> dctx(cd);
  for (std::size_t i = 0; i < n; ++i) {
    const ReferenceGame& g = *games[i];
    check_target(g.target_index);
    std::fill(ctx.begin(), ctx.end(), 0.0);
    std::copy_n(f.begin() + static_cast<std::ptrdiff_t>(i * 3 * d), 3 * d, ctx.begin());
    ctx[3 * d + g.target_index] = 1.0;
    init_.forward(params_, ctx, h0);

    std::vector<scene::Token> inputs{kBeginOfSequence};
    std::vector<scene::Token> targets;
    for (scene::Token t : g.ground_truth.tokens()) {
      inputs.push_back(t);
      targets.push_back(t);
    }
    targets.push_back(kEndOfSequence);

    std::vector<nn::GruCell::Record> recs(inputs.size());
    std::vector<std::vector<double>> step_logits(inputs.size());
    std::vector<double> h = h0;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      cell_.step(params_, embedding_.lookup(params_, inputs[s]), h, recs[s]);
      h = recs[s].h;
      out_.forward(params_, h, logits);
      loss += nn::cross_entropy_loss(logits, targets[s]);
      step_logits[s] = logits;
    }
    if (!with_grad) continue;

    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t s = inputs.size(); s-- > 0;) {
      std::fill(dlogits.begin(), dlogits.end(), 0.0);
      nn::cross_entropy_backward(step_logits[s], targets[s], scale, dlogits);
      std::vector<double> dh_out(d);
      out_.backward(params_, recs[s].h, dlogits, dh_out);
      for (std::size_t k = 0; k < d; ++k) dh[k] += dh_out[k];
      cell_.step_backward(params_, recs[s], dh, dx, dh_prev);
      embedding_.backward(params_, inputs[s], dx);
      std::swap(dh, dh_prev);
    }
    init_.backward(params_, ctx, dh, dctx);
    std::copy_n(dctx.begin(), 3 * d, df.begin() + static_cast<std::ptrdiff_t>(i * 3 * d));
  }
  if (with_grad) image_.backward(params_, cache, df);
  return loss * scale;
}

std::map<std::string, std::string> LiteralSpeaker::checkpoint_metadata() const {
  return {{"role", kLiteralSpeakerRole},
          {"kind", "literal-speaker"},
          {"seed", std::to_string(seed_)},
          {"validation_accuracy", util::format_double(validation_accuracy_)},
          {"config", nn::to_json(config_).dump()}};
}

LiteralSpeaker LiteralSpeaker::from_checkpoint(const nn::Checkpoint& checkpoint) {
  const auto& meta = checkpoint.metadata;
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw IoError("checkpoint lacks '" + key + "'");
    return it->second;
  };
  if (field("kind") != "literal-speaker") throw IoError("checkpoint does not hold a literal speaker");
  nn::EncoderConfig config;
  try {
    config = nn::encoder_config_from_json(nlohmann::json::parse(field("config")));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad config in checkpoint: ") + e.what());
  }
  LiteralSpeaker sp(config, std::stoull(field("seed")));
  for (auto& [name, tensor] : sp.params_) {
    if (!checkpoint.params.contains(name)) throw IoError("checkpoint lacks tensor " + name);
    const auto& src = checkpoint.params.at(name);
    if (src.shape() != tensor.shape()) throw IoError("tensor " + name + " has the wrong shape");
    std::copy(src.data().begin(), src.data().end(), tensor.data().begin());
  }
  if (checkpoint.params.size() != sp.params_.size()) throw IoError("checkpoint has extra tensors");
  sp.validation_accuracy_ = std::stod(field("validation_accuracy"));
  return sp;
}

std::vector<double> literal_encode(const LiteralSpeaker& sp, std::size_t target, const Referents& r) {
  return sp.encode(r, target);
}

Utterance literal_speak(const LiteralSpeaker& sp, std::size_t target, const Referents& r) {
  return sp.speak(r, target);
}

LiteralTrainingResult train_literal_speaker(std::span<const ReferenceGame> games,
                                            const semantics::TrainingHyperparams& hyper,
                                            const nn::EncoderConfig& config) {
  if (games.empty()) throw InputError("cannot train a literal speaker on no games");
  hyper.validate();
  config.validate();

  LiteralTrainingResult result;
  result.split = semantics::split_for_validation(games, hyper.validation_fraction, hyper.seed);
  std::vector<const ReferenceGame*> train;
  std::vector<ReferenceGame> val;
  for (const auto& g : games) {
    if (std::binary_search(result.split.validation_ids.begin(), result.split.validation_ids.end(),
                           g.id)) {
      val.push_back(g);
    } else {
      train.push_back(&g);
    }
  }
  std::vector<const ReferenceGame*> val_ptrs;
  for (const auto& g : val) val_ptrs.push_back(&g);

  LiteralSpeaker sp(config, hyper.seed);
  nn::AdamState adam;
  adam.learning_rate = hyper.learning_rate;
  std::mt19937_64 rng(util::derive_seed(hyper.seed, {0x62617463ull}));

  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < train.size(); start += hyper.batch_size, ++batch_index) {
      const std::size_t count = std::min(hyper.batch_size, train.size() - start);
      sp.params().zero_grad();
      const double loss = sp.batch_loss({train.data() + start, count}, true);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch, batch_index, loss);
      nn::adam_update(sp.params(), adam);
      total += loss * static_cast<double>(count);
    }

    semantics::EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(train.size());
    rec.validation_loss = sp.batch_loss(val_ptrs, false);
    const auto said = sp.speak_all(val);
    std::size_t exact = 0;
    for (std::size_t i = 0; i < val.size(); ++i) exact += said[i] == val[i].ground_truth ? 1 : 0;
    rec.validation_accuracy = static_cast<double>(exact) / static_cast<double>(val.size());
    result.log.push_back(rec);
    if (rec.validation_accuracy > best) {
      best = rec.validation_accuracy;
      result.speaker = sp;
      result.speaker.set_validation_accuracy(best);
      result.selected_epoch = epoch;
    }
  }
  result.speaker.params().zero_grad();
  return result;
}

std::string ensemble_member_role(std::size_t k) {
  return "rsa-ensemble-member-" + std::to_string(k);
}

}  // namespace overmod::agents
