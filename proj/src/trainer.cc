// Copyright 2026 The tractdiff Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tractdiff/trainer.h"

#include <cmath>

#include "tractdiff/diffusion.h"

namespace tractdiff {

using nlohmann::json;

json TrainConfig::ToJson() const {
  return json{{"model", model.ToJson()},
              {"diffusion_steps", diffusion_steps},
              {"schedule", ScheduleKindName(schedule)},
              {"p_dropout", p_dropout},
              {"learning_rate", learning_rate},
              {"warmup_steps", warmup_steps},
              {"train_steps", train_steps},
              {"batch_size", batch_size},
              {"grad_clip", grad_clip},
              {"seed", seed},
              {"checkpoint_every", checkpoint_every},
              {"encoder", encoder},
              {"mock_dim", mock_dim}};
}

void TrainConfig::UpdateFromJson(const json& j) {
  if (!j.is_object()) Fail(ErrorKind::kBadArgument, "training config must be an object");
  try {
    if (j.contains("model")) model.UpdateFromJson(j.at("model"));
    diffusion_steps = j.value("diffusion_steps", diffusion_steps);
    if (j.contains("schedule")) schedule = ParseScheduleKind(j.at("schedule"));
    p_dropout = j.value("p_dropout", p_dropout);
    learning_rate = j.value("learning_rate", learning_rate);
    warmup_steps = j.value("warmup_steps", warmup_steps);
    train_steps = j.value("train_steps", train_steps);
    batch_size = j.value("batch_size", batch_size);
    grad_clip = j.value("grad_clip", grad_clip);
    seed = j.value("seed", seed);
    checkpoint_every = j.value("checkpoint_every", checkpoint_every);
    encoder = j.value("encoder", encoder);
    mock_dim = j.value("mock_dim", mock_dim);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kBadArgument, std::string("bad training config: ") + e.what());
  }
}

Trainer::Trainer(const TrainConfig& config)
    : config_(config),
      schedule_(MakeSchedule(config.diffusion_steps, config.schedule)),
      model_(std::make_unique<UNet3D<float>>(config.model, config.seed)),
      rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (config_.batch_size < 1) Fail(ErrorKind::kBadArgument, "batch_size must be >= 1");
  for (auto& [name, p] : model_->Params()) {
    adam_.m.emplace_back(p->value.shape());
    adam_.v.emplace_back(p->value.shape());
  }
}

TensorF Trainer::MeanInitFrame(const std::vector<TrainingExample>& data) {
  if (data.empty()) return {};
  TensorF mean(data.front().init_frame.shape());
  for (const TrainingExample& ex : data) {
    for (int64_t i = 0; i < mean.size(); ++i) mean[i] += ex.init_frame[i];
  }
  for (float& v : mean.values()) v /= static_cast<float>(data.size());
  return mean;
}

double ClipGradNorm(nn::ParamRefs<float>& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, p] : params) {
    for (float g : p->grad.values()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / norm);
    for (auto& [name, p] : params) {
      for (float& g : p->grad.values()) g *= scale;
    }
  }
  return norm;
}

void AdamUpdate(nn::ParamRefs<float>& params, AdamState* s, double lr) {
  if (s->m.size() != params.size()) {
    s->m.clear();
    s->v.clear();
    for (const auto& [name, p] : params) {
      s->m.emplace_back(p->value.shape());
      s->v.emplace_back(p->value.shape());
    }
  }
  ++s->t;
  const double c1 = 1.0 - std::pow(s->beta1, static_cast<double>(s->t));
  const double c2 = 1.0 - std::pow(s->beta2, static_cast<double>(s->t));
  for (size_t k = 0; k < params.size(); ++k) {
    nn::Param<float>* p = params[k].second;
    TensorF& m = s->m[k];
    TensorF& v = s->v[k];
    for (int64_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m[i] = static_cast<float>(s->beta1 * m[i] + (1.0 - s->beta1) * g);
      v[i] = static_cast<float>(s->beta2 * v[i] + (1.0 - s->beta2) * g * g);
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      p->value[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + s->eps));
    }
  }
}

float Trainer::Step(const std::vector<TrainingExample>& data) {
  if (data.empty()) Fail(ErrorKind::kBadArgument, "no training examples");
  std::uniform_int_distribution<size_t> pick(0, data.size() - 1);
  std::vector<const TrainingExample*> chosen;
  for (int i = 0; i < config_.batch_size; ++i) chosen.push_back(&data[pick(rng_)]);
  const DiffusionBatch<float> batch =
      MakeBatch(chosen, config_.model.pooled, config_.p_dropout, rng_);
  const LossDraw<float> draw = DrawLossNoise<float>(batch.x0.shape(), schedule_, rng_);

  model_->ZeroGrad();
  const float loss = TrainingLossAndGrad<float>(*model_, batch, schedule_, draw);
  nn::ParamRefs<float> params = model_->Params();
  ClipGradNorm(params, config_.grad_clip);
  double lr = config_.learning_rate;
  if (config_.warmup_steps > 0 && step_ < config_.warmup_steps) {
    lr *= static_cast<double>(step_ + 1) / config_.warmup_steps;
  }
  AdamUpdate(params, &adam_, lr);
  ++step_;
  return loss;
}

void Trainer::Train(const std::vector<TrainingExample>& data,
                    const std::function<void(int64_t, float)>& on_step) {
  if (rest_frame_.empty()) rest_frame_ = MeanInitFrame(data);
  while (step_ < config_.train_steps) {
    const float loss = Step(data);
    if (on_step) on_step(step_, loss);
  }
}

}  // namespace tractdiff
