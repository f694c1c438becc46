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

#include "tractdiff/diffusion.h"

#include "tractdiff/speech_encoding.h"

namespace tractdiff {

TensorF ConditioningTokens(const TensorF& embeddings, bool pooled) {
  if (!pooled) return embeddings;
  return PoolEmbeddings(embeddings).Reshaped({1, embeddings.dim(1)});
}

DiffusionBatch<float> MakeBatch(const std::vector<const TrainingExample*>& examples,
                                bool pooled, double p_dropout, std::mt19937_64& rng) {
  if (examples.empty()) Fail(ErrorKind::kBadArgument, "empty batch");
  const TrainingExample& first = *examples.front();
  const int64_t b = static_cast<int64_t>(examples.size());
  const TensorF tokens0 = ConditioningTokens(first.embeddings, pooled);

  auto with_batch = [b](const Shape& s) {
    Shape out{b};
    out.insert(out.end(), s.begin(), s.end());
    return out;
  };
  DiffusionBatch<float> batch;
  batch.x0 = TensorF(with_batch(first.frames.shape()));
  batch.cond = TensorF(with_batch(tokens0.shape()));
  batch.init_frame = TensorF(with_batch(first.init_frame.shape()));
  for (int64_t i = 0; i < b; ++i) {
    const TrainingExample& ex = *examples[i];
    RequireSameShape(ex.frames.shape(), first.frames.shape(), "batch frames");
    RequireSameShape(ex.embeddings.shape(), first.embeddings.shape(), "batch embeddings");
    const TensorF frames = ToModelRange(ex.frames);
    const TensorF init = ToModelRange(ex.init_frame);
    const TensorF tokens = ConditioningTokens(ex.embeddings, pooled);
    std::copy(frames.data(), frames.data() + frames.size(), batch.x0.Slab0(i).data());
    std::copy(init.data(), init.data() + init.size(), batch.init_frame.Slab0(i).data());
    std::copy(tokens.data(), tokens.data() + tokens.size(), batch.cond.Slab0(i).data());
  }
  batch.is_null = ApplyCfgDropout(&batch.cond, p_dropout, rng);
  return batch;
}

}  // namespace tractdiff
